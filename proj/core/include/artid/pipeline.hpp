#ifndef ARTID_PIPELINE_HPP_
#define ARTID_PIPELINE_HPP_

#include <string>
#include <vector>

#include "artid/checkpoint.hpp"
#include "artid/dataset.hpp"
#include "artid/eval.hpp"
#include "artid/features.hpp"
#include "artid/triplet.hpp"

namespace artid {

// Relative audio paths resolve against the manifest's directory.
std::string resolve_audio_path(const std::string& base_dir,
                               const std::string& audio_path);

struct PipelineData {
  SampleSet train;
  SampleSet val;
  std::vector<std::string> train_artist_ids;  // ordinal -> artist_id
  std::vector<std::string> val_artist_ids;
  std::vector<std::string> tag_names;  // shared tag vocabulary
};

// Builds training/validation sample sets from the manifest's "train" and
// "val" splits: every track is cut into contiguous segments and each segment
// becomes one mining sample carrying the track's artist and tags.
PipelineData load_training_data(const Manifest& manifest, const std::string& base_dir,
                                const FeatureConfig& features, int threads);

// Track-level embeddings: `segments` linearly spaced windows per track,
// forward in infer mode, mean then reprojection onto the sphere.
std::vector<EmbeddingRecord> embed_tracks(const Manifest& records,
                                          const std::string& base_dir,
                                          const Checkpoint& checkpoint,
                                          int segments, int threads);

}  // namespace artid

#endif  // ARTID_PIPELINE_HPP_
