#ifndef ARTID_EVAL_HPP_
#define ARTID_EVAL_HPP_

#include <string>
#include <vector>

#include "artid/errors.hpp"

namespace artid {

struct EmbeddingRecord {
  std::string track_id;
  std::string artist_id;
  std::vector<float> vector;
};

// JSON Lines, one {track_id, artist_id, vector} object per line.
std::vector<EmbeddingRecord> load_embeddings(const std::string& path);
std::string embeddings_jsonl(const std::vector<EmbeddingRecord>& records);
void save_embeddings(const std::vector<EmbeddingRecord>& records,
                     const std::string& path);

// Mean of the segment embeddings projected back onto the unit sphere.
std::vector<float> track_embedding(const std::vector<std::vector<float>>& segments);

struct ArtistModel {
  std::string artist_id;
  std::vector<float> centroid;  // reprojected mean of the members
  std::vector<std::vector<float>> members;
};

ArtistModel build_artist_model(const std::string& artist_id,
                               const std::vector<std::vector<float>>& tracks);

enum class ClassifyMode { centroid, per_track };

// Nearest neighbor by Euclidean distance; ties go to the model earliest in
// the list (callers sort models by artist_id).
std::size_t classify_nn(const std::vector<float>& test,
                        const std::vector<ArtistModel>& models, ClassifyMode mode);

double classification_accuracy(const std::vector<std::string>& assigned,
                               const std::vector<std::string>& truth);

struct VerificationScore {
  double distance = 0.0;
  bool same_artist = false;
};

// One score per (test, model) pair: distance to the model centroid.
std::vector<VerificationScore> verification_scores(
    const std::vector<EmbeddingRecord>& tests, const std::vector<ArtistModel>& models);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

// FNR(t) = fraction of same-artist pairs with distance > t; FPR(t) = fraction
// of different-artist pairs with distance <= t. The crossing is linearly
// interpolated between adjacent observed thresholds.
EerResult compute_eer(const std::vector<VerificationScore>& scores);

// Curve sampled at every observed threshold, for report output.
struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
};
std::vector<RocPoint> error_curve(const std::vector<VerificationScore>& scores);

}  // namespace artid

#endif  // ARTID_EVAL_HPP_
