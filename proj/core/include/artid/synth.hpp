#ifndef ARTID_SYNTH_HPP_
#define ARTID_SYNTH_HPP_

#include <cstdint>
#include <string>

#include "artid/dataset.hpp"

namespace artid {

// Desk-scale stand-in for catalog audio: every artist owns a disjoint set of
// partial frequencies with fixed envelope weights and phases (the timbral
// signature); tracks jitter the partial amplitudes and add white noise.
struct SyntheticConfig {
  int train_artists = 20;
  int tracks_per_artist = 10;
  double duration_seconds = 12.0;
  int partials = 8;
  double jitter = 0.1;        // relative per-track amplitude jitter
  double noise_level = 0.01;  // additive white-noise amplitude
  int eval_groups = 8;        // held-out homonym-style groups of 2 to 4 artists
  int tag_count = 4;
  double sample_rate = 22050.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticDataset {
  Manifest manifest;
  GroupMap groups;
};

// Writes out_dir/audio/*.wav, out_dir/manifest.jsonl, and out_dir/groups.json.
// Pure function of the config: same seed gives bit-identical files.
SyntheticDataset generate_synthetic(const SyntheticConfig& config,
                                    const std::string& out_dir, int threads = 1);

}  // namespace artid

#endif  // ARTID_SYNTH_HPP_
