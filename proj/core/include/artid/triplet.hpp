#ifndef ARTID_TRIPLET_HPP_
#define ARTID_TRIPLET_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "artid/errors.hpp"
#include "artid/features.hpp"
#include "artid/net.hpp"
#include "artid/rng.hpp"

namespace artid {

struct TrainConfig {
  double alpha = 0.2;          // triplet margin
  int artists_per_batch = 16;  // N
  int samples_per_artist = 4;  // n
  double tag_bias_p = 0.0;     // probability of preferring a same-tag negative
  int epochs = 30;
  int max_iterations = 0;  // 0 = bounded by epochs only
  int patience = 10;       // validation evaluations without improvement
  int eval_every = 20;     // iterations between validation evaluations
  int val_triplets = 256;  // size of the fixed validation triplet set
  double collapse_threshold = 1e-4;
  int collapse_patience = 50;  // consecutive collapsed iterations tolerated
  std::uint64_t seed = 0;

  void validate() const;
};

// Mining works on sample indices; features are carried alongside so the
// index-level operations stay testable without audio.
struct SampleSet {
  std::vector<MelSpectrogram> features;  // may be empty for index-only use
  std::vector<int> artist;               // per-sample artist ordinal
  std::vector<std::vector<int>> tags;    // per-sample sorted tag ordinals
  std::vector<std::vector<int>> by_artist;

  std::size_t size() const { return artist.size(); }
  int artist_count() const { return static_cast<int>(by_artist.size()); }
  // Rebuilds by_artist from the artist column.
  void rebuild_index();
  bool share_tag(int a, int b) const;
};

// N·n sample indices, artist-major: positions [k·n, (k+1)·n) hold one artist.
struct Batch {
  std::vector<int> samples;
  int artists = 0;             // N
  int samples_per_artist = 0;  // n
};

// Positions into the batch, not into the sample set.
struct Triplet {
  int anchor = 0;
  int positive = 0;
  int negative = 0;
};

enum class Hardness { hard, semi_hard, easy };

struct CollapseReport {
  double variance = 0.0;  // mean per-dimension population variance
  bool collapsed = false;
};

// Picks N distinct artists having at least n samples, then n of their
// samples without replacement.
Batch sample_batch(const SampleSet& set, int artists, int samples_per_artist,
                   Rng& rng);

// One triplet per within-artist positive pair; the negative is drawn
// uniformly from the other artists' batch positions.
std::vector<Triplet> enumerate_triplets(const Batch& batch, Rng& rng);

// With probability p, and when the anchor is tagged and a same-tag
// other-artist sample exists in the batch, redraws the negative uniformly
// from that same-tag pool; otherwise the original negative stays.
std::vector<Triplet> apply_tag_biased_negatives(const std::vector<Triplet>& triplets,
                                                const Batch& batch,
                                                const SampleSet& set, double p,
                                                Rng& rng);

double squared_distance(const std::vector<float>& a, const std::vector<float>& b);

double triplet_loss(const std::vector<float>& e_a, const std::vector<float>& e_p,
                    const std::vector<float>& e_n, double alpha);

// g_a = 2(e_n - e_p), g_p = 2(e_p - e_a), g_n = 2(e_a - e_n) when the loss is
// active; all zero otherwise (subgradient 0 at the kink).
struct TripletGrads {
  std::vector<float> anchor, positive, negative;
};
TripletGrads triplet_loss_grads(const std::vector<float>& e_a,
                                const std::vector<float>& e_p,
                                const std::vector<float>& e_n, double alpha);

Hardness classify_hardness(const std::vector<float>& e_a,
                           const std::vector<float>& e_p,
                           const std::vector<float>& e_n, double alpha);

// Exactly the triplets with positive loss, order preserved.
std::vector<Triplet> filter_trainable(const std::vector<Triplet>& triplets,
                                      const std::vector<std::vector<float>>& embeddings,
                                      double alpha);

CollapseReport detect_collapse(const std::vector<std::vector<float>>& embeddings,
                               double variance_threshold);

struct HistoryRow {
  int iteration = 0;
  double mean_active_loss = 0.0;
  int active_count = 0;
  double collapse_variance = 0.0;
  double wall_time_ms = 0.0;
};

struct TrainResult {
  Parameters<float> params;
  OptimizerState<float> optimizer;
  std::vector<HistoryRow> history;
  int iterations_run = 0;
  std::string stop_reason;  // "epochs", "max_iterations", "early_stop"
};

// One mining-and-update loop: sample a batch, embed it (train mode), build
// triplets, tag-bias, keep the active ones, average their gradients, and take
// an RMSProp step. Validation loss on a fixed seeded triplet set drives early
// stopping; persistent collapse aborts with a numeric error.
TrainResult train(const SampleSet& train_set, const SampleSet& val_set,
                  const NetworkConfig& net_config, const TrainConfig& train_config,
                  int threads = 1);

void save_history_csv(const std::vector<HistoryRow>& history, const std::string& path);

}  // namespace artid

#endif  // ARTID_TRIPLET_HPP_
