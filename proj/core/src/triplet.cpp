#include "artid/triplet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "artid/parallel.hpp"
#include "artid/textio.hpp"

namespace artid {

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kIterStream = 0x69746572;
constexpr std::uint64_t kDropStream = 0x64726f70;
constexpr std::uint64_t kValStream = 0x76616c69;

}  // namespace

void TrainConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (artists_per_batch < 2) throw ConfigError("artists_per_batch must be >= 2");
  if (samples_per_artist < 2) throw ConfigError("samples_per_artist must be >= 2");
  if (tag_bias_p < 0.0 || tag_bias_p > 1.0) {
    throw ConfigError("tag_bias_p must lie in [0, 1]");
  }
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (val_triplets < 1) throw ConfigError("val_triplets must be >= 1");
  if (!(collapse_threshold >= 0.0)) {
    throw ConfigError("collapse_threshold must be >= 0");
  }
  if (collapse_patience < 1) throw ConfigError("collapse_patience must be >= 1");
}

void SampleSet::rebuild_index() {
  int max_artist = -1;
  for (int a : artist) max_artist = std::max(max_artist, a);
  by_artist.assign(static_cast<std::size_t>(max_artist + 1), {});
  for (std::size_t i = 0; i < artist.size(); ++i) {
    if (artist[i] < 0) throw DataError("negative artist ordinal in sample set");
    by_artist[artist[i]].push_back(static_cast<int>(i));
  }
}

bool SampleSet::share_tag(int a, int b) const {
  const auto& ta = tags[a];
  const auto& tb = tags[b];
  std::size_t i = 0, j = 0;
  while (i < ta.size() && j < tb.size()) {
    if (ta[i] == tb[j]) return true;
    if (ta[i] < tb[j]) ++i; else ++j;
  }
  return false;
}

Batch sample_batch(const SampleSet& set, int artists, int samples_per_artist,
                   Rng& rng) {
  if (artists < 1 || samples_per_artist < 1) {
    throw ConfigError("batch shape must be positive");
  }
  std::vector<int> eligible;
  for (int a = 0; a < set.artist_count(); ++a) {
    if (set.by_artist[a].size() >= static_cast<std::size_t>(samples_per_artist)) {
      eligible.push_back(a);
    }
  }
  if (eligible.size() < static_cast<std::size_t>(artists)) {
    throw DataError("need " + std::to_string(artists) + " artists with >= " +
                    std::to_string(samples_per_artist) + " samples, have " +
                    std::to_string(eligible.size()));
  }

  Batch batch;
  batch.artists = artists;
  batch.samples_per_artist = samples_per_artist;
  batch.samples.reserve(static_cast<std::size_t>(artists) * samples_per_artist);
  const auto chosen = rng.sample_indices(eligible.size(), static_cast<std::size_t>(artists));
  for (std::size_t k : chosen) {
    const auto& pool = set.by_artist[eligible[k]];
    const auto picks =
        rng.sample_indices(pool.size(), static_cast<std::size_t>(samples_per_artist));
    for (std::size_t p : picks) batch.samples.push_back(pool[p]);
  }
  return batch;
}

std::vector<Triplet> enumerate_triplets(const Batch& batch, Rng& rng) {
  const int N = batch.artists, n = batch.samples_per_artist;
  if (N < 2 || n < 2 ||
      batch.samples.size() != static_cast<std::size_t>(N) * n) {
    throw ConfigError("batch must hold N >= 2 artists with n >= 2 samples each");
  }
  const int B = N * n;
  std::vector<Triplet> out;
  out.reserve(static_cast<std::size_t>(N) * n * (n - 1) / 2);
  for (int k = 0; k < N; ++k) {
    const int block = k * n;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        Triplet t;
        t.anchor = block + i;
        t.positive = block + j;
        // Uniform over the (N-1)*n positions outside this artist's block.
        int neg = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(B - n)));
        if (neg >= block) neg += n;
        t.negative = neg;
        out.push_back(t);
      }
    }
  }
  return out;
}

std::vector<Triplet> apply_tag_biased_negatives(const std::vector<Triplet>& triplets,
                                                const Batch& batch,
                                                const SampleSet& set, double p,
                                                Rng& rng) {
  if (p < 0.0 || p > 1.0) throw ConfigError("tag bias probability must lie in [0, 1]");
  const int n = batch.samples_per_artist;
  std::vector<Triplet> out = triplets;
  std::vector<int> pool;
  for (auto& t : out) {
    if (!rng.bernoulli(p)) continue;
    const int anchor_sample = batch.samples[t.anchor];
    if (set.tags[anchor_sample].empty()) continue;
    const int block = (t.anchor / n) * n;
    pool.clear();
    for (int pos = 0; pos < static_cast<int>(batch.samples.size()); ++pos) {
      if (pos >= block && pos < block + n) continue;
      if (set.share_tag(anchor_sample, batch.samples[pos])) pool.push_back(pos);
    }
    if (pool.empty()) continue;  // fall back to the original negative
    t.negative = pool[rng.uniform_index(pool.size())];
  }
  return out;
}

double squared_distance(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) throw ShapeError("embedding dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

double triplet_loss(const std::vector<float>& e_a, const std::vector<float>& e_p,
                    const std::vector<float>& e_n, double alpha) {
  const double v = squared_distance(e_a, e_p) - squared_distance(e_a, e_n) + alpha;
  return v > 0.0 ? v : 0.0;
}

TripletGrads triplet_loss_grads(const std::vector<float>& e_a,
                                const std::vector<float>& e_p,
                                const std::vector<float>& e_n, double alpha) {
  TripletGrads g;
  const std::size_t d = e_a.size();
  g.anchor.assign(d, 0.0f);
  g.positive.assign(d, 0.0f);
  g.negative.assign(d, 0.0f);
  if (triplet_loss(e_a, e_p, e_n, alpha) > 0.0) {
    for (std::size_t i = 0; i < d; ++i) {
      g.anchor[i] = 2.0f * (e_n[i] - e_p[i]);
      g.positive[i] = 2.0f * (e_p[i] - e_a[i]);
      g.negative[i] = 2.0f * (e_a[i] - e_n[i]);
    }
  }
  return g;
}

Hardness classify_hardness(const std::vector<float>& e_a,
                           const std::vector<float>& e_p,
                           const std::vector<float>& e_n, double alpha) {
  const double v = squared_distance(e_a, e_p) - squared_distance(e_a, e_n);
  if (v >= 0.0) return Hardness::hard;
  if (v > -alpha) return Hardness::semi_hard;
  return Hardness::easy;
}

std::vector<Triplet> filter_trainable(const std::vector<Triplet>& triplets,
                                      const std::vector<std::vector<float>>& embeddings,
                                      double alpha) {
  std::vector<Triplet> out;
  out.reserve(triplets.size());
  for (const auto& t : triplets) {
    if (triplet_loss(embeddings[t.anchor], embeddings[t.positive],
                     embeddings[t.negative], alpha) > 0.0) {
      out.push_back(t);
    }
  }
  return out;
}

CollapseReport detect_collapse(const std::vector<std::vector<float>>& embeddings,
                               double variance_threshold) {
  if (embeddings.size() < 2) {
    throw ConfigError("collapse detection needs at least two embeddings");
  }
  const std::size_t d = embeddings[0].size();
  const double inv_m = 1.0 / static_cast<double>(embeddings.size());
  double total_var = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    double mean = 0.0, sq = 0.0;
    for (const auto& e : embeddings) {
      if (e.size() != d) throw ShapeError("embedding dimension mismatch");
      mean += e[k];
      sq += static_cast<double>(e[k]) * e[k];
    }
    mean *= inv_m;
    const double var = sq * inv_m - mean * mean;
    total_var += var > 0.0 ? var : 0.0;
  }
  CollapseReport report;
  report.variance = total_var / static_cast<double>(d);
  report.collapsed = report.variance < variance_threshold;
  return report;
}

namespace {

struct ValTriplet {
  int anchor, positive, negative;  // sample indices in the validation set
};

// A fixed triplet set drawn once, so the early-stop signal is comparable
// across evaluations.
std::vector<ValTriplet> build_val_triplets(const SampleSet& val, int count, Rng rng) {
  std::vector<int> anchor_artists;
  for (int a = 0; a < val.artist_count(); ++a) {
    if (val.by_artist[a].size() >= 2) anchor_artists.push_back(a);
  }
  if (val.size() < 3 || anchor_artists.empty() || val.artist_count() < 2) return {};

  std::vector<ValTriplet> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    const int a = anchor_artists[rng.uniform_index(anchor_artists.size())];
    const auto& pool = val.by_artist[a];
    const auto pair = rng.sample_indices(pool.size(), 2);
    int neg = -1;
    // Rejection over samples keeps the draw uniform across other artists'
    // samples; termination is guaranteed since another artist exists.
    do {
      neg = static_cast<int>(rng.uniform_index(val.size()));
    } while (val.artist[neg] == a);
    out.push_back({pool[pair[0]], pool[pair[1]], neg});
  }
  return out;
}

double mean_validation_loss(const std::vector<ValTriplet>& triplets,
                            const SampleSet& val, const Parameters<float>& params,
                            const NetworkConfig& net_config, double alpha,
                            int threads) {
  std::vector<int> needed;
  for (const auto& t : triplets) {
    needed.push_back(t.anchor);
    needed.push_back(t.positive);
    needed.push_back(t.negative);
  }
  std::sort(needed.begin(), needed.end());
  needed.erase(std::unique(needed.begin(), needed.end()), needed.end());

  std::vector<std::vector<float>> emb(val.size());
  parallel_for(needed.size(), threads, [&](std::size_t k) {
    emb[needed[k]] = net_forward(params, net_config, val.features[needed[k]],
                                 RunMode::infer, nullptr, nullptr);
  });

  double total = 0.0;
  for (const auto& t : triplets) {
    total += triplet_loss(emb[t.anchor], emb[t.positive], emb[t.negative], alpha);
  }
  return total / static_cast<double>(triplets.size());
}

}  // namespace

TrainResult train(const SampleSet& train_set, const SampleSet& val_set,
                  const NetworkConfig& net_config, const TrainConfig& train_config,
                  int threads) {
  net_config.validate();
  train_config.validate();
  if (train_set.features.size() != train_set.size()) {
    throw ConfigError("training sample set is missing features");
  }
  if (val_set.features.size() != val_set.size()) {
    throw ConfigError("validation sample set is missing features");
  }

  const int N = train_config.artists_per_batch;
  const int n = train_config.samples_per_artist;
  const std::size_t batch_size = static_cast<std::size_t>(N) * n;

  TrainResult result;
  result.params = init_params(net_config, derive_seed(train_config.seed, kInitStream));
  result.optimizer = OptimizerState<float>::zeros_like(result.params);
  result.stop_reason = "epochs";

  long long total_iterations = 0;
  if (train_config.epochs > 0) {
    const long long per_epoch =
        std::max<long long>(1, (static_cast<long long>(train_set.size()) +
                                static_cast<long long>(batch_size) - 1) /
                                   static_cast<long long>(batch_size));
    total_iterations = per_epoch * train_config.epochs;
  }
  if (train_config.max_iterations > 0) {
    if (total_iterations > train_config.max_iterations) {
      result.stop_reason = "max_iterations";
    }
    total_iterations = std::min<long long>(total_iterations, train_config.max_iterations);
  }
  if (total_iterations == 0) return result;

  const auto val_triplets = build_val_triplets(
      val_set, train_config.val_triplets,
      Rng(derive_seed(train_config.seed, kValStream)));

  Parameters<float> best_params = result.params;
  double best_val = std::numeric_limits<double>::infinity();
  bool improved_once = false;
  int evals_without_improvement = 0;
  int collapse_streak = 0;

  Parameters<float> grads = Parameters<float>::zeros_like(net_config);
  const auto t_start = std::chrono::steady_clock::now();

  for (long long iter = 0; iter < total_iterations; ++iter) {
    Rng iter_rng(derive_seed(train_config.seed, kIterStream, static_cast<std::uint64_t>(iter)));
    const Batch batch = sample_batch(train_set, N, n, iter_rng);

    std::vector<ForwardCache<float>> caches(batch.samples.size());
    std::vector<std::vector<float>> emb(batch.samples.size());
    parallel_for(batch.samples.size(), threads, [&](std::size_t i) {
      Rng drop_rng(derive_seed(train_config.seed, kDropStream,
                               static_cast<std::uint64_t>(iter), i + 1));
      emb[i] = net_forward(result.params, net_config,
                           train_set.features[batch.samples[i]], RunMode::train,
                           &drop_rng, &caches[i]);
    });

    auto triplets = enumerate_triplets(batch, iter_rng);
    triplets = apply_tag_biased_negatives(triplets, batch, train_set,
                                          train_config.tag_bias_p, iter_rng);
    const auto active = filter_trainable(triplets, emb, train_config.alpha);
    const CollapseReport collapse =
        detect_collapse(emb, train_config.collapse_threshold);

    double mean_active_loss = 0.0;
    if (!active.empty()) {
      const float inv_active = 1.0f / static_cast<float>(active.size());
      std::vector<std::vector<float>> emb_grads(batch.samples.size());
      auto add_scaled = [&](int pos, const std::vector<float>& g) {
        auto& slot = emb_grads[pos];
        if (slot.empty()) slot.assign(g.size(), 0.0f);
        for (std::size_t k = 0; k < g.size(); ++k) slot[k] += g[k] * inv_active;
      };
      for (const auto& t : active) {
        mean_active_loss += triplet_loss(emb[t.anchor], emb[t.positive],
                                         emb[t.negative], train_config.alpha);
        const TripletGrads g = triplet_loss_grads(
            emb[t.anchor], emb[t.positive], emb[t.negative], train_config.alpha);
        add_scaled(t.anchor, g.anchor);
        add_scaled(t.positive, g.positive);
        add_scaled(t.negative, g.negative);
      }
      mean_active_loss /= static_cast<double>(active.size());

      std::vector<int> touched;
      for (std::size_t i = 0; i < emb_grads.size(); ++i) {
        if (!emb_grads[i].empty()) touched.push_back(static_cast<int>(i));
      }
      std::vector<Parameters<float>> buffers(touched.size());
      parallel_for(touched.size(), threads, [&](std::size_t k) {
        buffers[k] = Parameters<float>::zeros_like(net_config);
        net_backward(result.params, net_config, caches[touched[k]],
                     emb_grads[touched[k]], buffers[k]);
      });

      grads = Parameters<float>::zeros_like(net_config);
      for (auto& buffer : buffers) {
        std::size_t slot = 0;
        std::vector<std::vector<float>*> dst;
        grads.for_each_tensor([&](std::vector<float>& t) { dst.push_back(&t); });
        buffer.for_each_tensor([&](std::vector<float>& t) {
          auto& d = *dst[slot++];
          for (std::size_t k = 0; k < t.size(); ++k) d[k] += t[k];
        });
      }
      rmsprop_step(result.params, grads, result.optimizer);
    }

    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                  t_start)
            .count();
    result.history.push_back(HistoryRow{static_cast<int>(iter), mean_active_loss,
                                        static_cast<int>(active.size()),
                                        collapse.variance, wall_ms});
    result.iterations_run = static_cast<int>(iter) + 1;

    collapse_streak = collapse.collapsed ? collapse_streak + 1 : 0;
    if (collapse_streak >= train_config.collapse_patience) {
      throw CollapseError("embeddings collapsed for " +
                          std::to_string(collapse_streak) +
                          " consecutive iterations (variance " +
                          format_double(collapse.variance) + ")");
    }

    if (!val_triplets.empty() && (iter + 1) % train_config.eval_every == 0) {
      const double val_loss =
          mean_validation_loss(val_triplets, val_set, result.params, net_config,
                               train_config.alpha, threads);
      if (val_loss < best_val - 1e-12) {
        best_val = val_loss;
        best_params = result.params;
        improved_once = true;
        evals_without_improvement = 0;
      } else if (++evals_without_improvement >= train_config.patience) {
        result.stop_reason = "early_stop";
        break;
      }
    }
  }

  if (improved_once) result.params = best_params;
  return result;
}

void save_history_csv(const std::vector<HistoryRow>& history, const std::string& path) {
  std::ostringstream out;
  CsvWriter csv(out);
  csv.row({"iteration", "mean_active_loss", "active_count", "collapse_variance",
           "wall_time_ms"});
  for (const auto& row : history) {
    csv.row({std::to_string(row.iteration), format_double(row.mean_active_loss),
             std::to_string(row.active_count), format_double(row.collapse_variance),
             format_double(row.wall_time_ms)});
  }
  write_text_file(path, out.str());
}

}  // namespace artid
