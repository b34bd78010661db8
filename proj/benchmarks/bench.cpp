// Microbenchmarks for the hot paths: feature extraction, the forward pass,
// mining, and clustering. Build with -DARTID_BUILD_BENCHMARKS=ON.
#include <benchmark/benchmark.h>

#include <vector>

#include "artid/cluster.hpp"
#include "artid/features.hpp"
#include "artid/net.hpp"
#include "artid/rng.hpp"
#include "artid/triplet.hpp"

namespace {

using namespace artid;

PcmSignal test_signal(double seconds) {
  PcmSignal s;
  s.sample_rate = 22050.0;
  s.samples.resize(static_cast<std::size_t>(seconds * s.sample_rate));
  Rng rng(17);
  for (float& v : s.samples) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  return s;
}

MelSpectrogram test_mel(const FeatureConfig& cfg, double seconds) {
  return mel_spectrogram(test_signal(seconds), cfg);
}

void bm_mel_spectrogram(benchmark::State& state) {
  const FeatureConfig cfg;
  const PcmSignal signal = test_signal(3.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mel_spectrogram(signal, cfg));
  }
}
BENCHMARK(bm_mel_spectrogram)->Unit(benchmark::kMillisecond);

void bm_net_forward_infer(benchmark::State& state) {
  NetworkConfig cfg;
  cfg.channels = {static_cast<int>(state.range(0)),
                  static_cast<int>(state.range(0) * 2),
                  static_cast<int>(state.range(0) * 2)};
  const Parameters<float> params = init_params(cfg, 3);
  const MelSpectrogram mel = test_mel(FeatureConfig{}, 3.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        net_forward(params, cfg, mel, RunMode::infer, nullptr, nullptr));
  }
}
BENCHMARK(bm_net_forward_infer)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void bm_net_train_step(benchmark::State& state) {
  NetworkConfig cfg;
  cfg.channels = {8, 16, 16};
  const Parameters<float> params = init_params(cfg, 3);
  const MelSpectrogram mel = test_mel(FeatureConfig{}, 3.0);
  Rng rng(5);
  std::vector<float> g(cfg.embedding_dim, 0.01f);
  for (auto _ : state) {
    ForwardCache<float> cache;
    benchmark::DoNotOptimize(
        net_forward(params, cfg, mel, RunMode::train, &rng, &cache));
    Parameters<float> grads = Parameters<float>::zeros_like(cfg);
    net_backward(params, cfg, cache, g, grads);
    benchmark::DoNotOptimize(grads);
  }
}
BENCHMARK(bm_net_train_step)->Unit(benchmark::kMillisecond);

void bm_triplet_mining(benchmark::State& state) {
  const int artists = 16, per_artist = 4, dim = 32;
  SampleSet set;
  set.artist.resize(artists * per_artist * 4);
  set.tags.resize(set.artist.size());
  Rng init(11);
  for (std::size_t i = 0; i < set.artist.size(); ++i) {
    set.artist[i] = static_cast<int>(i) / (per_artist * 4);
    set.tags[i] = {set.artist[i] % 4};
  }
  set.rebuild_index();

  std::vector<std::vector<float>> embeddings(artists * per_artist,
                                             std::vector<float>(dim));
  for (auto& e : embeddings) {
    for (float& v : e) v = static_cast<float>(init.uniform(-1.0, 1.0));
    e = l2_normalize(e);
  }

  Rng rng(13);
  for (auto _ : state) {
    const Batch batch = sample_batch(set, artists, per_artist, rng);
    auto triplets = enumerate_triplets(batch, rng);
    triplets = apply_tag_biased_negatives(triplets, batch, set, 0.5, rng);
    benchmark::DoNotOptimize(filter_trainable(triplets, embeddings, 0.2));
  }
}
BENCHMARK(bm_triplet_mining);

void bm_ward_linkage(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(7);
  std::vector<std::vector<float>> pts(n, std::vector<float>(32));
  for (auto& p : pts) {
    for (float& v : p) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(ward_linkage(pts));
  }
}
BENCHMARK(bm_ward_linkage)->Arg(50)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
