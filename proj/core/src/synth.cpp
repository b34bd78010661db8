#include "artid/synth.hpp"

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <vector>

#include "artid/audio_io.hpp"
#include "artid/parallel.hpp"
#include "artid/rng.hpp"

namespace artid {

namespace {

struct ArtistSignature {
  std::string artist_id;
  std::string tag;
  bool held_out = false;
  std::string group_id;  // held-out artists only
  std::vector<double> freqs;
  std::vector<double> weights;
  std::vector<double> phases;
};

std::string two_digits(int v) {
  std::string s = std::to_string(v);
  return s.size() < 2 ? "0" + s : s;
}

}  // namespace

void SyntheticConfig::validate() const {
  if (train_artists < 1) throw ConfigError("synth needs at least one train artist");
  if (tracks_per_artist < 1) throw ConfigError("tracks_per_artist must be >= 1");
  if (!(duration_seconds > 0.0)) throw ConfigError("duration_seconds must be positive");
  if (partials < 1) throw ConfigError("partials must be >= 1");
  if (jitter < 0.0) throw ConfigError("jitter must be >= 0");
  if (noise_level < 0.0) throw ConfigError("noise_level must be >= 0");
  if (eval_groups < 0) throw ConfigError("eval_groups must be >= 0");
  if (tag_count < 1) throw ConfigError("tag_count must be >= 1");
  if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be positive");
}

SyntheticDataset generate_synthetic(const SyntheticConfig& config,
                                    const std::string& out_dir, int threads) {
  config.validate();
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "audio");

  Rng layout_rng(derive_seed(config.seed, 0x73796e74));

  // Held-out group sizes first, so the total artist count is known before
  // the frequency pool is carved up.
  std::vector<int> group_sizes(static_cast<std::size_t>(config.eval_groups));
  int eval_artists = 0;
  for (auto& size : group_sizes) {
    size = 2 + static_cast<int>(layout_rng.uniform_index(3));
    eval_artists += size;
  }
  const int total_artists = config.train_artists + eval_artists;

  // One global log-spaced pool over 200..8000 Hz, shuffled, then handed out
  // in disjoint consecutive slices: no two artists share a partial.
  const std::size_t pool_size =
      static_cast<std::size_t>(total_artists) * config.partials;
  std::vector<double> pool(pool_size);
  const double lo = 200.0, hi = 8000.0;
  for (std::size_t i = 0; i < pool_size; ++i) {
    const double u = pool_size > 1 ? static_cast<double>(i) / (pool_size - 1) : 0.0;
    pool[i] = lo * std::pow(hi / lo, u);
  }
  layout_rng.shuffle(pool);

  std::vector<ArtistSignature> artists;
  artists.reserve(total_artists);
  GroupMap groups;
  int next_artist = 0;
  auto make_signature = [&](const std::string& id, bool held_out,
                            const std::string& group_id) {
    ArtistSignature sig;
    sig.artist_id = id;
    sig.held_out = held_out;
    sig.group_id = group_id;
    sig.tag = "genre_" + std::to_string(next_artist % config.tag_count);
    Rng art_rng(derive_seed(config.seed, 0x61727469, next_artist));
    const std::size_t base = static_cast<std::size_t>(next_artist) * config.partials;
    for (int p = 0; p < config.partials; ++p) {
      sig.freqs.push_back(pool[base + p]);
      sig.weights.push_back(art_rng.uniform(0.5, 1.0));
      sig.phases.push_back(art_rng.uniform(0.0, 2.0 * std::numbers::pi));
    }
    ++next_artist;
    artists.push_back(std::move(sig));
  };

  for (int a = 0; a < config.train_artists; ++a) {
    make_signature("tr" + two_digits(a), false, "");
  }
  for (int g = 0; g < config.eval_groups; ++g) {
    const std::string group_id = "g" + two_digits(g);
    for (int m = 0; m < group_sizes[g]; ++m) {
      const std::string id = "ev" + two_digits(g) + "_" + std::to_string(m);
      make_signature(id, true, group_id);
      groups[group_id].push_back(id);
    }
  }

  const std::size_t track_len =
      static_cast<std::size_t>(std::llround(config.duration_seconds * config.sample_rate));

  struct TrackJob {
    int artist_idx;
    int track_idx;
    std::string track_id;
    std::string wav_path;  // relative to out_dir
  };
  std::vector<TrackJob> jobs;
  Manifest manifest;
  for (int a = 0; a < total_artists; ++a) {
    const auto& sig = artists[a];
    for (int t = 0; t < config.tracks_per_artist; ++t) {
      TrackJob job;
      job.artist_idx = a;
      job.track_idx = t;
      job.track_id = sig.artist_id + "_t" + two_digits(t);
      job.wav_path = "audio/" + job.track_id + ".wav";
      jobs.push_back(job);

      ManifestRecord r;
      r.track_id = job.track_id;
      r.artist_id = sig.artist_id;
      r.album_id = sig.artist_id + "_alb" + std::to_string(t / 2);
      r.tags = {sig.tag};
      r.audio_path = job.wav_path;
      if (sig.held_out) {
        r.split = "eval";
      } else if (config.tracks_per_artist >= 3 &&
                 t >= config.tracks_per_artist - 2) {
        r.split = "val";
      } else {
        r.split = "train";
      }
      manifest.push_back(std::move(r));
    }
  }

  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const TrackJob& job = jobs[j];
    const ArtistSignature& sig = artists[job.artist_idx];
    Rng track_rng(derive_seed(config.seed, 0x7472616b, job.artist_idx, job.track_idx));

    const int P = config.partials;
    std::vector<double> amps(P);
    double amp_sum = 0.0;
    for (int p = 0; p < P; ++p) {
      amps[p] = sig.weights[p] * (1.0 + config.jitter * (2.0 * track_rng.uniform() - 1.0));
      amp_sum += amps[p];
    }
    const double scale = 0.7 / amp_sum;

    std::vector<std::complex<double>> phasor(P), rot(P);
    for (int p = 0; p < P; ++p) {
      phasor[p] = std::polar(1.0, sig.phases[p]);
      rot[p] = std::polar(1.0, 2.0 * std::numbers::pi * sig.freqs[p] / config.sample_rate);
    }

    PcmSignal signal;
    signal.sample_rate = config.sample_rate;
    signal.samples.resize(track_len);
    const bool noisy = config.noise_level > 0.0;
    for (std::size_t i = 0; i < track_len; ++i) {
      double v = 0.0;
      for (int p = 0; p < P; ++p) {
        v += amps[p] * phasor[p].imag();
        phasor[p] *= rot[p];
      }
      v *= scale;
      if (noisy) v += config.noise_level * (2.0 * track_rng.uniform() - 1.0);
      signal.samples[i] = static_cast<float>(v);
    }
    save_wav((fs::path(out_dir) / job.wav_path).string(), signal);
  });

  save_manifest(manifest, (fs::path(out_dir) / "manifest.jsonl").string());
  save_group_map(groups, (fs::path(out_dir) / "groups.json").string());
  return SyntheticDataset{std::move(manifest), std::move(groups)};
}

}  // namespace artid
