#include "artid/features.hpp"

#include <fftw3.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>

#include <json.hpp>

#include "artid/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "feature cache format is little-endian");

namespace artid {

namespace {

constexpr double kPi = 3.14159265358979323846;

// FFTW plan creation and destruction are not thread-safe.
std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffers {
  double* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan plan = nullptr;
  int n = 0;

  explicit FftwBuffers(int n_fft) : n(n_fft) {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    in = fftw_alloc_real(static_cast<std::size_t>(n_fft));
    out = fftw_alloc_complex(static_cast<std::size_t>(n_fft / 2 + 1));
    plan = fftw_plan_dft_r2c_1d(n_fft, in, out, FFTW_ESTIMATE);
  }
  ~FftwBuffers() {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
  FftwBuffers(const FftwBuffers&) = delete;
  FftwBuffers& operator=(const FftwBuffers&) = delete;
};

std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) {
    w[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / n));
  }
  return w;
}

}  // namespace

void FeatureConfig::validate() const {
  if (sample_rate <= 0.0) throw ConfigError("sample_rate must be positive");
  if (overlap_fraction <= 0.0 || overlap_fraction >= 1.0) {
    throw ConfigError("overlap_fraction must lie in (0, 1)");
  }
  if (n_mels < 1) throw ConfigError("n_mels must be at least 1");
  if (std::abs(segment_seconds - 3.0) > 1e-9 &&
      std::abs(segment_seconds - 9.0) > 1e-9) {
    throw ConfigError("segment_seconds must be 3 or 9");
  }
  if (window_samples() < 2) throw ConfigError("window too short");
  if (hop_samples() < 1) throw ConfigError("hop must be at least one sample");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<double> mel_center_frequencies(const FeatureConfig& config) {
  const double mel_max = hz_to_mel(config.sample_rate / 2.0);
  std::vector<double> centers(config.n_mels);
  for (int m = 0; m < config.n_mels; ++m) {
    centers[m] = mel_to_hz((m + 1) * mel_max / (config.n_mels + 1));
  }
  return centers;
}

std::vector<double> mel_filterbank(int n_fft_bins, const FeatureConfig& config) {
  config.validate();
  if (n_fft_bins < config.n_mels) {
    throw ConfigError("n_fft_bins must be at least n_mels");
  }
  const int n_fft = (n_fft_bins - 1) * 2;
  const double bin_hz = config.sample_rate / n_fft;
  const double mel_max = hz_to_mel(config.sample_rate / 2.0);
  const int n_mels = config.n_mels;

  std::vector<double> edges(n_mels + 2);
  for (int k = 0; k < n_mels + 2; ++k) {
    edges[k] = mel_to_hz(k * mel_max / (n_mels + 1));
  }

  std::vector<double> bank(static_cast<std::size_t>(n_mels) * n_fft_bins, 0.0);
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < n_fft_bins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > lo && f < center) {
        w = (f - lo) / (center - lo);
      } else if (f >= center && f < hi) {
        w = (hi - f) / (hi - center);
      }
      bank[static_cast<std::size_t>(m) * n_fft_bins + k] = w;
    }
  }
  return bank;
}

MelSpectrogram mel_spectrogram(const PcmSignal& signal, const FeatureConfig& config) {
  config.validate();
  if (std::abs(signal.sample_rate - config.sample_rate) > 1e-6) {
    throw ConfigError("signal sample rate does not match the feature config");
  }
  const int win = config.window_samples();
  const int hop = config.hop_samples();
  const long n = static_cast<long>(signal.samples.size());
  if (n < win) {
    throw InsufficientInputError("signal shorter than one analysis window");
  }
  const int frames = static_cast<int>((n - win) / hop + 1);
  const int bins = config.fft_bins();
  const int n_mels = config.n_mels;

  const std::vector<double> window = hann_window(win);
  const std::vector<double> bank = mel_filterbank(bins, config);

  MelSpectrogram mel;
  mel.frames = frames;
  mel.n_mels = n_mels;
  mel.frame_rate = config.sample_rate / hop;
  mel.values.assign(static_cast<std::size_t>(frames) * n_mels, 0.0f);

  FftwBuffers fft(win);
  std::vector<double> power(bins);
  for (int t = 0; t < frames; ++t) {
    const long start = static_cast<long>(t) * hop;
    for (int i = 0; i < win; ++i) {
      fft.in[i] = static_cast<double>(signal.samples[start + i]) * window[i];
    }
    fftw_execute(fft.plan);
    for (int k = 0; k < bins; ++k) {
      const double re = fft.out[k][0];
      const double im = fft.out[k][1];
      power[k] = re * re + im * im;
    }
    float* row = mel.values.data() + static_cast<std::size_t>(t) * n_mels;
    for (int m = 0; m < n_mels; ++m) {
      const double* w = bank.data() + static_cast<std::size_t>(m) * bins;
      double acc = 0.0;
      for (int k = 0; k < bins; ++k) acc += w[k] * power[k];
      row[m] = static_cast<float>(acc);
    }
  }
  return mel;
}

std::vector<long> segment_offsets(long track_samples, long segment_samples,
                                  int count, SegmentPolicy policy) {
  if (segment_samples <= 0) throw ConfigError("segment length must be positive");
  if (track_samples < segment_samples) {
    throw InsufficientInputError("track shorter than one segment");
  }
  std::vector<long> offsets;
  if (policy == SegmentPolicy::linear_spaced) {
    if (count < 1) throw ConfigError("linear-spaced extraction needs count >= 1");
    if (count == 1) return {0};
    const long span = track_samples - segment_samples;
    offsets.reserve(count);
    for (int i = 0; i < count; ++i) {
      offsets.push_back(static_cast<long>(
          std::llround(static_cast<double>(i) * span / (count - 1))));
    }
  } else {
    const long fit = track_samples / segment_samples;
    long take = (count <= 0) ? fit : std::min<long>(count, fit);
    offsets.reserve(take);
    for (long i = 0; i < take; ++i) offsets.push_back(i * segment_samples);
  }
  return offsets;
}

std::vector<MelSpectrogram> extract_segments(const PcmSignal& track,
                                             const FeatureConfig& config,
                                             int count, SegmentPolicy policy) {
  config.validate();
  const long seg = config.segment_samples();
  const std::vector<long> offsets =
      segment_offsets(static_cast<long>(track.samples.size()), seg, count, policy);

  std::vector<MelSpectrogram> out;
  out.reserve(offsets.size());
  PcmSignal slice;
  slice.sample_rate = track.sample_rate;
  for (long off : offsets) {
    slice.samples.assign(track.samples.begin() + off,
                         track.samples.begin() + off + seg);
    out.push_back(mel_spectrogram(slice, config));
  }
  return out;
}

void save_feature_cache(const MelSpectrogram& mel, const std::string& path) {
  std::ofstream raw(path, std::ios::binary);
  if (!raw) throw DataError("cannot write feature cache: " + path);
  raw.write(reinterpret_cast<const char*>(mel.values.data()),
            static_cast<std::streamsize>(mel.values.size() * sizeof(float)));
  raw.close();

  nlohmann::json meta;
  meta["frames"] = mel.frames;
  meta["n_mels"] = mel.n_mels;
  meta["frame_rate"] = mel.frame_rate;
  std::ofstream side(path + ".json", std::ios::binary);
  if (!side) throw DataError("cannot write feature cache sidecar: " + path);
  side << meta.dump() << '\n';
}

MelSpectrogram load_feature_cache(const std::string& path) {
  std::ifstream side(path + ".json", std::ios::binary);
  if (!side) throw PersistenceError("missing feature cache sidecar: " + path);
  nlohmann::json meta;
  try {
    side >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw PersistenceError("bad feature cache sidecar: " + std::string(e.what()));
  }
  MelSpectrogram mel;
  try {
    mel.frames = meta.at("frames").get<int>();
    mel.n_mels = meta.at("n_mels").get<int>();
    mel.frame_rate = meta.at("frame_rate").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw PersistenceError("bad feature cache sidecar: " + std::string(e.what()));
  }
  if (mel.frames < 0 || mel.n_mels <= 0) {
    throw PersistenceError("invalid feature cache dimensions: " + path);
  }

  std::ifstream raw(path, std::ios::binary);
  if (!raw) throw PersistenceError("missing feature cache blob: " + path);
  mel.values.resize(static_cast<std::size_t>(mel.frames) * mel.n_mels);
  raw.read(reinterpret_cast<char*>(mel.values.data()),
           static_cast<std::streamsize>(mel.values.size() * sizeof(float)));
  if (raw.gcount() !=
      static_cast<std::streamsize>(mel.values.size() * sizeof(float))) {
    throw PersistenceError("feature cache blob truncated: " + path);
  }
  return mel;
}

}  // namespace artid
