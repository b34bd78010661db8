#ifndef ARTID_FEATURES_HPP_
#define ARTID_FEATURES_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "artid/audio_io.hpp"

namespace artid {

struct FeatureConfig {
  double sample_rate = 22050.0;
  double window_seconds = 0.046;
  double overlap_fraction = 0.5;
  int n_mels = 128;
  double segment_seconds = 3.0;

  int window_samples() const {
    return static_cast<int>(std::lround(window_seconds * sample_rate));
  }
  int hop_samples() const {
    return static_cast<int>(
        std::lround(window_samples() * (1.0 - overlap_fraction)));
  }
  int segment_samples() const {
    return static_cast<int>(std::lround(segment_seconds * sample_rate));
  }
  // Positive-frequency bin count of the real FFT over one window.
  int fft_bins() const { return window_samples() / 2 + 1; }

  void validate() const;
};

// Power mel spectrogram, frame-major storage: values[frame * n_mels + band].
// No log compression here; the network applies it as its first layer.
struct MelSpectrogram {
  int frames = 0;
  int n_mels = 0;
  double frame_rate = 0.0;
  std::vector<float> values;

  float at(int frame, int band) const { return values[frame * n_mels + band]; }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular unit-peak filters, one row per band: n_mels x n_fft_bins.
// Band centers are equally spaced on the mel scale from 0 Hz to Nyquist.
std::vector<double> mel_filterbank(int n_fft_bins, const FeatureConfig& config);

// Center frequencies (Hz) of the n_mels triangular filters.
std::vector<double> mel_center_frequencies(const FeatureConfig& config);

// Hann-windowed power STFT projected onto the mel filterbank.
// Frame count is floor((len - window) / hop) + 1.
MelSpectrogram mel_spectrogram(const PcmSignal& signal, const FeatureConfig& config);

enum class SegmentPolicy { linear_spaced, contiguous };

// Slices the track into `count` segments (linear_spaced: start offsets evenly
// spaced over [0, len - segment]; contiguous: back to back, count <= 0 takes
// every full segment) and computes the mel spectrogram of each.
std::vector<MelSpectrogram> extract_segments(const PcmSignal& track,
                                             const FeatureConfig& config,
                                             int count, SegmentPolicy policy);

// Segment start offsets in samples, exposed for tests and callers that
// need the placement without computing features.
std::vector<long> segment_offsets(long track_samples, long segment_samples,
                                  int count, SegmentPolicy policy);

// Cache format: raw 32-bit little-endian floats at `path` plus a JSON
// sidecar `path + ".json"` holding {frames, n_mels, frame_rate}.
void save_feature_cache(const MelSpectrogram& mel, const std::string& path);
MelSpectrogram load_feature_cache(const std::string& path);

}  // namespace artid

#endif  // ARTID_FEATURES_HPP_
