#ifndef ARTID_AUDIO_IO_HPP_
#define ARTID_AUDIO_IO_HPP_

#include <string>
#include <vector>

namespace artid {

// Mono PCM in [-1, 1]. Stereo sources are downmixed by channel averaging.
struct PcmSignal {
  std::vector<float> samples;
  double sample_rate = 0.0;

  double duration_seconds() const {
    return sample_rate > 0.0 ? static_cast<double>(samples.size()) / sample_rate
                             : 0.0;
  }
};

// Reads a 16-bit PCM WAV (mono or stereo). Integer samples are scaled by
// 1/32768, so full scale maps to +/-(32767/32768).
PcmSignal load_wav(const std::string& path);

// Writes mono 16-bit PCM, rounding to nearest and clamping to full scale.
void save_wav(const std::string& path, const PcmSignal& signal);

// Band-limited sample-rate conversion (windowed-sinc interpolation).
// Output length is round(n * target_rate / source_rate), preserving the
// duration within one sample period. Equal rates return a copy.
PcmSignal resample(const PcmSignal& signal, double target_rate);

}  // namespace artid

#endif  // ARTID_AUDIO_IO_HPP_
