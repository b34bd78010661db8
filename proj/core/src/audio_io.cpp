#include "artid/audio_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "artid/errors.hpp"

namespace artid {

namespace {

std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16le(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

PcmSignal load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open WAV file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("malformed WAV header: " + path);
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data_ptr = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t chunk_len = read_u32le(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + chunk_len > bytes.size()) {
      throw FormatError("truncated WAV chunk: " + path);
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw FormatError("short fmt chunk: " + path);
      format = read_u16le(chunk + 8);
      channels = read_u16le(chunk + 10);
      rate = read_u32le(chunk + 12);
      bits = read_u16le(chunk + 22);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data_ptr = chunk + 8;
      data_len = chunk_len;
    }
    pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data_ptr == nullptr) {
    throw FormatError("WAV missing fmt or data chunk: " + path);
  }
  if (format != 1 || bits != 16) {
    throw UnsupportedFormatError("only 16-bit PCM WAV is supported: " + path);
  }
  if (channels != 1 && channels != 2) {
    throw UnsupportedFormatError("only mono or stereo WAV is supported: " + path);
  }
  if (rate == 0) throw FormatError("WAV sample rate is zero: " + path);

  const std::size_t frame_bytes = 2u * channels;
  const std::size_t frames = data_len / frame_bytes;
  PcmSignal out;
  out.sample_rate = static_cast<double>(rate);
  out.samples.resize(frames);
  const double scale = 1.0 / 32768.0;
  for (std::size_t i = 0; i < frames; ++i) {
    const unsigned char* f = data_ptr + i * frame_bytes;
    double acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c) {
      const std::int16_t s =
          static_cast<std::int16_t>(read_u16le(f + 2 * c));
      acc += static_cast<double>(s);
    }
    out.samples[i] = static_cast<float>(acc * scale / channels);
  }
  return out;
}

void save_wav(const std::string& path, const PcmSignal& signal) {
  if (signal.sample_rate <= 0.0) throw ConfigError("sample rate must be positive");
  const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(signal.sample_rate));
  const std::uint32_t data_len = static_cast<std::uint32_t>(signal.samples.size() * 2);

  std::string out;
  out.reserve(44 + data_len);
  out.append("RIFF");
  put_u32le(out, 36 + data_len);
  out.append("WAVE");
  out.append("fmt ");
  put_u32le(out, 16);
  put_u16le(out, 1);  // PCM
  put_u16le(out, 1);  // mono
  put_u32le(out, rate);
  put_u32le(out, rate * 2);
  put_u16le(out, 2);
  put_u16le(out, 16);
  out.append("data");
  put_u32le(out, data_len);
  for (float s : signal.samples) {
    long q = std::lround(static_cast<double>(s) * 32768.0);
    if (q > 32767) q = 32767;
    if (q < -32768) q = -32768;
    put_u16le(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write WAV file: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

namespace {

// Half-width of the interpolation kernel, in source samples at the lower
// of the two Nyquist rates.
constexpr int kSincHalfWidth = 32;

double blackman(double x) {
  // x in [-1, 1]
  const double pi = 3.14159265358979323846;
  return 0.42 + 0.5 * std::cos(pi * x) + 0.08 * std::cos(2.0 * pi * x);
}

}  // namespace

PcmSignal resample(const PcmSignal& signal, double target_rate) {
  if (target_rate <= 0.0) throw ConfigError("target rate must be positive");
  if (signal.sample_rate <= 0.0) throw ConfigError("source rate must be positive");
  if (signal.sample_rate == target_rate) return signal;

  const double ratio = target_rate / signal.sample_rate;
  const std::size_t out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(signal.samples.size()) * ratio));
  PcmSignal out;
  out.sample_rate = target_rate;
  out.samples.resize(out_len);

  // Cutoff slightly under the lower Nyquist; width widens when decimating.
  const double cutoff = 0.97 * std::min(1.0, ratio);
  const double half_width = kSincHalfWidth / std::min(1.0, ratio);
  const std::size_t n = signal.samples.size();
  const double pi = 3.14159265358979323846;

  for (std::size_t m = 0; m < out_len; ++m) {
    const double center = static_cast<double>(m) / ratio;
    const long k_lo = static_cast<long>(std::ceil(center - half_width));
    const long k_hi = static_cast<long>(std::floor(center + half_width));
    double acc = 0.0;
    for (long k = k_lo; k <= k_hi; ++k) {
      if (k < 0 || k >= static_cast<long>(n)) continue;
      const double t = static_cast<double>(k) - center;
      const double arg = pi * cutoff * t;
      const double sinc = (std::abs(arg) < 1e-12) ? 1.0 : std::sin(arg) / arg;
      acc += static_cast<double>(signal.samples[static_cast<std::size_t>(k)]) *
             cutoff * sinc * blackman(t / half_width);
    }
    out.samples[m] = static_cast<float>(acc);
  }
  return out;
}

}  // namespace artid
