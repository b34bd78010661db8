#include "artid/net.hpp"

#include <cmath>

namespace artid {

void NetworkConfig::validate() const {
  if (embedding_dim < 1) throw ConfigError("embedding_dim must be positive");
  if (input_mels < 1) throw ConfigError("input_mels must be positive");
  if (kernel < 1 || kernel % 2 == 0) {
    throw ConfigError("kernel must be odd so same-padding is symmetric");
  }
  for (int c : channels) {
    if (c < 1) throw ConfigError("channel counts must be positive");
  }
  for (const auto& p : pools) {
    if (p.window < 1 || p.stride < 1) {
      throw ConfigError("pool window and stride must be positive");
    }
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw ConfigError("dropout_rate must lie in [0, 1)");
  }
  if (!(compression_gain > 0.0)) {
    throw ConfigError("compression_gain must be positive");
  }
  if (mel_out() < 1) {
    throw ConfigError("input_mels collapses to nothing under the pool stack");
  }
}

int NetworkConfig::pooled_len(int len, const PoolSpec& p) {
  if (len < 1) return 0;
  if (p.ceil_mode) return (len + p.stride - 1) / p.stride;
  if (len < p.window) return 0;
  return (len - p.window) / p.stride + 1;
}

int NetworkConfig::mel_out() const {
  int m = input_mels;
  for (const auto& p : pools) m = pooled_len(m, p);
  return m;
}

int NetworkConfig::min_time_frames() const {
  // Walk backwards: each stage needs at least one full window (valid mode)
  // or a single element (ceil mode).
  int need = 1;
  for (int l = 2; l >= 0; --l) {
    const auto& p = pools[l];
    // Smallest input producing `need` outputs.
    int in = (need - 1) * p.stride + (p.ceil_mode ? 1 : p.window);
    need = in;
  }
  return need;
}

bool NetworkConfig::operator==(const NetworkConfig& other) const {
  auto pool_eq = [](const PoolSpec& a, const PoolSpec& b) {
    return a.window == b.window && a.stride == b.stride && a.ceil_mode == b.ceil_mode;
  };
  return embedding_dim == other.embedding_dim && input_mels == other.input_mels &&
         channels == other.channels && kernel == other.kernel &&
         pool_eq(pools[0], other.pools[0]) && pool_eq(pools[1], other.pools[1]) &&
         pool_eq(pools[2], other.pools[2]) && dropout_rate == other.dropout_rate &&
         compression_gain == other.compression_gain;
}

namespace {

template <class T>
Parameters<T> init_params_impl(const NetworkConfig& config, std::uint64_t seed) {
  Parameters<T> p = make_zero_params<T>(config);
  Rng rng(derive_seed(seed, 0x696e6974));
  int tensor_idx = 0;
  p.for_each_tensor([&](std::vector<T>& t) {
    const bool is_bias = (tensor_idx % 2) == 1;
    if (!is_bias) {
      // fan_in per tensor: conv = in_ch * k * k, dense = in_dim.
      std::size_t fan_in = 0;
      const int layer = tensor_idx / 2;
      if (layer < 3) {
        const auto& c = p.conv[layer];
        fan_in = static_cast<std::size_t>(c.in_ch) * c.kernel * c.kernel;
      } else {
        fan_in = static_cast<std::size_t>(p.dense.in_dim);
      }
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (T& v : t) v = static_cast<T>(rng.uniform(-bound, bound));
    }
    ++tensor_idx;
  });
  return p;
}

}  // namespace

Parameters<float> init_params(const NetworkConfig& config, std::uint64_t seed) {
  return init_params_impl<float>(config, seed);
}

Parameters<double> init_params_f64(const NetworkConfig& config, std::uint64_t seed) {
  return init_params_impl<double>(config, seed);
}

}  // namespace artid
