#ifndef ARTID_NET_HPP_
#define ARTID_NET_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <type_traits>
#include <vector>

#include "artid/errors.hpp"
#include "artid/features.hpp"
#include "artid/rng.hpp"
#include "artid/tensor.hpp"

namespace artid {

struct PoolSpec {
  int window = 3;
  int stride = 2;
  // ceil_mode rounds the output length up and clips boundary windows;
  // otherwise only fully covered windows are taken.
  bool ceil_mode = false;
};

// The embedding map: dynamic compression, three conv+relu+maxpool blocks,
// time pooling, dropout, dense+tanh, and a unit-sphere projection.
struct NetworkConfig {
  int embedding_dim = 32;
  int input_mels = 128;
  std::array<int, 3> channels{16, 32, 64};
  int kernel = 3;
  std::array<PoolSpec, 3> pools{PoolSpec{3, 2, true}, PoolSpec{3, 3, false},
                                PoolSpec{3, 3, false}};
  double dropout_rate = 0.5;
  double compression_gain = 1e4;

  void validate() const;

  static int pooled_len(int len, const PoolSpec& p);

  // Mel-axis width after the three pool stages.
  int mel_out() const;
  int dense_input() const { return channels[2] * mel_out(); }
  // Smallest frame count that leaves every pool stage non-empty.
  int min_time_frames() const;

  bool operator==(const NetworkConfig& other) const;
};

template <class T>
struct ConvLayer {
  int in_ch = 0, out_ch = 0, kernel = 0;
  std::vector<T> w;  // [(o * in_ch + i) * k * k + dy * k + dx]
  std::vector<T> b;  // [o]
};

template <class T>
struct DenseLayer {
  int in_dim = 0, out_dim = 0;
  std::vector<T> w;  // [o * in_dim + i]
  std::vector<T> b;  // [o]
};

template <class T>
struct Parameters {
  std::array<ConvLayer<T>, 3> conv;
  DenseLayer<T> dense;

  // Visits every parameter tensor in declared layer order:
  // conv1.w, conv1.b, conv2.w, conv2.b, conv3.w, conv3.b, dense.w, dense.b.
  template <class Fn>
  void for_each_tensor(Fn&& fn) {
    for (auto& layer : conv) {
      fn(layer.w);
      fn(layer.b);
    }
    fn(dense.w);
    fn(dense.b);
  }
  template <class Fn>
  void for_each_tensor(Fn&& fn) const {
    for (const auto& layer : conv) {
      fn(layer.w);
      fn(layer.b);
    }
    fn(dense.w);
    fn(dense.b);
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for_each_tensor([&](const std::vector<T>& t) { n += t.size(); });
    return n;
  }

  static Parameters zeros_like(const NetworkConfig& config);

  template <class U>
  Parameters<U> cast() const {
    Parameters<U> out;
    for (int l = 0; l < 3; ++l) {
      out.conv[l].in_ch = conv[l].in_ch;
      out.conv[l].out_ch = conv[l].out_ch;
      out.conv[l].kernel = conv[l].kernel;
      out.conv[l].w.assign(conv[l].w.begin(), conv[l].w.end());
      out.conv[l].b.assign(conv[l].b.begin(), conv[l].b.end());
    }
    out.dense.in_dim = dense.in_dim;
    out.dense.out_dim = dense.out_dim;
    out.dense.w.assign(dense.w.begin(), dense.w.end());
    out.dense.b.assign(dense.b.begin(), dense.b.end());
    return out;
  }
};

template <class T>
struct OptimizerState {
  double learning_rate = 1e-3;
  double rho = 0.9;
  double epsilon = 1e-8;
  // Squared-gradient accumulators, aligned with Parameters::for_each_tensor.
  std::vector<std::vector<T>> acc;

  static OptimizerState zeros_like(const Parameters<T>& params,
                                   double learning_rate = 1e-3,
                                   double rho = 0.9, double epsilon = 1e-8) {
    OptimizerState s;
    s.learning_rate = learning_rate;
    s.rho = rho;
    s.epsilon = epsilon;
    params.for_each_tensor([&](const std::vector<T>& t) {
      s.acc.emplace_back(t.size(), T{});
    });
    return s;
  }
};

enum class RunMode { train, infer };

template <class T>
struct ForwardCache {
  Tensor3<T> input;                    // after dynamic compression
  std::array<Tensor3<T>, 3> act;       // post-relu conv outputs
  std::array<Tensor3<T>, 3> pooled_t;  // pool outputs
  std::array<std::vector<std::int32_t>, 3> argmax;
  std::vector<T> pooled;        // time-pooled feature vector
  std::vector<T> dropout_mask;  // per-element scale; empty in infer mode
  std::vector<T> dense_pre;     // pre-tanh
  std::vector<T> tanh_out;      // pre-normalization
  T inv_norm = T{};
  bool train_mode = false;
};

// --- elementwise and structural ops -------------------------------------

// log(1 + gain * x); entries must be nonnegative.
template <class T>
Tensor3<T> dynamic_compression(const MelSpectrogram& mel, double gain) {
  Tensor3<T> out(1, mel.frames, mel.n_mels);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double v = static_cast<double>(mel.values[i]);
    if (!(v >= 0.0)) {
      throw NumericError("dynamic compression requires nonnegative input");
    }
    out.data[i] = static_cast<T>(std::log1p(gain * v));
  }
  return out;
}

// Stride-1 cross-correlation with zero same-padding, bias added.
template <class T>
void conv2d_forward(const Tensor3<T>& in, const ConvLayer<T>& layer,
                    Tensor3<T>& out) {
  if (in.channels != layer.in_ch) throw ShapeError("conv input channel mismatch");
  const int k = layer.kernel, off = k / 2;
  const int rows = in.rows, cols = in.cols;
  out = Tensor3<T>(layer.out_ch, rows, cols);
  for (int o = 0; o < layer.out_ch; ++o) {
    T* plane = out.channel(o);
    const T bias = layer.b[o];
    for (std::size_t idx = 0; idx < out.plane(); ++idx) plane[idx] = bias;
    for (int i = 0; i < layer.in_ch; ++i) {
      const T* wk = layer.w.data() +
                    (static_cast<std::size_t>(o) * layer.in_ch + i) * k * k;
      for (int dy = 0; dy < k; ++dy) {
        const int y_lo = std::max(0, off - dy);
        const int y_hi = std::min(rows, rows + off - dy);
        for (int dx = 0; dx < k; ++dx) {
          const T wv = wk[dy * k + dx];
          const int shift = dx - off;
          const int x_lo = std::max(0, -shift);
          const int x_hi = std::min(cols, cols - shift);
          for (int y = y_lo; y < y_hi; ++y) {
            const T* in_row = in.row(i, y + dy - off) + shift;
            T* out_row = out.row(o, y);
            for (int x = x_lo; x < x_hi; ++x) out_row[x] += wv * in_row[x];
          }
        }
      }
    }
  }
}

// Gradients wrt weights, bias, and (optionally) the convolution input.
template <class T>
void conv2d_backward(const Tensor3<T>& in, const ConvLayer<T>& layer,
                     const Tensor3<T>& grad_out, ConvLayer<T>& grad_layer,
                     Tensor3<T>* grad_in) {
  if (in.channels != layer.in_ch || grad_out.channels != layer.out_ch ||
      grad_out.rows != in.rows || grad_out.cols != in.cols) {
    throw ShapeError("conv backward shape mismatch");
  }
  const int k = layer.kernel, off = k / 2;
  const int rows = in.rows, cols = in.cols;
  grad_layer.in_ch = layer.in_ch;
  grad_layer.out_ch = layer.out_ch;
  grad_layer.kernel = k;
  grad_layer.w.assign(layer.w.size(), T{});
  grad_layer.b.assign(layer.b.size(), T{});
  if (grad_in != nullptr) {
    *grad_in = Tensor3<T>(in.channels, rows, cols);
  }

  for (int o = 0; o < layer.out_ch; ++o) {
    const T* gplane = grad_out.channel(o);
    T acc_b = T{};
    for (std::size_t idx = 0; idx < grad_out.plane(); ++idx) acc_b += gplane[idx];
    grad_layer.b[o] = acc_b;

    for (int i = 0; i < layer.in_ch; ++i) {
      T* gwk = grad_layer.w.data() +
               (static_cast<std::size_t>(o) * layer.in_ch + i) * k * k;
      const T* wk = layer.w.data() +
                    (static_cast<std::size_t>(o) * layer.in_ch + i) * k * k;
      for (int dy = 0; dy < k; ++dy) {
        const int y_lo = std::max(0, off - dy);
        const int y_hi = std::min(rows, rows + off - dy);
        for (int dx = 0; dx < k; ++dx) {
          const int shift = dx - off;
          const int x_lo = std::max(0, -shift);
          const int x_hi = std::min(cols, cols - shift);
          T acc_w = T{};
          const T wv = wk[dy * k + dx];
          for (int y = y_lo; y < y_hi; ++y) {
            const T* in_row = in.row(i, y + dy - off) + shift;
            const T* g_row = grad_out.row(o, y);
            T dot = T{};
            for (int x = x_lo; x < x_hi; ++x) dot += g_row[x] * in_row[x];
            acc_w += dot;
            if (grad_in != nullptr) {
              T* gin_row = grad_in->row(i, y + dy - off) + shift;
              for (int x = x_lo; x < x_hi; ++x) gin_row[x] += wv * g_row[x];
            }
          }
          gwk[dy * k + dx] += acc_w;
        }
      }
    }
  }
}

inline int pooled_axis_len(int len, const PoolSpec& p) {
  if (p.ceil_mode) return (len + p.stride - 1) / p.stride;
  // truncating division would turn len < window into one partial window
  if (len < p.window) return 0;
  return (len - p.window) / p.stride + 1;
}

// Windowed maximum over both spatial axes; records the argmax (linear index
// within the channel plane) for gradient routing. Ties take the first
// element in row-major scan order.
template <class T>
void maxpool_forward(const Tensor3<T>& in, const PoolSpec& p, Tensor3<T>& out,
                     std::vector<std::int32_t>& argmax) {
  const int out_r = pooled_axis_len(in.rows, p);
  const int out_c = pooled_axis_len(in.cols, p);
  if (out_r < 1 || out_c < 1) throw ShapeError("maxpool output dimension is empty");
  out = Tensor3<T>(in.channels, out_r, out_c);
  argmax.assign(out.size(), 0);
  std::size_t cursor = 0;
  for (int c = 0; c < in.channels; ++c) {
    const T* plane = in.channel(c);
    for (int ty = 0; ty < out_r; ++ty) {
      const int y0 = ty * p.stride;
      const int y1 = std::min(y0 + p.window, in.rows);
      for (int tx = 0; tx < out_c; ++tx) {
        const int x0 = tx * p.stride;
        const int x1 = std::min(x0 + p.window, in.cols);
        T best = plane[static_cast<std::size_t>(y0) * in.cols + x0];
        std::int32_t best_idx = static_cast<std::int32_t>(y0 * in.cols + x0);
        for (int y = y0; y < y1; ++y) {
          const T* row = plane + static_cast<std::size_t>(y) * in.cols;
          for (int x = x0; x < x1; ++x) {
            if (row[x] > best) {
              best = row[x];
              best_idx = static_cast<std::int32_t>(y * in.cols + x);
            }
          }
        }
        out.channel(c)[static_cast<std::size_t>(ty) * out_c + tx] = best;
        argmax[cursor++] = best_idx;
      }
    }
  }
}

template <class T>
void maxpool_backward(const Tensor3<T>& grad_out,
                      const std::vector<std::int32_t>& argmax,
                      Tensor3<T>& grad_in) {
  if (argmax.size() != grad_out.size()) throw ShapeError("maxpool argmax mismatch");
  grad_in.fill(T{});
  std::size_t cursor = 0;
  for (int c = 0; c < grad_out.channels; ++c) {
    T* gin = grad_in.channel(c);
    const T* gout = grad_out.channel(c);
    for (std::size_t idx = 0; idx < grad_out.plane(); ++idx) {
      gin[argmax[cursor++]] += gout[idx];
    }
  }
}

// Flattens channels x mels into one feature axis and averages over time:
// out[c * cols + m] = mean_t in[c][t][m].
template <class T>
std::vector<T> global_time_pool(const Tensor3<T>& in) {
  std::vector<T> out(static_cast<std::size_t>(in.channels) * in.cols);
  const double inv_t = 1.0 / in.rows;
  for (int c = 0; c < in.channels; ++c) {
    for (int m = 0; m < in.cols; ++m) {
      double acc = 0.0;
      for (int t = 0; t < in.rows; ++t) acc += static_cast<double>(in.at(c, t, m));
      out[static_cast<std::size_t>(c) * in.cols + m] = static_cast<T>(acc * inv_t);
    }
  }
  return out;
}

template <class T>
void global_time_pool_backward(const std::vector<T>& grad_out, Tensor3<T>& grad_in) {
  if (grad_out.size() != static_cast<std::size_t>(grad_in.channels) * grad_in.cols) {
    throw ShapeError("time pool gradient mismatch");
  }
  const T inv_t = static_cast<T>(1.0 / grad_in.rows);
  for (int c = 0; c < grad_in.channels; ++c) {
    for (int t = 0; t < grad_in.rows; ++t) {
      T* row = grad_in.row(c, t);
      const T* g = grad_out.data() + static_cast<std::size_t>(c) * grad_in.cols;
      for (int m = 0; m < grad_in.cols; ++m) row[m] = g[m] * inv_t;
    }
  }
}

template <class T>
double l2_norm(const std::vector<T>& v) {
  double acc = 0.0;
  for (T x : v) acc += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(acc);
}

template <class T>
std::vector<T> l2_normalize(const std::vector<T>& v) {
  const double norm = l2_norm(v);
  if (!(norm > 1e-30)) {
    throw DegenerateEmbeddingError("cannot project a zero vector to the sphere");
  }
  std::vector<T> out(v.size());
  const double inv = 1.0 / norm;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<T>(static_cast<double>(v[i]) * inv);
  }
  return out;
}

// Gradient of v -> v/||v||: (g - (g . y) y) / ||v||, with y the unit output.
template <class T>
std::vector<T> l2_normalize_backward(const std::vector<T>& pre_norm,
                                     const std::vector<T>& grad_out) {
  const double norm = l2_norm(pre_norm);
  if (!(norm > 1e-30)) {
    throw DegenerateEmbeddingError("cannot differentiate through a zero norm");
  }
  const double inv = 1.0 / norm;
  double dot = 0.0;
  for (std::size_t i = 0; i < pre_norm.size(); ++i) {
    dot += static_cast<double>(grad_out[i]) * static_cast<double>(pre_norm[i]) * inv;
  }
  std::vector<T> out(pre_norm.size());
  for (std::size_t i = 0; i < pre_norm.size(); ++i) {
    const double y = static_cast<double>(pre_norm[i]) * inv;
    out[i] = static_cast<T>((static_cast<double>(grad_out[i]) - dot * y) * inv);
  }
  return out;
}

// --- full network --------------------------------------------------------

Parameters<float> init_params(const NetworkConfig& config, std::uint64_t seed);
Parameters<double> init_params_f64(const NetworkConfig& config, std::uint64_t seed);

template <class T>
std::vector<T> net_forward(const Parameters<T>& params, const NetworkConfig& config,
                           const MelSpectrogram& mel, RunMode mode, Rng* rng,
                           std::type_identity_t<ForwardCache<T>>* cache);

template <class T>
void net_backward(const Parameters<T>& params, const NetworkConfig& config,
                  const ForwardCache<T>& cache, const std::vector<T>& grad_embedding,
                  Parameters<T>& grads);

// s <- rho s + (1 - rho) g^2 ; w <- w - lr g / (sqrt(s) + eps), elementwise.
// Any non-finite gradient aborts the step before mutating anything.
template <class T>
void rmsprop_step(Parameters<T>& params, const Parameters<T>& grads,
                  OptimizerState<T>& state);

// --- implementation ------------------------------------------------------

template <class T>
Parameters<T> make_zero_params(const NetworkConfig& config) {
  config.validate();
  Parameters<T> p;
  int in_ch = 1;
  for (int l = 0; l < 3; ++l) {
    auto& layer = p.conv[l];
    layer.in_ch = in_ch;
    layer.out_ch = config.channels[l];
    layer.kernel = config.kernel;
    layer.w.assign(static_cast<std::size_t>(layer.out_ch) * layer.in_ch *
                       config.kernel * config.kernel,
                   T{});
    layer.b.assign(layer.out_ch, T{});
    in_ch = layer.out_ch;
  }
  p.dense.in_dim = config.dense_input();
  p.dense.out_dim = config.embedding_dim;
  p.dense.w.assign(static_cast<std::size_t>(p.dense.in_dim) * p.dense.out_dim, T{});
  p.dense.b.assign(p.dense.out_dim, T{});
  return p;
}

template <class T>
Parameters<T> Parameters<T>::zeros_like(const NetworkConfig& config) {
  return make_zero_params<T>(config);
}

template <class T>
std::vector<T> net_forward(const Parameters<T>& params, const NetworkConfig& config,
                           const MelSpectrogram& mel, RunMode mode, Rng* rng,
                           std::type_identity_t<ForwardCache<T>>* cache) {
  config.validate();
  if (mel.n_mels != config.input_mels) {
    throw ShapeError("input mel band count does not match the network config");
  }
  if (mel.frames < config.min_time_frames()) {
    throw ShapeError("input has fewer frames than the network can pool");
  }
  if (mode == RunMode::train && config.dropout_rate > 0.0 && rng == nullptr) {
    throw ConfigError("train-mode forward needs an rng for dropout");
  }

  ForwardCache<T> local;
  ForwardCache<T>& c = cache ? *cache : local;
  c.train_mode = (mode == RunMode::train);

  c.input = dynamic_compression<T>(mel, config.compression_gain);

  const Tensor3<T>* cursor = &c.input;
  for (int l = 0; l < 3; ++l) {
    conv2d_forward(*cursor, params.conv[l], c.act[l]);
    for (T& v : c.act[l].data) v = v > T{} ? v : T{};
    maxpool_forward(c.act[l], config.pools[l], c.pooled_t[l], c.argmax[l]);
    cursor = &c.pooled_t[l];
  }

  c.pooled = global_time_pool(*cursor);

  std::vector<T> dropped = c.pooled;
  if (mode == RunMode::train) {
    c.dropout_mask.assign(c.pooled.size(), T{1});
    if (config.dropout_rate > 0.0) {
      const T scale = static_cast<T>(1.0 / (1.0 - config.dropout_rate));
      for (std::size_t i = 0; i < c.dropout_mask.size(); ++i) {
        c.dropout_mask[i] = rng->bernoulli(config.dropout_rate) ? T{} : scale;
      }
    }
    for (std::size_t i = 0; i < dropped.size(); ++i) dropped[i] *= c.dropout_mask[i];
  } else {
    c.dropout_mask.clear();
  }

  c.dense_pre.resize(params.dense.out_dim);
  for (int o = 0; o < params.dense.out_dim; ++o) {
    const T* w = params.dense.w.data() + static_cast<std::size_t>(o) * params.dense.in_dim;
    double acc = static_cast<double>(params.dense.b[o]);
    for (int i = 0; i < params.dense.in_dim; ++i) {
      acc += static_cast<double>(w[i]) * static_cast<double>(dropped[i]);
    }
    c.dense_pre[o] = static_cast<T>(acc);
  }

  c.tanh_out.resize(c.dense_pre.size());
  for (std::size_t i = 0; i < c.dense_pre.size(); ++i) {
    c.tanh_out[i] = std::tanh(c.dense_pre[i]);
  }

  std::vector<T> embedding = l2_normalize(c.tanh_out);
  c.inv_norm = static_cast<T>(1.0 / l2_norm(c.tanh_out));
  return embedding;
}

template <class T>
void net_backward(const Parameters<T>& params, const NetworkConfig& config,
                  const ForwardCache<T>& cache, const std::vector<T>& grad_embedding,
                  Parameters<T>& grads) {
  if (!cache.train_mode || cache.dropout_mask.size() != cache.pooled.size()) {
    throw StateError("backward needs a cache from a train-mode forward");
  }
  if (cache.pooled.size() != static_cast<std::size_t>(params.dense.in_dim) ||
      grad_embedding.size() != static_cast<std::size_t>(params.dense.out_dim) ||
      cache.input.cols != config.input_mels) {
    throw StateError("cache does not match these parameters");
  }

  // sphere projection
  std::vector<T> g_tanh = l2_normalize_backward(cache.tanh_out, grad_embedding);
  // tanh
  for (std::size_t i = 0; i < g_tanh.size(); ++i) {
    const T y = cache.tanh_out[i];
    g_tanh[i] *= (T{1} - y * y);
  }

  // dense layer; forward input was pooled * dropout_mask
  std::vector<T> dropped(cache.pooled.size());
  for (std::size_t i = 0; i < dropped.size(); ++i) {
    dropped[i] = cache.pooled[i] * cache.dropout_mask[i];
  }
  std::vector<T> g_pooled(cache.pooled.size(), T{});
  for (int o = 0; o < params.dense.out_dim; ++o) {
    const T g = g_tanh[o];
    grads.dense.b[o] += g;
    T* gw = grads.dense.w.data() + static_cast<std::size_t>(o) * params.dense.in_dim;
    const T* w = params.dense.w.data() + static_cast<std::size_t>(o) * params.dense.in_dim;
    for (int i = 0; i < params.dense.in_dim; ++i) {
      gw[i] += g * dropped[i];
      g_pooled[i] += g * w[i];
    }
  }
  for (std::size_t i = 0; i < g_pooled.size(); ++i) g_pooled[i] *= cache.dropout_mask[i];

  // time pooling
  Tensor3<T> g_cursor(cache.pooled_t[2].channels, cache.pooled_t[2].rows,
                      cache.pooled_t[2].cols);
  global_time_pool_backward(g_pooled, g_cursor);

  // conv blocks, last to first
  for (int l = 2; l >= 0; --l) {
    Tensor3<T> g_act(cache.act[l].channels, cache.act[l].rows, cache.act[l].cols);
    maxpool_backward(g_cursor, cache.argmax[l], g_act);
    const T* act = cache.act[l].data.data();
    for (std::size_t i = 0; i < g_act.data.size(); ++i) {
      if (!(act[i] > T{})) g_act.data[i] = T{};
    }
    const Tensor3<T>& in = (l == 0) ? cache.input : cache.pooled_t[l - 1];
    ConvLayer<T> layer_grads;
    Tensor3<T> g_in;
    conv2d_backward(in, params.conv[l], g_act, layer_grads, l > 0 ? &g_in : nullptr);
    for (std::size_t i = 0; i < layer_grads.w.size(); ++i) {
      grads.conv[l].w[i] += layer_grads.w[i];
    }
    for (std::size_t i = 0; i < layer_grads.b.size(); ++i) {
      grads.conv[l].b[i] += layer_grads.b[i];
    }
    if (l > 0) g_cursor = std::move(g_in);
  }
}

template <class T>
void rmsprop_step(Parameters<T>& params, const Parameters<T>& grads,
                  OptimizerState<T>& state) {
  bool finite = true;
  grads.for_each_tensor([&](const std::vector<T>& g) {
    for (T v : g) {
      if (!std::isfinite(static_cast<double>(v))) finite = false;
    }
  });
  if (!finite) throw NumericError("non-finite gradient, aborting optimizer step");

  std::size_t slot = 0;
  std::vector<const std::vector<T>*> grad_tensors;
  grads.for_each_tensor([&](const std::vector<T>& g) { grad_tensors.push_back(&g); });
  const T lr = static_cast<T>(state.learning_rate);
  const T rho = static_cast<T>(state.rho);
  const T eps = static_cast<T>(state.epsilon);
  params.for_each_tensor([&](std::vector<T>& w) {
    const std::vector<T>& g = *grad_tensors[slot];
    std::vector<T>& s = state.acc[slot];
    if (g.size() != w.size() || s.size() != w.size()) {
      throw ShapeError("optimizer state does not match parameters");
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      s[i] = rho * s[i] + (T{1} - rho) * g[i] * g[i];
      w[i] -= lr * g[i] / (std::sqrt(s[i]) + eps);
    }
    ++slot;
  });
}

}  // namespace artid

#endif  // ARTID_NET_HPP_
