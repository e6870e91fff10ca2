#pragma once

// Convolutional autoencoder: four conv->tanh->maxpool stages and a dense
// bottleneck, mirrored by a dense layer and four transpose-conv->tanh stages.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uhred/error.hpp"
#include "uhred/layers.hpp"
#include "uhred/random.hpp"

namespace uhred {

inline constexpr std::size_t kStages = 4;

struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_size = 3;
  std::size_t padding = 1;

  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

struct ModelConfig {
  std::size_t n_i = 92;
  std::size_t n_l = 16;
  std::vector<ConvSpec> conv_layers;
  std::size_t pool_size = 2;
  std::string activation = "tanh";

  /// Input length of each encoder conv stage, followed by the flattened length
  /// after the last pool: {n_i, n_i/2, ...}, five entries.
  std::vector<std::size_t> encoder_lengths() const {
    std::vector<std::size_t> len{n_i};
    for (std::size_t s = 0; s < kStages; ++s) len.push_back(len.back() / pool_size);
    return len;
  }

  /// Output length of the decoder dense layer followed by the target length of
  /// each transpose-conv stage. Built backwards from n_i with ceil(L/2) so that
  /// every stage is reachable by cropping one sample at most.
  std::vector<std::size_t> decoder_lengths() const {
    std::vector<std::size_t> len(kStages + 1);
    len[kStages] = n_i;
    for (std::size_t s = kStages; s > 0; --s) len[s - 1] = (len[s] + 1) / 2;
    return len;
  }

  std::size_t bottleneck_channels() const { return conv_layers.back().out_channels; }
  std::size_t flat_size() const { return bottleneck_channels() * encoder_lengths().back(); }
  std::size_t decoder_flat_size() const { return bottleneck_channels() * decoder_lengths().front(); }

  void validate() const {
    if (conv_layers.size() != kStages) throw ShapeError("model: exactly four conv stages required");
    if (pool_size != 2) throw ShapeError("model: pool size must be 2");
    if (activation != "tanh") throw ShapeError("model: only tanh activation is supported");
    if (n_i == 0 || n_l == 0) throw ShapeError("model: n_i and n_l must be >= 1");
    if (conv_layers.front().in_channels != 1) throw ShapeError("model: first conv stage must take one channel");
    for (std::size_t s = 0; s < kStages; ++s) {
      const auto& c = conv_layers[s];
      if (c.out_channels == 0 || c.in_channels == 0) throw ShapeError("model: zero channel count");
      if (c.kernel_size % 2 == 0 || c.padding != (c.kernel_size - 1) / 2)
        throw ShapeError("model: conv stages need odd kernels with same-length padding");
      if (s > 0 && c.in_channels != conv_layers[s - 1].out_channels)
        throw ShapeError("model: conv stage channels do not chain");
    }
    const auto enc = encoder_lengths();
    for (std::size_t s = 0; s < kStages; ++s)
      if (enc[s] < 2) throw ShapeError("model: n_i too short for four pooling stages");
    if (enc.back() < 1) throw ShapeError("model: empty bottleneck");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline ModelConfig make_model_config(std::size_t n_i, std::size_t n_l, const std::array<std::size_t, kStages>& channels,
                                     std::size_t kernel_size = 3) {
  ModelConfig cfg;
  cfg.n_i = n_i;
  cfg.n_l = n_l;
  std::size_t in = 1;
  for (std::size_t c : channels) {
    cfg.conv_layers.push_back({in, c, kernel_size, (kernel_size - 1) / 2});
    in = c;
  }
  cfg.validate();
  return cfg;
}

/// Channels 1->8->16->32->64, kernel 3; latent 16 for short spectra, 32 for long ones.
inline ModelConfig default_model_config(std::size_t n_i) {
  return make_model_config(n_i, n_i < 500 ? 16 : 32, {8, 16, 32, 64});
}

enum class LayerKind { conv, dense, conv_transpose };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::dense: return "dense";
    case LayerKind::conv_transpose: return "conv_transpose";
  }
  return "?";
}

// Parameter layout: encoder convs 0..3, encoder dense 4, decoder dense 5, decoder
// transpose convs 6..9.
inline constexpr std::size_t kEncDense = kStages;
inline constexpr std::size_t kDecDense = kStages + 1;
inline constexpr std::size_t kFirstUp = kStages + 2;
inline constexpr std::size_t kLayerCount = 2 * kStages + 2;

struct LayerShape {
  std::string name;
  LayerKind kind;
  std::size_t out, in, kernel;
};

inline std::vector<LayerShape> layer_shapes(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<LayerShape> shapes;
  for (std::size_t s = 0; s < kStages; ++s) {
    const auto& c = cfg.conv_layers[s];
    shapes.push_back({"enc_conv" + std::to_string(s + 1), LayerKind::conv, c.out_channels, c.in_channels, c.kernel_size});
  }
  shapes.push_back({"enc_dense", LayerKind::dense, cfg.n_l, cfg.flat_size(), 1});
  shapes.push_back({"dec_dense", LayerKind::dense, cfg.decoder_flat_size(), cfg.n_l, 1});
  for (std::size_t s = 0; s < kStages; ++s) {
    const auto& mirror = cfg.conv_layers[kStages - 1 - s];
    shapes.push_back({"dec_convT" + std::to_string(s + 1), LayerKind::conv_transpose, mirror.in_channels,
                      mirror.out_channels, kUpKernel});
  }
  return shapes;
}

template <class Real>
struct ModelParams {
  std::vector<Kernel<Real>> layers;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  /// Visit every tensor in serialization order: per layer, weights then bias.
  template <class F>
  void for_each_tensor(F&& f) {
    for (auto& l : layers) {
      f(std::span<Real>(l.weight));
      f(std::span<Real>(l.bias));
    }
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    for (const auto& l : layers) {
      f(std::span<const Real>(l.weight));
      f(std::span<const Real>(l.bias));
    }
  }

  std::vector<Real> flatten() const {
    std::vector<Real> flat;
    flat.reserve(parameter_count());
    for_each_tensor([&](std::span<const Real> t) { flat.insert(flat.end(), t.begin(), t.end()); });
    return flat;
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

template <class Real>
ModelParams<Real> zero_params(const ModelConfig& cfg) {
  ModelParams<Real> p;
  for (const auto& s : layer_shapes(cfg)) p.layers.emplace_back(s.out, s.in, s.kernel);
  return p;
}

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
template <class Real>
ModelParams<Real> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  auto p = zero_params<Real>(cfg);
  Rng rng(seed);
  for (auto& l : p.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>((l.in + l.out) * l.size));
    for (auto& w : l.weight) w = static_cast<Real>(rng.uniform(-limit, limit));
  }
  return p;
}

template <class To, class From>
ModelParams<To> cast_params(const ModelParams<From>& src) {
  ModelParams<To> dst;
  dst.layers.reserve(src.layers.size());
  for (const auto& l : src.layers) {
    Kernel<To> k;
    k.out = l.out;
    k.in = l.in;
    k.size = l.size;
    k.weight.assign(l.weight.begin(), l.weight.end());
    k.bias.assign(l.bias.begin(), l.bias.end());
    dst.layers.push_back(std::move(k));
  }
  return dst;
}

template <class Real>
void check_params(const ModelParams<Real>& p, const ModelConfig& cfg) {
  const auto shapes = layer_shapes(cfg);
  if (p.layers.size() != shapes.size()) throw ShapeError("model: wrong number of parameter layers");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto& l = p.layers[i];
    l.check();
    if (l.out != shapes[i].out || l.in != shapes[i].in || l.size != shapes[i].kernel)
      throw ShapeError("model: parameter shape mismatch in " + shapes[i].name);
  }
}

/// Everything the backward pass needs from a forward pass.
template <class Real>
struct Activations {
  std::array<Signal<Real>, kStages> enc_input;
  std::array<Signal<Real>, kStages> enc_output;  // post-tanh, pre-pool
  std::array<std::vector<std::size_t>, kStages> pool_argmax;
  std::vector<Real> flat;
  std::vector<Real> latent;
  std::vector<Real> dec_dense_output;  // post-tanh
  std::array<Signal<Real>, kStages> dec_input;
  std::array<Signal<Real>, kStages> dec_output;  // post-tanh
};

template <class Real>
struct ForwardResult {
  std::vector<Real> reconstruction;
  std::vector<Real> latent;
  std::optional<Activations<Real>> cache;
};

namespace detail {

template <class Real>
std::vector<Real> encode_impl(const ModelParams<Real>& p, const ModelConfig& cfg, std::span<const Real> x,
                              Activations<Real>* cache) {
  if (x.size() != cfg.n_i) throw ShapeError("model: input length " + std::to_string(x.size()) + " != n_i " +
                                            std::to_string(cfg.n_i));
  Signal<Real> h(1, cfg.n_i);
  std::copy(x.begin(), x.end(), h.data.begin());
  for (std::size_t s = 0; s < kStages; ++s) {
    auto y = conv1d_forward(h, p.layers[s], cfg.conv_layers[s].padding);
    tanh_forward(y.data);
    auto pooled = maxpool_forward(y);
    if (cache) {
      cache->enc_input[s] = std::move(h);
      cache->enc_output[s] = std::move(y);
      cache->pool_argmax[s] = std::move(pooled.argmax);
    }
    h = std::move(pooled.output);
  }
  auto latent = dense_forward(h.data, p.layers[kEncDense]);
  tanh_forward(latent);
  if (cache) {
    cache->flat = std::move(h.data);
    cache->latent = latent;
  }
  return latent;
}

template <class Real>
std::vector<Real> decode_impl(const ModelParams<Real>& p, const ModelConfig& cfg, const std::vector<Real>& latent,
                              Activations<Real>* cache) {
  const auto dec = cfg.decoder_lengths();
  auto d = dense_forward(latent, p.layers[kDecDense]);
  tanh_forward(d);
  Signal<Real> h(cfg.bottleneck_channels(), dec[0]);
  h.data = d;
  if (cache) cache->dec_dense_output = std::move(d);
  for (std::size_t s = 0; s < kStages; ++s) {
    auto y = convtranspose1d_forward(h, p.layers[kFirstUp + s], dec[s + 1]);
    tanh_forward(y.data);
    if (cache) {
      cache->dec_input[s] = std::move(h);
      cache->dec_output[s] = y;
    }
    h = std::move(y);
  }
  return std::move(h.data);
}

} // namespace detail

/// Encoder half only: the post-tanh bottleneck vector.
template <class Real>
std::vector<Real> encode(const ModelParams<Real>& p, const ModelConfig& cfg, std::span<const Real> x) {
  return detail::encode_impl<Real>(p, cfg, x, nullptr);
}

template <class Real>
ForwardResult<Real> model_forward(const ModelParams<Real>& p, const ModelConfig& cfg, std::span<const Real> x,
                                  bool cache = false) {
  ForwardResult<Real> r;
  Activations<Real>* act = nullptr;
  if (cache) act = &r.cache.emplace();
  r.latent = detail::encode_impl<Real>(p, cfg, x, act);
  r.reconstruction = detail::decode_impl<Real>(p, cfg, r.latent, act);
  return r;
}

/// Gradients of sum(grad_output * reconstruction) with respect to every parameter.
/// When input_grad is non-null it receives the gradient with respect to the input spectrum.
template <class Real>
ModelParams<Real> model_backward(const ModelParams<Real>& p, const ModelConfig& cfg,
                                 const std::optional<Activations<Real>>& cache, std::span<const Real> grad_output,
                                 std::vector<Real>* input_grad = nullptr) {
  if (!cache || cache->latent.empty()) throw StateError("model_backward: forward pass was not cached");
  if (grad_output.size() != cfg.n_i) throw ShapeError("model_backward: gradient length != n_i");
  const auto& a = *cache;
  ModelParams<Real> g;
  g.layers.resize(kLayerCount);

  Signal<Real> grad(1, cfg.n_i);
  std::copy(grad_output.begin(), grad_output.end(), grad.data.begin());
  for (std::size_t s = kStages; s-- > 0;) {
    grad.data = tanh_backward(grad.data, a.dec_output[s].data);
    auto lg = convtranspose1d_backward(grad, a.dec_input[s], p.layers[kFirstUp + s]);
    g.layers[kFirstUp + s] = std::move(lg.kernel);
    grad = std::move(lg.input);
  }
  auto gd = tanh_backward(grad.data, a.dec_dense_output);
  auto dg = dense_backward(gd, a.latent, p.layers[kDecDense]);
  g.layers[kDecDense] = std::move(dg.kernel);

  auto gl = tanh_backward(dg.input, a.latent);
  auto eg = dense_backward(gl, a.flat, p.layers[kEncDense]);
  g.layers[kEncDense] = std::move(eg.kernel);

  const auto enc = cfg.encoder_lengths();
  grad = Signal<Real>(cfg.bottleneck_channels(), enc.back());
  grad.data = std::move(eg.input);
  for (std::size_t s = kStages; s-- > 0;) {
    auto gp = maxpool_backward(grad, a.pool_argmax[s], a.enc_output[s].length);
    gp.data = tanh_backward(gp.data, a.enc_output[s].data);
    auto lg = conv1d_backward(gp, a.enc_input[s], p.layers[s], cfg.conv_layers[s].padding);
    g.layers[s] = std::move(lg.kernel);
    grad = std::move(lg.input);
  }
  if (input_grad) *input_grad = std::move(grad.data);
  return g;
}

} // namespace uhred
