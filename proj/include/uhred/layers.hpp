#pragma once

// 1D autoencoder building blocks with analytic backward passes.
//
// Signals are [channels x length], channel-major. Convolutions are
// cross-correlations; weights are stored [out x in x kernel], out-major.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "uhred/error.hpp"

namespace uhred {

template <class Real>
struct Signal {
  std::size_t channels = 0;
  std::size_t length = 0;
  std::vector<Real> data;

  Signal() = default;
  Signal(std::size_t ch, std::size_t len, Real fill = Real(0)) : channels(ch), length(len), data(ch * len, fill) {}

  Real& operator()(std::size_t c, std::size_t t) { return data[c * length + t]; }
  Real operator()(std::size_t c, std::size_t t) const { return data[c * length + t]; }
  bool empty() const { return data.empty(); }
};

/// Weights and bias of one conv, transpose-conv or dense layer.
/// Dense layers use kernel = 1, weights [out x in] row-major.
template <class Real>
struct Kernel {
  std::size_t out = 0;
  std::size_t in = 0;
  std::size_t size = 1;
  std::vector<Real> weight;
  std::vector<Real> bias;

  Kernel() = default;
  Kernel(std::size_t o, std::size_t i, std::size_t k)
      : out(o), in(i), size(k), weight(o * i * k, Real(0)), bias(o, Real(0)) {}

  Real& w(std::size_t o, std::size_t i, std::size_t j) { return weight[(o * in + i) * size + j]; }
  Real w(std::size_t o, std::size_t i, std::size_t j) const { return weight[(o * in + i) * size + j]; }

  void check() const {
    if (weight.size() != out * in * size || bias.size() != out)
      throw ShapeError("kernel storage does not match its declared shape");
  }

  friend bool operator==(const Kernel&, const Kernel&) = default;
};

template <class Real>
struct KernelGrads {
  Signal<Real> input;
  Kernel<Real> kernel;
};

// ---------------------------------------------------------------------------
// Same-length convolution, stride 1.

template <class Real>
Signal<Real> conv1d_forward(const Signal<Real>& x, const Kernel<Real>& k, std::size_t pad) {
  k.check();
  if (x.channels != k.in) throw ShapeError("conv1d: input channels do not match kernel");
  if (k.size % 2 == 0 || pad != (k.size - 1) / 2) throw ShapeError("conv1d: need odd kernel with pad (k-1)/2");
  const std::size_t L = x.length;
  Signal<Real> y(k.out, L);
  for (std::size_t o = 0; o < k.out; ++o) {
    for (std::size_t t = 0; t < L; ++t) {
      double acc = k.bias[o];
      for (std::size_t c = 0; c < k.in; ++c) {
        const Real* wrow = &k.weight[(o * k.in + c) * k.size];
        const Real* xrow = &x.data[c * L];
        for (std::size_t j = 0; j < k.size; ++j) {
          const auto s = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(pad);
          if (s >= 0 && s < static_cast<std::ptrdiff_t>(L)) acc += static_cast<double>(wrow[j]) * xrow[s];
        }
      }
      y(o, t) = static_cast<Real>(acc);
    }
  }
  return y;
}

template <class Real>
KernelGrads<Real> conv1d_backward(const Signal<Real>& grad_y, const Signal<Real>& x, const Kernel<Real>& k,
                                  std::size_t pad) {
  if (x.empty()) throw StateError("conv1d_backward: no cached input");
  if (grad_y.channels != k.out || grad_y.length != x.length || x.channels != k.in)
    throw ShapeError("conv1d_backward: gradient shape mismatch");
  const std::size_t L = x.length;
  KernelGrads<Real> g{Signal<Real>(k.in, L), Kernel<Real>(k.out, k.in, k.size)};
  std::vector<double> gx(k.in * L, 0.0);
  for (std::size_t o = 0; o < k.out; ++o) {
    const Real* gy = &grad_y.data[o * L];
    double gb = 0.0;
    for (std::size_t t = 0; t < L; ++t) gb += gy[t];
    g.kernel.bias[o] = static_cast<Real>(gb);
    for (std::size_t c = 0; c < k.in; ++c) {
      const Real* xrow = &x.data[c * L];
      double* gxrow = &gx[c * L];
      for (std::size_t j = 0; j < k.size; ++j) {
        const double wj = k.w(o, c, j);
        double gw = 0.0;
        for (std::size_t t = 0; t < L; ++t) {
          const auto s = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(pad);
          if (s < 0 || s >= static_cast<std::ptrdiff_t>(L)) continue;
          gw += static_cast<double>(gy[t]) * xrow[s];
          gxrow[s] += static_cast<double>(gy[t]) * wj;
        }
        g.kernel.w(o, c, j) = static_cast<Real>(gw);
      }
    }
  }
  for (std::size_t i = 0; i < gx.size(); ++i) g.input.data[i] = static_cast<Real>(gx[i]);
  return g;
}

// ---------------------------------------------------------------------------
// Max pooling, window 2, stride 2. An odd trailing element is dropped.

template <class Real>
struct PoolResult {
  Signal<Real> output;
  std::vector<std::size_t> argmax;  // absolute input position per output element
};

template <class Real>
PoolResult<Real> maxpool_forward(const Signal<Real>& x) {
  if (x.length < 2) throw ShapeError("maxpool: input length must be >= 2");
  const std::size_t n = x.length / 2;
  PoolResult<Real> r{Signal<Real>(x.channels, n), std::vector<std::size_t>(x.channels * n)};
  for (std::size_t c = 0; c < x.channels; ++c)
    for (std::size_t i = 0; i < n; ++i) {
      const Real a = x(c, 2 * i);
      const Real b = x(c, 2 * i + 1);
      // Ties resolve to the lower index.
      const bool second = b > a;
      r.output(c, i) = second ? b : a;
      r.argmax[c * n + i] = 2 * i + (second ? 1 : 0);
    }
  return r;
}

template <class Real>
Signal<Real> maxpool_backward(const Signal<Real>& grad_y, const std::vector<std::size_t>& argmax,
                              std::size_t input_length) {
  if (argmax.size() != grad_y.data.size()) throw ShapeError("maxpool_backward: index count mismatch");
  Signal<Real> gx(grad_y.channels, input_length);
  for (std::size_t c = 0; c < grad_y.channels; ++c)
    for (std::size_t i = 0; i < grad_y.length; ++i) {
      const std::size_t t = argmax[c * grad_y.length + i];
      if (t >= input_length) throw ShapeError("maxpool_backward: index out of range");
      gx(c, t) += grad_y(c, i);
    }
  return gx;
}

// ---------------------------------------------------------------------------
// Transpose convolution, stride 2, padding 1, kernel 4: the adjoint of the
// matching strided convolution. Raw output length is 2L; the result is cropped
// on the right to target_len, which must be 2L or 2L - 1.

inline constexpr std::size_t kUpKernel = 4;
inline constexpr std::size_t kUpStride = 2;
inline constexpr std::size_t kUpPad = 1;

inline std::size_t convtranspose_raw_length(std::size_t L) {
  return (L - 1) * kUpStride - 2 * kUpPad + kUpKernel;
}

inline bool convtranspose_target_ok(std::size_t L, std::size_t target_len) {
  if (L == 0 || target_len == 0) return false;
  const std::size_t raw = convtranspose_raw_length(L);
  return target_len == raw || target_len + 1 == raw;
}

template <class Real>
Signal<Real> convtranspose1d_forward(const Signal<Real>& x, const Kernel<Real>& k, std::size_t target_len) {
  k.check();
  if (k.size != kUpKernel) throw ShapeError("convtranspose1d: kernel size must be 4");
  if (x.channels != k.in) throw ShapeError("convtranspose1d: input channels do not match kernel");
  if (!convtranspose_target_ok(x.length, target_len))
    throw ShapeError("convtranspose1d: target length " + std::to_string(target_len) + " unreachable from input length " +
                     std::to_string(x.length));
  const std::size_t L = x.length;
  std::vector<double> acc(k.out * target_len);
  for (std::size_t o = 0; o < k.out; ++o)
    for (std::size_t t = 0; t < target_len; ++t) acc[o * target_len + t] = k.bias[o];
  for (std::size_t o = 0; o < k.out; ++o) {
    double* yrow = &acc[o * target_len];
    for (std::size_t c = 0; c < k.in; ++c) {
      const Real* xrow = &x.data[c * L];
      for (std::size_t s = 0; s < L; ++s) {
        const double xv = xrow[s];
        for (std::size_t j = 0; j < kUpKernel; ++j) {
          const auto t = static_cast<std::ptrdiff_t>(kUpStride * s + j) - static_cast<std::ptrdiff_t>(kUpPad);
          if (t >= 0 && t < static_cast<std::ptrdiff_t>(target_len)) yrow[t] += xv * k.w(o, c, j);
        }
      }
    }
  }
  Signal<Real> y(k.out, target_len);
  for (std::size_t i = 0; i < acc.size(); ++i) y.data[i] = static_cast<Real>(acc[i]);
  return y;
}

template <class Real>
KernelGrads<Real> convtranspose1d_backward(const Signal<Real>& grad_y, const Signal<Real>& x, const Kernel<Real>& k) {
  if (x.empty()) throw StateError("convtranspose1d_backward: no cached input");
  if (grad_y.channels != k.out || x.channels != k.in || !convtranspose_target_ok(x.length, grad_y.length))
    throw ShapeError("convtranspose1d_backward: gradient shape mismatch");
  const std::size_t L = x.length;
  const std::size_t T = grad_y.length;
  KernelGrads<Real> g{Signal<Real>(k.in, L), Kernel<Real>(k.out, k.in, k.size)};
  std::vector<double> gx(k.in * L, 0.0);
  for (std::size_t o = 0; o < k.out; ++o) {
    const Real* gy = &grad_y.data[o * T];
    double gb = 0.0;
    for (std::size_t t = 0; t < T; ++t) gb += gy[t];
    g.kernel.bias[o] = static_cast<Real>(gb);
    for (std::size_t c = 0; c < k.in; ++c) {
      const Real* xrow = &x.data[c * L];
      double* gxrow = &gx[c * L];
      for (std::size_t j = 0; j < kUpKernel; ++j) {
        const double wj = k.w(o, c, j);
        double gw = 0.0;
        for (std::size_t s = 0; s < L; ++s) {
          const auto t = static_cast<std::ptrdiff_t>(kUpStride * s + j) - static_cast<std::ptrdiff_t>(kUpPad);
          if (t < 0 || t >= static_cast<std::ptrdiff_t>(T)) continue;
          gw += static_cast<double>(gy[t]) * xrow[s];
          gxrow[s] += static_cast<double>(gy[t]) * wj;
        }
        g.kernel.w(o, c, j) = static_cast<Real>(gw);
      }
    }
  }
  for (std::size_t i = 0; i < gx.size(); ++i) g.input.data[i] = static_cast<Real>(gx[i]);
  return g;
}

// ---------------------------------------------------------------------------
// Fully connected layer y = W x + b on a flattened signal.

template <class Real>
std::vector<Real> dense_forward(const std::vector<Real>& x, const Kernel<Real>& k) {
  k.check();
  if (k.size != 1 || x.size() != k.in) throw ShapeError("dense: input length does not match weights");
  std::vector<Real> y(k.out);
  for (std::size_t o = 0; o < k.out; ++o) {
    double acc = k.bias[o];
    const Real* row = &k.weight[o * k.in];
    for (std::size_t i = 0; i < k.in; ++i) acc += static_cast<double>(row[i]) * x[i];
    y[o] = static_cast<Real>(acc);
  }
  return y;
}

template <class Real>
struct DenseGrads {
  std::vector<Real> input;
  Kernel<Real> kernel;
};

template <class Real>
DenseGrads<Real> dense_backward(const std::vector<Real>& grad_y, const std::vector<Real>& x, const Kernel<Real>& k) {
  if (x.empty()) throw StateError("dense_backward: no cached input");
  if (grad_y.size() != k.out || x.size() != k.in) throw ShapeError("dense_backward: gradient shape mismatch");
  DenseGrads<Real> g{std::vector<Real>(k.in), Kernel<Real>(k.out, k.in, 1)};
  std::vector<double> gx(k.in, 0.0);
  for (std::size_t o = 0; o < k.out; ++o) {
    const double gy = grad_y[o];
    g.kernel.bias[o] = grad_y[o];
    const Real* row = &k.weight[o * k.in];
    Real* grow = &g.kernel.weight[o * k.in];
    for (std::size_t i = 0; i < k.in; ++i) {
      grow[i] = static_cast<Real>(gy * x[i]);
      gx[i] += gy * row[i];
    }
  }
  for (std::size_t i = 0; i < k.in; ++i) g.input[i] = static_cast<Real>(gx[i]);
  return g;
}

// ---------------------------------------------------------------------------

template <class Real>
void tanh_forward(std::vector<Real>& values) {
  for (auto& v : values) v = std::tanh(v);
}

/// grad_x = grad_y * (1 - y^2), with y the forward output.
template <class Real>
std::vector<Real> tanh_backward(const std::vector<Real>& grad_y, const std::vector<Real>& y) {
  if (grad_y.size() != y.size()) throw ShapeError("tanh_backward: length mismatch");
  std::vector<Real> gx(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) gx[i] = grad_y[i] * (Real(1) - y[i] * y[i]);
  return gx;
}

} // namespace uhred
