#pragma once

// MSE loss, Adam, the UHRED/SHRED training loop and whole-cube inference.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "uhred/cube.hpp"
#include "uhred/error.hpp"
#include "uhred/model.hpp"
#include "uhred/random.hpp"

namespace uhred {

/// UHRED: the noisy cube is both input and target. SHRED: a separate clean target.
enum class TrainMode { uhred, shred };

inline const char* to_string(TrainMode m) { return m == TrainMode::uhred ? "uhred" : "shred"; }

inline TrainMode parse_mode(const std::string& s) {
  if (s == "uhred" || s == "UHRED") return TrainMode::uhred;
  if (s == "shred" || s == "SHRED") return TrainMode::shred;
  throw PreconditionError("unknown training mode '" + s + "'");
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  TrainMode mode = TrainMode::uhred;
  AdamConfig adam;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  double split_fraction = 0.8;
  std::uint64_t seed = 0;
  double input_scale = 0.9;  // training data is scaled so its maximum equals this

  void validate() const {
    if (!(adam.learning_rate > 0.0)) throw PreconditionError("train: learning rate must be > 0");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
      throw PreconditionError("train: betas must lie in [0, 1)");
    if (!(adam.epsilon > 0.0)) throw PreconditionError("train: epsilon must be > 0");
    if (batch_size == 0) throw PreconditionError("train: batch size must be >= 1");
    if (max_epochs == 0) throw PreconditionError("train: max_epochs must be >= 1");
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw PreconditionError("train: split fraction must lie in (0, 1)");
    if (!(input_scale > 0.0 && input_scale < 1.0)) throw PreconditionError("train: input_scale must lie in (0, 1)");
  }
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// loss = mean((pred - target)^2), grad = 2 (pred - target) / n.
inline LossAndGrad mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) throw ShapeError("mse_loss: length mismatch");
  const double n = static_cast<double>(pred.size());
  LossAndGrad r{0.0, std::vector<double>(pred.size())};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    r.loss += d * d;
    r.grad[i] = 2.0 * d / n;
  }
  r.loss /= n;
  return r;
}

/// One bias-corrected Adam update over a flat parameter vector.
template <class Real>
void adam_update(std::span<Real> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw ShapeError("adam: parameter and gradient counts differ");
  for (double g : grads)
    if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw ShapeError("adam: optimizer state does not match parameters");
  state.t += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] = static_cast<Real>(static_cast<double>(params[i]) - cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon));
  }
}

template <class Real>
void adam_step(ModelParams<Real>& params, const ModelParams<double>& grads, AdamState& state, const AdamConfig& cfg) {
  if (params.layers.size() != grads.layers.size()) throw ShapeError("adam: gradient layer count mismatch");
  const auto flat_g = grads.flatten();
  auto flat_p = params.flatten();
  adam_update(std::span<Real>(flat_p), std::span<const double>(flat_g), state, cfg);
  std::size_t offset = 0;
  params.for_each_tensor([&](std::span<Real> t) {
    std::copy_n(flat_p.begin() + static_cast<std::ptrdiff_t>(offset), t.size(), t.begin());
    offset += t.size();
  });
}

/// Everything besides weights that inference needs, stored in the model file.
struct ModelMeta {
  double input_scale = 1.0;  // multiplier applied to spectra before the network
  double norm_factor = 1.0;  // norm_factor of the training cube
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::uhred;
  TrainConfig train;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;  // 1-based; 0 = initial parameters
  double best_val_loss = 0.0;
  double initial_val_loss = 0.0;
  double wall_seconds = 0.0;
  bool early_stopped = false;
};

struct TrainResult {
  ModelParams<float> params;
  ModelMeta meta;
  TrainReport report;
};

using EpochCallback = std::function<void(std::size_t epoch, double train_loss, double val_loss)>;

namespace detail {

inline std::vector<double> scaled_spectrum(const HyperCube& cube, std::size_t pixel, double scale) {
  const auto s = cube.spectrum(pixel);
  std::vector<double> x(s.size());
  for (std::size_t b = 0; b < s.size(); ++b) x[b] = static_cast<double>(s[b]) * scale;
  return x;
}

inline double mean_loss(const ModelParams<double>& p, const ModelConfig& cfg, const HyperCube& input,
                        const HyperCube& target, const std::vector<std::size_t>& pixels, double scale) {
  double total = 0.0;
  for (std::size_t px : pixels) {
    const auto x = scaled_spectrum(input, px, scale);
    const auto y = scaled_spectrum(target, px, scale);
    const auto fwd = model_forward<double>(p, cfg, x);
    total += mse_loss(fwd.reconstruction, y).loss;
  }
  const double loss = total / static_cast<double>(pixels.size());
  if (!std::isfinite(loss)) throw NumericError("train: non-finite validation loss");
  return loss;
}

} // namespace detail

/// Mini-batch Adam on per-pixel spectra. Returns the parameters of the epoch
/// with the lowest validation loss. Serial and deterministic for a given seed.
inline TrainResult train(const HyperCube& input, const HyperCube* target, const ModelConfig& model_cfg,
                         const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  const auto started = std::chrono::steady_clock::now();
  cfg.validate();
  model_cfg.validate();
  input.validate();
  if (cfg.mode == TrainMode::shred && target == nullptr) throw PreconditionError("train: SHRED needs a target cube");
  if (cfg.mode == TrainMode::uhred && target != nullptr) throw PreconditionError("train: UHRED takes no target cube");
  const HyperCube& tgt = target ? *target : input;
  if (!tgt.same_shape(input)) throw ShapeError("train: input and target cube dimensions differ");
  if (input.bands != model_cfg.n_i) throw ShapeError("train: cube bands differ from model n_i");

  float peak = 0.0f;
  for (float v : input.data) peak = std::max(peak, v);
  if (!(peak > 0.0f)) throw DegenerateInputError("train: input cube has no positive value");

  TrainResult result;
  result.meta.input_scale = cfg.input_scale / static_cast<double>(peak);
  result.meta.norm_factor = input.norm_factor;
  result.meta.seed = cfg.seed;
  result.meta.mode = cfg.mode;
  result.meta.train = cfg;
  const double scale = result.meta.input_scale;

  const auto split = split_train_val(input.pixels(), cfg.split_fraction, Rng::derive(cfg.seed, 2));
  auto params = init_params<float>(model_cfg, Rng::derive(cfg.seed, 1));
  AdamState adam;

  auto& report = result.report;
  report.initial_val_loss = detail::mean_loss(cast_params<double>(params), model_cfg, input, tgt, split.val, scale);
  report.best_val_loss = report.initial_val_loss;
  result.params = params;

  std::vector<std::size_t> order = split.train;
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(Rng::derive(cfg.seed, 1000 + epoch));
    shuffle_rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const auto pd = cast_params<double>(params);
      auto grads = zero_params<double>(model_cfg);
      for (std::size_t i = start; i < stop; ++i) {
        const auto x = detail::scaled_spectrum(input, order[i], scale);
        const auto y = detail::scaled_spectrum(tgt, order[i], scale);
        const auto fwd = model_forward<double>(pd, model_cfg, x, true);
        const auto lg = mse_loss(fwd.reconstruction, y);
        if (!std::isfinite(lg.loss)) throw NumericError("train: non-finite training loss");
        epoch_loss += lg.loss;
        const auto g = model_backward<double>(pd, model_cfg, fwd.cache, lg.grad);
        for (std::size_t l = 0; l < grads.layers.size(); ++l) {
          auto& acc = grads.layers[l];
          const auto& src = g.layers[l];
          for (std::size_t j = 0; j < acc.weight.size(); ++j) acc.weight[j] += src.weight[j];
          for (std::size_t j = 0; j < acc.bias.size(); ++j) acc.bias[j] += src.bias[j];
        }
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      grads.for_each_tensor([&](std::span<double> t) {
        for (auto& v : t) v *= inv;
      });
      adam_step(params, grads, adam, cfg.adam);
    }
    const double train_loss = epoch_loss / static_cast<double>(order.size());
    const double val_loss = detail::mean_loss(cast_params<double>(params), model_cfg, input, tgt, split.val, scale);
    report.train_loss.push_back(train_loss);
    report.val_loss.push_back(val_loss);
    if (on_epoch) on_epoch(epoch, train_loss, val_loss);
    if (val_loss < report.best_val_loss) {
      report.best_val_loss = val_loss;
      report.best_epoch = epoch;
      result.params = params;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      report.early_stopped = true;
      break;
    }
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

namespace detail {

/// Run f(pixel) over [0, n) on up to `threads` workers; each pixel is handled exactly once.
template <class F>
void parallel_pixels(std::size_t n, std::size_t threads, F&& f) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t p = 0; p < n; ++p) f(p);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &f] {
      for (std::size_t p = lo; p < hi; ++p) f(p);
    });
  }
  for (auto& th : pool) th.join();
}

} // namespace detail

/// Replace every spectrum by its reconstruction. Output is independent of `threads`.
inline HyperCube denoise_cube(const ModelParams<float>& params, const ModelConfig& cfg, const ModelMeta& meta,
                              const HyperCube& cube, std::size_t threads = 1) {
  cube.validate();
  check_params(params, cfg);
  if (cube.bands != cfg.n_i)
    throw ShapeError("denoise: cube has " + std::to_string(cube.bands) + " bands, model expects " + std::to_string(cfg.n_i));
  const auto pd = cast_params<double>(params);
  HyperCube out = cube;
  detail::parallel_pixels(cube.pixels(), threads, [&](std::size_t p) {
    const auto x = detail::scaled_spectrum(cube, p, meta.input_scale);
    const auto fwd = model_forward<double>(pd, cfg, x);
    auto dst = out.spectrum(p);
    for (std::size_t b = 0; b < dst.size(); ++b) dst[b] = static_cast<float>(fwd.reconstruction[b] / meta.input_scale);
  });
  return out;
}

} // namespace uhred
