#pragma once

// JSON run configuration shared by every CLI subcommand. Any section or key
// may be omitted; unknown keys are rejected.

#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>

#include "json.hpp"
#include "uhred/error.hpp"
#include "uhred/model.hpp"
#include "uhred/phantom.hpp"
#include "uhred/training.hpp"

namespace uhred {

class ConfigError : public Error {
public:
  using Error::Error;
};

struct ModelOverrides {
  std::optional<std::size_t> n_l;
  std::array<std::size_t, kStages> channels{8, 16, 32, 64};
  std::size_t kernel_size = 3;

  ModelConfig for_input_length(std::size_t n_i) const {
    const auto base = default_model_config(n_i);
    return make_model_config(n_i, n_l.value_or(base.n_l), channels, kernel_size);
  }
};

struct ClusterConfig {
  std::size_t k_max = 8;
  std::size_t max_iter = 300;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

struct MetricsConfig {
  std::size_t snr_radius = 5;
  std::size_t baseline_kernel = 10;
};

struct RunConfig {
  PhantomSpec phantom = default_phantom_spec();
  ModelOverrides model;
  TrainConfig train;
  ClusterConfig clustering;
  MetricsConfig metrics;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) throw ConfigError("config: unknown key '" + where + "." + k + "'");
}

template <class T>
void read_opt(const nlohmann::json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

inline Phase phase_from_json(const nlohmann::json& j) {
  reject_unknown(j, "phantom.phases[]", {"name", "background", "peaks"});
  Phase ph;
  read_opt(j, "name", ph.name);
  read_opt(j, "background", ph.background);
  if (j.contains("peaks")) {
    for (const auto& p : j.at("peaks")) {
      reject_unknown(p, "phantom.phases[].peaks[]", {"center", "hwhm", "amplitude"});
      Peak pk;
      read_opt(p, "center", pk.center);
      read_opt(p, "hwhm", pk.hwhm);
      read_opt(p, "amplitude", pk.amplitude);
      ph.peaks.push_back(pk);
    }
  }
  return ph;
}

} // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig c;
  try {
    detail::reject_unknown(j, "", {"phantom", "model", "train", "clustering", "metrics"});
    if (j.contains("phantom")) {
      const auto& p = j.at("phantom");
      detail::reject_unknown(p, "phantom",
                             {"height", "width", "bands", "axis_start", "axis_step", "droplet_count",
                              "droplet_radius_min", "droplet_radius_max", "noise_sigma0", "noise_gain", "seed", "phases"});
      auto& s = c.phantom;
      detail::read_opt(p, "height", s.height);
      detail::read_opt(p, "width", s.width);
      detail::read_opt(p, "bands", s.bands);
      detail::read_opt(p, "axis_start", s.axis_start);
      detail::read_opt(p, "axis_step", s.axis_step);
      detail::read_opt(p, "droplet_count", s.droplet_count);
      detail::read_opt(p, "droplet_radius_min", s.droplet_radius_min);
      detail::read_opt(p, "droplet_radius_max", s.droplet_radius_max);
      detail::read_opt(p, "noise_sigma0", s.noise_sigma0);
      detail::read_opt(p, "noise_gain", s.noise_gain);
      detail::read_opt(p, "seed", s.seed);
      if (p.contains("phases")) {
        s.phases.clear();
        for (const auto& ph : p.at("phases")) s.phases.push_back(detail::phase_from_json(ph));
      }
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      detail::reject_unknown(m, "model", {"n_l", "channels", "kernel_size"});
      if (m.contains("n_l")) c.model.n_l = m.at("n_l").get<std::size_t>();
      detail::read_opt(m, "channels", c.model.channels);
      detail::read_opt(m, "kernel_size", c.model.kernel_size);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      detail::reject_unknown(t, "train",
                             {"mode", "learning_rate", "beta1", "beta2", "epsilon", "batch_size", "max_epochs",
                              "patience", "split_fraction", "seed", "input_scale"});
      auto& s = c.train;
      if (t.contains("mode")) s.mode = parse_mode(t.at("mode").get<std::string>());
      detail::read_opt(t, "learning_rate", s.adam.learning_rate);
      detail::read_opt(t, "beta1", s.adam.beta1);
      detail::read_opt(t, "beta2", s.adam.beta2);
      detail::read_opt(t, "epsilon", s.adam.epsilon);
      detail::read_opt(t, "batch_size", s.batch_size);
      detail::read_opt(t, "max_epochs", s.max_epochs);
      detail::read_opt(t, "patience", s.patience);
      detail::read_opt(t, "split_fraction", s.split_fraction);
      detail::read_opt(t, "seed", s.seed);
      detail::read_opt(t, "input_scale", s.input_scale);
    }
    if (j.contains("clustering")) {
      const auto& k = j.at("clustering");
      detail::reject_unknown(k, "clustering", {"k_max", "max_iter", "tol", "seed"});
      detail::read_opt(k, "k_max", c.clustering.k_max);
      detail::read_opt(k, "max_iter", c.clustering.max_iter);
      detail::read_opt(k, "tol", c.clustering.tol);
      detail::read_opt(k, "seed", c.clustering.seed);
    }
    if (j.contains("metrics")) {
      const auto& m = j.at("metrics");
      detail::reject_unknown(m, "metrics", {"snr_radius", "baseline_kernel"});
      detail::read_opt(m, "snr_radius", c.metrics.snr_radius);
      detail::read_opt(m, "baseline_kernel", c.metrics.baseline_kernel);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

/// Range checks that do not depend on the data.
inline void validate_run_config(const RunConfig& c) {
  try {
    c.phantom.validate();
    c.train.validate();
    if (c.model.kernel_size % 2 == 0) throw PreconditionError("model.kernel_size must be odd");
    if (c.model.n_l && *c.model.n_l == 0) throw PreconditionError("model.n_l must be >= 1");
    for (auto ch : c.model.channels)
      if (ch == 0) throw PreconditionError("model.channels must be >= 1");
    if (c.clustering.k_max < 3) throw PreconditionError("clustering.k_max must be >= 3");
    if (c.clustering.max_iter == 0) throw PreconditionError("clustering.max_iter must be >= 1");
    if (!(c.clustering.tol >= 0.0)) throw PreconditionError("clustering.tol must be >= 0");
    if (c.metrics.snr_radius == 0) throw PreconditionError("metrics.snr_radius must be >= 1");
    if (c.metrics.baseline_kernel == 0) throw PreconditionError("metrics.baseline_kernel must be >= 1");
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_run_config(j);
}

} // namespace uhred
