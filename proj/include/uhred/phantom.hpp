#pragma once

// Synthetic droplet phantoms: disks of peak-bearing phases on a background phase,
// with signal-dependent Gaussian noise standing in for shot noise.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "uhred/cube.hpp"
#include "uhred/error.hpp"
#include "uhred/random.hpp"

namespace uhred {

struct Peak {
  double center = 0.0;     // axis units
  double hwhm = 1.0;       // axis units
  double amplitude = 0.0;
};

struct Phase {
  std::string name;
  std::vector<Peak> peaks;
  double background = 0.0;
};

struct PhantomSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t bands = 92;
  double axis_start = 2760.0;
  double axis_step = 2.0;
  std::vector<Phase> phases;
  std::size_t droplet_count = 8;
  std::size_t droplet_radius_min = 4;
  std::size_t droplet_radius_max = 9;
  double noise_sigma0 = 0.0;
  double noise_gain = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (height == 0 || width == 0 || bands == 0) throw PreconditionError("phantom: dimensions must be >= 1");
    if (phases.size() < 2) throw PreconditionError("phantom: need at least two phases");
    if (phases.size() > 256) throw PreconditionError("phantom: at most 256 phases");
    if (droplet_radius_min < 1 || droplet_radius_max < droplet_radius_min)
      throw PreconditionError("phantom: invalid droplet radius range");
    if (2 * droplet_radius_max + 1 > std::min(height, width))
      throw PreconditionError("phantom: droplets do not fit inside the image");
    if (!(noise_sigma0 >= 0.0) || !(noise_gain >= 0.0))
      throw PreconditionError("phantom: noise parameters must be >= 0");
    if (!(axis_step != 0.0)) throw PreconditionError("phantom: axis_step must be nonzero");
    for (const auto& ph : phases) {
      if (!(ph.background >= 0.0)) throw PreconditionError("phantom: background must be >= 0");
      for (const auto& pk : ph.peaks)
        if (!(pk.hwhm > 0.0) || !(pk.amplitude >= 0.0))
          throw PreconditionError("phantom: peaks need hwhm > 0 and amplitude >= 0");
    }
  }

  std::vector<float> axis() const {
    std::vector<float> a(bands);
    for (std::size_t b = 0; b < bands; ++b) a[b] = static_cast<float>(axis_start + axis_step * static_cast<double>(b));
    return a;
  }

  /// Axis value of a (possibly fractional) band index.
  double band_position(double band) const { return axis_start + axis_step * band; }
};

/// Two-phase default: flat low "water" background with "hexadecane" droplets
/// carrying one Lorentzian line at 2852 cm^-1 (half-width 4 bands).
inline PhantomSpec default_phantom_spec(std::uint64_t seed = 1) {
  PhantomSpec spec;
  spec.seed = seed;
  const double step = spec.axis_step;
  spec.phases = {
      Phase{"water", {}, 0.12},
      Phase{"hexadecane", {Peak{2852.0, 4.0 * step, 0.9}}, 0.1},
  };
  spec.noise_sigma0 = 0.03;
  spec.noise_gain = 0.012;
  return spec;
}

/// Default phantom with the droplet line narrowed to a half-width of 2 bands.
inline PhantomSpec narrow_peak_phantom_spec(std::uint64_t seed = 1) {
  auto spec = default_phantom_spec(seed);
  spec.phases[1].peaks[0].hwhm = 2.0 * spec.axis_step;
  return spec;
}

/// Background plus three droplet phases whose single lines sit at different shifts.
inline PhantomSpec four_phase_phantom_spec(std::uint64_t seed = 1) {
  auto spec = default_phantom_spec(seed);
  const double step = spec.axis_step;
  spec.phases = {
      Phase{"matrix", {}, 0.12},
      Phase{"mineral_a", {Peak{spec.band_position(20), 3.0 * step, 0.9}}, 0.1},
      Phase{"mineral_b", {Peak{spec.band_position(46), 3.0 * step, 0.9}}, 0.1},
      Phase{"mineral_c", {Peak{spec.band_position(72), 3.0 * step, 0.9}}, 0.1},
  };
  spec.droplet_count = 9;
  return spec;
}

/// Standard Raman line shape A * G^2 / ((x - x0)^2 + G^2).
inline double lorentzian(double x, double center, double hwhm, double amplitude) {
  const double d = x - center;
  return amplitude * hwhm * hwhm / (d * d + hwhm * hwhm);
}

inline std::vector<double> phase_spectrum(const Phase& phase, const std::vector<float>& axis) {
  std::vector<double> s(axis.size(), phase.background);
  for (std::size_t b = 0; b < axis.size(); ++b)
    for (const auto& pk : phase.peaks) s[b] += lorentzian(axis[b], pk.center, pk.hwhm, pk.amplitude);
  return s;
}

struct Phantom {
  HyperCube ground_truth;
  LabelMap phase_map;
};

inline constexpr int kPlacementRetries = 1000;

/// Place non-overlapping disks of phases 1.. on phase 0, cycling through the
/// droplet phases in order, and fill in each pixel's clean spectrum.
inline Phantom render_phantom(const PhantomSpec& spec) {
  spec.validate();
  struct Disk {
    double row, col, radius;
  };
  Rng rng(spec.seed);
  std::vector<Disk> disks;
  LabelMap map(spec.height, spec.width, 0);
  for (std::size_t i = 0; i < spec.droplet_count; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
      const auto span = spec.droplet_radius_max - spec.droplet_radius_min + 1;
      const auto radius = static_cast<double>(spec.droplet_radius_min + rng.index(span));
      const auto r = static_cast<std::size_t>(radius);
      const auto row = static_cast<double>(r + rng.index(spec.height - 2 * r));
      const auto col = static_cast<double>(r + rng.index(spec.width - 2 * r));
      bool clear = true;
      for (const auto& d : disks) {
        const double dist = std::hypot(d.row - row, d.col - col);
        if (dist <= d.radius + radius + 1.0) {
          clear = false;
          break;
        }
      }
      if (!clear) continue;
      disks.push_back({row, col, radius});
      placed = true;
    }
    if (!placed)
      throw GenerationError("render_phantom: could not place droplet " + std::to_string(i) + " within " +
                            std::to_string(kPlacementRetries) + " attempts");
  }
  for (std::size_t i = 0; i < disks.size(); ++i) {
    const auto& d = disks[i];
    const int label = 1 + static_cast<int>(i % (spec.phases.size() - 1));
    for (std::size_t row = 0; row < spec.height; ++row)
      for (std::size_t col = 0; col < spec.width; ++col) {
        const double dr = static_cast<double>(row) - d.row;
        const double dc = static_cast<double>(col) - d.col;
        if (dr * dr + dc * dc <= d.radius * d.radius) map(row, col) = label;
      }
  }

  const auto axis = spec.axis();
  std::vector<std::vector<float>> spectra;
  for (const auto& ph : spec.phases) {
    const auto s = phase_spectrum(ph, axis);
    spectra.emplace_back(s.begin(), s.end());
  }
  Phantom out{HyperCube(spec.height, spec.width, spec.bands), map};
  out.ground_truth.axis = axis;
  for (std::size_t p = 0; p < out.ground_truth.pixels(); ++p) {
    const auto& src = spectra[static_cast<std::size_t>(map.labels[p])];
    std::copy(src.begin(), src.end(), out.ground_truth.spectrum(p).begin());
  }
  return out;
}

/// s -> s + e with e ~ N(0, sigma0^2 + gain * max(s, 0)).
inline HyperCube add_noise(const HyperCube& cube, double sigma0, double gain, std::uint64_t seed) {
  if (!(sigma0 >= 0.0) || !(gain >= 0.0)) throw PreconditionError("add_noise: sigma0 and gain must be >= 0");
  HyperCube out = cube;
  if (sigma0 == 0.0 && gain == 0.0) return out;
  Rng rng(seed);
  for (auto& v : out.data) {
    const double s = v;
    const double sd = std::sqrt(sigma0 * sigma0 + gain * std::max(s, 0.0));
    v = static_cast<float>(s + sd * rng.normal());
  }
  return out;
}

/// Ground truth plus a noisy acquisition drawn with the spec's noise model.
struct NoisyPhantom {
  Phantom clean;
  HyperCube noisy;
};

inline NoisyPhantom make_noisy_phantom(const PhantomSpec& spec) {
  NoisyPhantom out{render_phantom(spec), {}};
  out.noisy = add_noise(out.clean.ground_truth, spec.noise_sigma0, spec.noise_gain, Rng::derive(spec.seed, 1));
  return out;
}

} // namespace uhred
