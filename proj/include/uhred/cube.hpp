#pragma once

// Hyperspectral data cube: storage, HSC1 file format, and preprocessing.
//
// HSC1 layout (little-endian):
//   0   "HSC1"
//   4   u32 height
//   8   u32 width
//   12  u32 bands
//   16  u8  axis flag (0 or 1)
//   17  [bands x f32 axis values, when flag = 1]
//   ..  height*width*bands x f32 data, pixel-interleaved, raster order

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uhred/binary.hpp"
#include "uhred/error.hpp"
#include "uhred/random.hpp"

namespace uhred {

struct HyperCube {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t bands = 0;
  std::optional<std::vector<float>> axis;
  std::vector<float> data;
  double norm_factor = 1.0;

  HyperCube() = default;
  HyperCube(std::size_t h, std::size_t w, std::size_t b, float fill = 0.0f)
      : height(h), width(w), bands(b), data(h * w * b, fill) {}

  std::size_t pixels() const { return height * width; }

  std::span<float> spectrum(std::size_t pixel) { return {data.data() + pixel * bands, bands}; }
  std::span<const float> spectrum(std::size_t pixel) const {
    return {data.data() + pixel * bands, bands};
  }

  float& at(std::size_t row, std::size_t col, std::size_t band) {
    return data[(row * width + col) * bands + band];
  }
  float at(std::size_t row, std::size_t col, std::size_t band) const {
    return data[(row * width + col) * bands + band];
  }

  bool same_shape(const HyperCube& other) const {
    return height == other.height && width == other.width && bands == other.bands;
  }

  /// Throws PreconditionError when an invariant is broken.
  void validate() const {
    if (height == 0 || width == 0 || bands == 0)
      throw PreconditionError("cube dimensions must be >= 1");
    if (data.size() != height * width * bands)
      throw PreconditionError("cube data length does not match height*width*bands");
    if (!(norm_factor > 0.0)) throw PreconditionError("cube norm_factor must be > 0");
    if (axis) {
      if (axis->size() != bands) throw PreconditionError("cube axis length differs from bands");
      if (!strictly_monotonic(*axis)) throw PreconditionError("cube axis is not strictly monotonic");
    }
  }

  friend bool operator==(const HyperCube&, const HyperCube&) = default;

  static bool strictly_monotonic(std::span<const float> v) {
    if (v.size() < 2) return true;
    const bool up = v[1] > v[0];
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (up ? !(v[i] > v[i - 1]) : !(v[i] < v[i - 1])) return false;
    }
    return true;
  }
};

/// One flag per pixel.
struct PixelMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<bool> bits;

  PixelMask() = default;
  PixelMask(std::size_t h, std::size_t w) : height(h), width(w), bits(h * w, false) {}

  bool test(std::size_t pixel) const { return bits[pixel]; }
  void set(std::size_t pixel, bool on = true) { bits[pixel] = on; }
  std::size_t count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), true)); }
  bool empty() const { return count() == 0; }

  friend bool operator==(const PixelMask&, const PixelMask&) = default;
};

/// One small integer label per pixel (phase identity, cluster id).
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<int> labels;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, int fill = 0) : height(h), width(w), labels(h * w, fill) {}

  int& operator()(std::size_t row, std::size_t col) { return labels[row * width + col]; }
  int operator()(std::size_t row, std::size_t col) const { return labels[row * width + col]; }

  PixelMask mask_of(int label) const {
    PixelMask m(height, width);
    for (std::size_t i = 0; i < labels.size(); ++i) m.set(i, labels[i] == label);
    return m;
  }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::uint64_t seed = 0;
};

inline constexpr char kCubeMagic[4] = {'H', 'S', 'C', '1'};

inline std::vector<std::uint8_t> encode_cube(const HyperCube& cube) {
  cube.validate();
  if (cube.height > UINT32_MAX || cube.width > UINT32_MAX || cube.bands > UINT32_MAX)
    throw PreconditionError("cube dimension exceeds u32 range");
  std::vector<std::uint8_t> out;
  out.reserve(17 + 4 * (cube.bands + cube.data.size()));
  detail::put_bytes(out, {kCubeMagic, 4});
  detail::put_u32(out, static_cast<std::uint32_t>(cube.height));
  detail::put_u32(out, static_cast<std::uint32_t>(cube.width));
  detail::put_u32(out, static_cast<std::uint32_t>(cube.bands));
  out.push_back(cube.axis ? 1 : 0);
  if (cube.axis)
    for (float v : *cube.axis) detail::put_f32(out, v);
  for (float v : cube.data) detail::put_f32(out, v);
  return out;
}

inline HyperCube decode_cube(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader in(bytes, "HSC1");
  if (in.remaining() < 4 || in.take(4) != std::string_view(kCubeMagic, 4))
    throw FormatError("HSC1: bad magic");
  HyperCube cube;
  cube.height = in.u32();
  cube.width = in.u32();
  cube.bands = in.u32();
  const std::uint8_t flag = in.u8();
  if (cube.height == 0 || cube.width == 0 || cube.bands == 0)
    throw FormatError("HSC1: zero dimension in header");
  if (flag > 1) throw FormatError("HSC1: axis flag must be 0 or 1");

  const std::uint64_t values = static_cast<std::uint64_t>(cube.height) * cube.width * cube.bands;
  const std::uint64_t expected = 4ULL * ((flag ? cube.bands : 0) + values);
  if (expected != in.remaining())
    throw FormatError("HSC1: payload is " + std::to_string(in.remaining()) + " bytes, header implies " +
                      std::to_string(expected));

  auto finite = [](float v) {
    if (!std::isfinite(v)) throw FormatError("HSC1: non-finite value");
    return v;
  };
  if (flag) {
    std::vector<float> axis(cube.bands);
    for (auto& a : axis) a = finite(in.f32());
    if (!HyperCube::strictly_monotonic(axis)) throw FormatError("HSC1: axis is not strictly monotonic");
    cube.axis = std::move(axis);
  }
  cube.data.resize(values);
  for (auto& v : cube.data) v = finite(in.f32());
  return cube;
}

inline HyperCube load_cube(const std::filesystem::path& path) {
  return decode_cube(detail::read_file(path));
}

inline void save_cube(const HyperCube& cube, const std::filesystem::path& path) {
  detail::write_file(path, encode_cube(cube));
}

/// Divide the whole cube by its global maximum.
inline HyperCube normalize_max(const HyperCube& cube) {
  float peak = -std::numeric_limits<float>::infinity();
  for (float v : cube.data) peak = std::max(peak, v);
  if (!(peak > 0.0f)) throw DegenerateInputError("normalize_max: cube has no positive value");
  HyperCube out = cube;
  for (auto& v : out.data) v /= peak;
  out.norm_factor = cube.norm_factor * static_cast<double>(peak);
  return out;
}

/// Flag every pixel whose spectrum has a value >= threshold.
inline PixelMask find_saturated(const HyperCube& cube, double threshold) {
  if (!(threshold > 0.0)) throw PreconditionError("find_saturated: threshold must be > 0");
  PixelMask mask(cube.height, cube.width);
  for (std::size_t p = 0; p < cube.pixels(); ++p) {
    const auto s = cube.spectrum(p);
    mask.set(p, std::any_of(s.begin(), s.end(), [&](float v) { return v >= threshold; }));
  }
  return mask;
}

inline constexpr std::size_t kRepairDonors = 4;
inline constexpr std::size_t kRepairRadius = 3;

/// Replace each flagged spectrum by the mean of up to four seeded-random
/// unflagged donors within Chebyshev radius 3.
inline HyperCube repair_saturated(const HyperCube& cube, const PixelMask& mask, std::uint64_t seed) {
  if (mask.height != cube.height || mask.width != cube.width || mask.bits.size() != cube.pixels())
    throw PreconditionError("repair_saturated: mask dimensions differ from cube");
  HyperCube out = cube;
  Rng rng(seed);
  const auto r = static_cast<std::ptrdiff_t>(kRepairRadius);
  std::vector<std::size_t> donors;
  std::vector<double> acc(cube.bands);
  for (std::size_t row = 0; row < cube.height; ++row) {
    for (std::size_t col = 0; col < cube.width; ++col) {
      const std::size_t p = row * cube.width + col;
      if (!mask.test(p)) continue;
      donors.clear();
      for (std::ptrdiff_t dr = -r; dr <= r; ++dr) {
        for (std::ptrdiff_t dc = -r; dc <= r; ++dc) {
          const auto rr = static_cast<std::ptrdiff_t>(row) + dr;
          const auto cc = static_cast<std::ptrdiff_t>(col) + dc;
          if (rr < 0 || cc < 0 || rr >= static_cast<std::ptrdiff_t>(cube.height) ||
              cc >= static_cast<std::ptrdiff_t>(cube.width))
            continue;
          const std::size_t q = static_cast<std::size_t>(rr) * cube.width + static_cast<std::size_t>(cc);
          if (!mask.test(q)) donors.push_back(q);
        }
      }
      if (donors.empty())
        throw RepairError("repair_saturated: pixel (" + std::to_string(row) + ", " + std::to_string(col) +
                          ") has no unflagged neighbor within radius 3");
      // Partial Fisher-Yates: the first m entries become the chosen donors.
      const std::size_t m = std::min(kRepairDonors, donors.size());
      for (std::size_t i = 0; i < m; ++i) std::swap(donors[i], donors[i + rng.index(donors.size() - i)]);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        const auto s = cube.spectrum(donors[i]);
        for (std::size_t b = 0; b < cube.bands; ++b) acc[b] += s[b];
      }
      auto dst = out.spectrum(p);
      for (std::size_t b = 0; b < cube.bands; ++b) dst[b] = static_cast<float>(acc[b] / static_cast<double>(m));
    }
  }
  return out;
}

/// Seeded shuffle of 0..n-1; the first floor(fraction*n) indices train, the rest validate.
inline SplitIndices split_train_val(std::size_t n_pixels, double fraction, std::uint64_t seed) {
  if (n_pixels < 2) throw PreconditionError("split_train_val: need at least 2 pixels");
  if (!(fraction > 0.0 && fraction < 1.0)) throw PreconditionError("split_train_val: fraction must lie in (0, 1)");
  const auto n_train = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n_pixels)));
  if (n_train == 0 || n_train == n_pixels)
    throw DegenerateInputError("split_train_val: fraction leaves train or validation set empty");
  std::vector<std::size_t> order(n_pixels);
  for (std::size_t i = 0; i < n_pixels; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span(order));
  SplitIndices split;
  split.seed = seed;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return split;
}

} // namespace uhred
