#pragma once

// Image-quality measures: local SNR maps, region SNR, spectral PSNR, MSE,
// line profiles and the moving-average baseline filter.

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "uhred/cube.hpp"
#include "uhred/error.hpp"

namespace uhred {

inline constexpr double kDbCap = 99.0;

/// Single-band H x W image.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), pixels(h * w, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
  double operator()(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
};

inline Image band_image(const HyperCube& cube, std::size_t band) {
  if (band >= cube.bands) throw PreconditionError("band index out of range");
  Image img(cube.height, cube.width);
  for (std::size_t p = 0; p < cube.pixels(); ++p) img.pixels[p] = cube.data[p * cube.bands + band];
  return img;
}

inline double clamp_db(double db) { return std::clamp(db, -kDbCap, kDbCap); }

/// 20 log10(mean / std) over a disk of the given radius around every pixel,
/// clipped at the image border. sigma = 0 gives +99 dB, mean <= 0 gives -99 dB.
inline Image local_snr_map(const Image& img, std::size_t radius = 5) {
  if (radius < 1) throw PreconditionError("local_snr_map: radius must be >= 1");
  const auto r = static_cast<std::ptrdiff_t>(radius);
  const auto H = static_cast<std::ptrdiff_t>(img.height);
  const auto W = static_cast<std::ptrdiff_t>(img.width);
  std::vector<std::pair<std::ptrdiff_t, std::ptrdiff_t>> offsets;
  for (std::ptrdiff_t dr = -r; dr <= r; ++dr)
    for (std::ptrdiff_t dc = -r; dc <= r; ++dc)
      if (dr * dr + dc * dc <= r * r) offsets.emplace_back(dr, dc);

  Image out(img.height, img.width);
  for (std::ptrdiff_t row = 0; row < H; ++row)
    for (std::ptrdiff_t col = 0; col < W; ++col) {
      double sum = 0.0;
      std::size_t n = 0;
      for (auto [dr, dc] : offsets) {
        const auto rr = row + dr, cc = col + dc;
        if (rr < 0 || cc < 0 || rr >= H || cc >= W) continue;
        sum += img.pixels[static_cast<std::size_t>(rr * W + cc)];
        ++n;
      }
      const double mu = sum / static_cast<double>(n);
      double ss = 0.0;
      for (auto [dr, dc] : offsets) {
        const auto rr = row + dr, cc = col + dc;
        if (rr < 0 || cc < 0 || rr >= H || cc >= W) continue;
        const double d = img.pixels[static_cast<std::size_t>(rr * W + cc)] - mu;
        ss += d * d;
      }
      const double sigma = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
      double db;
      if (mu <= 0.0)
        db = -kDbCap;
      else if (sigma == 0.0)
        db = kDbCap;
      else
        db = clamp_db(20.0 * std::log10(mu / sigma));
      out.pixels[static_cast<std::size_t>(row * W + col)] = db;
    }
  return out;
}

struct RegionStats {
  double mean_db = 0.0;
  double std_db = 0.0;  // population std
  std::size_t pixels = 0;
};

/// Mean and population std of an SNR map over the masked pixels.
inline RegionStats region_stats(const Image& snr_map, const PixelMask& mask) {
  if (mask.height != snr_map.height || mask.width != snr_map.width)
    throw PreconditionError("region_snr: mask dimensions differ from image");
  RegionStats s;
  double sum = 0.0;
  for (std::size_t p = 0; p < snr_map.pixels.size(); ++p)
    if (mask.test(p)) {
      sum += snr_map.pixels[p];
      ++s.pixels;
    }
  if (s.pixels == 0) throw PreconditionError("region_snr: empty mask");
  s.mean_db = sum / static_cast<double>(s.pixels);
  double ss = 0.0;
  for (std::size_t p = 0; p < snr_map.pixels.size(); ++p)
    if (mask.test(p)) ss += (snr_map.pixels[p] - s.mean_db) * (snr_map.pixels[p] - s.mean_db);
  s.std_db = std::sqrt(ss / static_cast<double>(s.pixels));
  return s;
}

inline RegionStats region_snr(const Image& img, const PixelMask& mask, std::size_t radius = 5) {
  if (mask.height != img.height || mask.width != img.width)
    throw PreconditionError("region_snr: mask dimensions differ from image");
  if (mask.empty()) throw PreconditionError("region_snr: empty mask");
  return region_stats(local_snr_map(img, radius), mask);
}

template <class A, class B>
double mse(std::span<const A> a, std::span<const B> b) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("mse: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

/// 20 log10(max(reference) / RMSE); identical inputs give +99 dB.
template <class A, class B>
double psnr(std::span<const A> test, std::span<const B> reference) {
  const double err = mse(test, reference);
  const double peak = static_cast<double>(*std::max_element(reference.begin(), reference.end()));
  if (!(peak > 0.0)) throw DegenerateInputError("psnr: reference maximum must be > 0");
  if (err == 0.0) return kDbCap;
  return clamp_db(20.0 * std::log10(peak) - 10.0 * std::log10(err));
}

struct CubeComparison {
  std::vector<double> per_pixel;  // dB for PSNR, raw value for MSE
  double mean = 0.0;
  double std = 0.0;  // population std
};

namespace detail {
inline CubeComparison summarize(std::vector<double> values) {
  CubeComparison c{std::move(values)};
  for (double v : c.per_pixel) c.mean += v;
  c.mean /= static_cast<double>(c.per_pixel.size());
  for (double v : c.per_pixel) c.std += (v - c.mean) * (v - c.mean);
  c.std = std::sqrt(c.std / static_cast<double>(c.per_pixel.size()));
  return c;
}
}  // namespace detail

/// Per-pixel spectral PSNR of `test` against `reference`.
inline CubeComparison spectral_psnr(const HyperCube& test, const HyperCube& reference) {
  if (!test.same_shape(reference)) throw ShapeError("psnr: cube dimensions differ");
  std::vector<double> v(test.pixels());
  for (std::size_t p = 0; p < test.pixels(); ++p) v[p] = psnr(test.spectrum(p), reference.spectrum(p));
  return detail::summarize(std::move(v));
}

inline CubeComparison spectral_mse(const HyperCube& test, const HyperCube& reference) {
  if (!test.same_shape(reference)) throw ShapeError("mse: cube dimensions differ");
  std::vector<double> v(test.pixels());
  for (std::size_t p = 0; p < test.pixels(); ++p) v[p] = mse(test.spectrum(p), reference.spectrum(p));
  return detail::summarize(std::move(v));
}

enum class EdgePolicy {
  shrink,  // average over the in-bounds part of the window
  wrap,    // periodic extension
};

/// Centered boxcar: the window for sample i covers [i - kernel/2, i - kernel/2 + kernel - 1].
template <class T>
std::vector<T> moving_average(std::span<const T> x, std::size_t kernel = 10, EdgePolicy edges = EdgePolicy::shrink) {
  if (kernel < 1) throw PreconditionError("moving_average: kernel must be >= 1");
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto half = static_cast<std::ptrdiff_t>(kernel / 2);
  std::vector<T> y(x.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::ptrdiff_t j = i - half; j < i - half + static_cast<std::ptrdiff_t>(kernel); ++j) {
      if (edges == EdgePolicy::wrap) {
        sum += static_cast<double>(x[static_cast<std::size_t>(((j % n) + n) % n)]);
        ++count;
      } else if (j >= 0 && j < n) {
        sum += static_cast<double>(x[static_cast<std::size_t>(j)]);
        ++count;
      }
    }
    y[static_cast<std::size_t>(i)] = static_cast<T>(sum / static_cast<double>(count));
  }
  return y;
}

inline HyperCube moving_average_cube(const HyperCube& cube, std::size_t kernel = 10) {
  HyperCube out = cube;
  for (std::size_t p = 0; p < cube.pixels(); ++p) {
    const auto y = moving_average(cube.spectrum(p), kernel);
    std::copy(y.begin(), y.end(), out.spectrum(p).begin());
  }
  return out;
}

struct ProfilePoint {
  std::size_t column = 0;
  double value = 0.0;
};

/// Pixel values along row `row`, columns col_start..col_end inclusive.
inline std::vector<ProfilePoint> line_profile(const Image& img, std::size_t row, std::size_t col_start,
                                              std::size_t col_end) {
  if (row >= img.height || col_start > col_end || col_end >= img.width)
    throw PreconditionError("line_profile: indices out of range");
  std::vector<ProfilePoint> out;
  for (std::size_t c = col_start; c <= col_end; ++c) out.push_back({c, img(row, c)});
  return out;
}

} // namespace uhred
