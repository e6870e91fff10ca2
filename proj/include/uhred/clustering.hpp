#pragma once

// Latent-space k-means (k-means++ seeding, Lloyd iterations), elbow selection
// of k, and cube segmentation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uhred/cube.hpp"
#include "uhred/error.hpp"
#include "uhred/model.hpp"
#include "uhred/random.hpp"
#include "uhred/training.hpp"

namespace uhred {

/// Row-major [rows x cols] matrix of latent vectors, one row per pixel.
struct LatentMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  LatentMatrix() = default;
  LatentMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

struct KMeansResult {
  std::size_t k = 0;
  std::vector<int> labels;
  LatentMatrix centroids;
  double inertia = 0.0;
  std::vector<double> inertia_history;  // after each assignment step, then the final value
  std::size_t iterations = 0;
};

struct KMeansOptions {
  std::size_t max_iter = 300;
  double tol = 1e-6;
};

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// Diagonal of the bounding box: the scale for the convergence tolerance.
inline double data_extent(const LatentMatrix& X) {
  double s = 0.0;
  for (std::size_t c = 0; c < X.cols; ++c) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t r = 0; r < X.rows; ++r) {
      lo = std::min(lo, X.data[r * X.cols + c]);
      hi = std::max(hi, X.data[r * X.cols + c]);
    }
    s += (hi - lo) * (hi - lo);
  }
  return std::sqrt(s);
}

inline void check_finite(const LatentMatrix& X) {
  if (X.data.size() != X.rows * X.cols) throw ShapeError("kmeans: matrix storage mismatch");
  for (double v : X.data)
    if (!std::isfinite(v)) throw NumericError("kmeans: non-finite latent value");
}

inline LatentMatrix kmeanspp_init(const LatentMatrix& X, std::size_t k, Rng& rng) {
  LatentMatrix C(k, X.cols);
  const std::size_t first = rng.index(X.rows);
  std::copy_n(X.row(first).begin(), X.cols, C.row(0).begin());
  std::vector<double> d2(X.rows);
  for (std::size_t i = 0; i < X.rows; ++i) d2[i] = sq_dist(X.row(i), C.row(0));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double run = 0.0;
      pick = X.rows - 1;
      for (std::size_t i = 0; i < X.rows; ++i) {
        run += d2[i];
        if (run > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.index(X.rows);
    }
    std::copy_n(X.row(pick).begin(), X.cols, C.row(c).begin());
    for (std::size_t i = 0; i < X.rows; ++i) d2[i] = std::min(d2[i], sq_dist(X.row(i), C.row(c)));
  }
  return C;
}

/// Nearest centroid; ties go to the lowest index.
inline int nearest(std::span<const double> x, const LatentMatrix& C, double* dist) {
  int best = 0;
  double bd = sq_dist(x, C.row(0));
  for (std::size_t c = 1; c < C.rows; ++c) {
    const double d = sq_dist(x, C.row(c));
    if (d < bd) {
      bd = d;
      best = static_cast<int>(c);
    }
  }
  if (dist) *dist = bd;
  return best;
}

inline double inertia_of(const LatentMatrix& X, const std::vector<int>& labels, const LatentMatrix& C) {
  double s = 0.0;
  for (std::size_t i = 0; i < X.rows; ++i) s += sq_dist(X.row(i), C.row(static_cast<std::size_t>(labels[i])));
  return s;
}

/// Single-point transfers after Lloyd has settled: move a point to another
/// cluster whenever that lowers the total within-cluster sum of squares,
/// updating both means exactly. Returns true if any point moved.
inline bool transfer_refine(const LatentMatrix& X, std::vector<int>& labels, LatentMatrix& C,
                            std::vector<std::size_t>& counts) {
  const std::size_t k = C.rows;
  if (k < 2) return false;
  bool any = false;
  for (std::size_t pass = 0; pass < 100; ++pass) {
    bool moved = false;
    for (std::size_t i = 0; i < X.rows; ++i) {
      const auto a = static_cast<std::size_t>(labels[i]);
      if (counts[a] < 2) continue;
      const auto x = X.row(i);
      const double na = static_cast<double>(counts[a]);
      const double loss = na / (na - 1.0) * sq_dist(x, C.row(a));
      std::size_t best = a;
      double best_gain = 1e-12 * (loss + 1e-300);
      for (std::size_t b = 0; b < k; ++b) {
        if (b == a) continue;
        const double nb = static_cast<double>(counts[b]);
        const double gain = loss - nb / (nb + 1.0) * sq_dist(x, C.row(b));
        if (gain > best_gain) {
          best_gain = gain;
          best = b;
        }
      }
      if (best == a) continue;
      auto ca = C.row(a);
      auto cb = C.row(best);
      const double nb = static_cast<double>(counts[best]);
      for (std::size_t d = 0; d < X.cols; ++d) {
        ca[d] = (ca[d] * na - x[d]) / (na - 1.0);
        cb[d] = (cb[d] * nb + x[d]) / (nb + 1.0);
      }
      --counts[a];
      ++counts[best];
      labels[i] = static_cast<int>(best);
      moved = any = true;
    }
    if (!moved) break;
  }
  if (any) {
    // Recompute the means from scratch so they carry no incremental rounding.
    LatentMatrix fresh(k, X.cols);
    for (std::size_t i = 0; i < X.rows; ++i) {
      auto dst = fresh.row(static_cast<std::size_t>(labels[i]));
      for (std::size_t d = 0; d < X.cols; ++d) dst[d] += X.row(i)[d];
    }
    for (std::size_t c = 0; c < k; ++c)
      for (auto& v : fresh.row(c)) v /= static_cast<double>(counts[c]);
    C = std::move(fresh);
  }
  return any;
}

} // namespace detail

/// Single seeded k-means run. Every cluster in the result holds at least one point.
inline KMeansResult kmeans(const LatentMatrix& X, std::size_t k, std::uint64_t seed, const KMeansOptions& opt = {}) {
  if (X.rows == 0 || X.cols == 0) throw PreconditionError("kmeans: empty matrix");
  if (k < 1 || k > X.rows) throw PreconditionError("kmeans: need 1 <= k <= number of points");
  detail::check_finite(X);

  Rng rng(seed);
  KMeansResult r;
  r.k = k;
  r.centroids = detail::kmeanspp_init(X, k, rng);
  r.labels.assign(X.rows, 0);
  const double threshold = opt.tol * detail::data_extent(X);
  std::vector<double> dist(X.rows);
  std::vector<std::size_t> counts(k);

  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < X.rows; ++i) {
      r.labels[i] = detail::nearest(X.row(i), r.centroids, &dist[i]);
      ++counts[static_cast<std::size_t>(r.labels[i])];
    }
    // Empty cluster: take over the point farthest from its own centroid.
    std::vector<bool> moved(X.rows, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = X.rows;
      for (std::size_t i = 0; i < X.rows; ++i) {
        if (moved[i] || counts[static_cast<std::size_t>(r.labels[i])] < 2) continue;
        if (far == X.rows || dist[i] > dist[far]) far = i;
      }
      if (far == X.rows) break;
      --counts[static_cast<std::size_t>(r.labels[far])];
      r.labels[far] = static_cast<int>(c);
      counts[c] = 1;
      moved[far] = true;
      dist[far] = 0.0;
      std::copy_n(X.row(far).begin(), X.cols, r.centroids.row(c).begin());
    }
    r.inertia_history.push_back(detail::inertia_of(X, r.labels, r.centroids));

    LatentMatrix next(k, X.cols);
    for (std::size_t i = 0; i < X.rows; ++i) {
      auto dst = next.row(static_cast<std::size_t>(r.labels[i]));
      const auto src = X.row(i);
      for (std::size_t d = 0; d < X.cols; ++d) dst[d] += src[d];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      auto row = next.row(c);
      for (auto& v : row) v /= static_cast<double>(counts[c]);
      shift = std::max(shift, std::sqrt(detail::sq_dist(row, r.centroids.row(c))));
    }
    r.centroids = std::move(next);
    r.iterations = it + 1;
    if (shift <= threshold) break;
  }
  if (detail::transfer_refine(X, r.labels, r.centroids, counts))
    r.inertia_history.push_back(detail::inertia_of(X, r.labels, r.centroids));
  r.inertia = detail::inertia_of(X, r.labels, r.centroids);
  r.inertia_history.push_back(r.inertia);
  return r;
}

inline constexpr std::size_t kRestarts = 3;

/// Lowest-inertia result of `restarts` seeded runs.
inline KMeansResult kmeans_best_of(const LatentMatrix& X, std::size_t k, std::uint64_t seed,
                                   std::size_t restarts = kRestarts, const KMeansOptions& opt = {}) {
  std::optional<KMeansResult> best;
  for (std::size_t r = 0; r < restarts; ++r) {
    auto run = kmeans(X, k, Rng::derive(seed, 100 * k + r), opt);
    if (!best || run.inertia < best->inertia) best = std::move(run);
  }
  return std::move(*best);
}

struct ElbowResult {
  std::size_t k = 0;
  std::vector<double> inertia;  // W(1..k_max), index 0 holds W(1)
  std::vector<KMeansResult> runs;
};

/// k* maximizes W(k-1) - 2 W(k) + W(k+1) over 2 <= k <= k_max - 1; ties pick the smallest k.
inline std::size_t elbow_from_curve(std::span<const double> W) {
  if (W.size() < 3) throw PreconditionError("elbow: need at least three inertia values");
  std::size_t best_k = 2;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 2; k + 1 <= W.size(); ++k) {
    const double second = W[k - 2] - 2.0 * W[k - 1] + W[k];
    if (second > best) {
      best = second;
      best_k = k;
    }
  }
  return best_k;
}

inline ElbowResult elbow_select_k(const LatentMatrix& X, std::size_t k_max, std::uint64_t seed,
                                  const KMeansOptions& opt = {}) {
  if (k_max < 3) throw PreconditionError("elbow: k_max must be >= 3");
  if (k_max > X.rows) throw PreconditionError("elbow: k_max exceeds number of points");
  ElbowResult e;
  for (std::size_t k = 1; k <= k_max; ++k) {
    e.runs.push_back(kmeans_best_of(X, k, seed, kRestarts, opt));
    e.inertia.push_back(e.runs.back().inertia);
  }
  if (!(e.inertia.front() > 0.0)) throw DegenerateInputError("elbow: latent vectors have zero variance");
  e.k = elbow_from_curve(e.inertia);
  return e;
}

struct SegmentationResult {
  std::size_t k = 0;
  LabelMap labels;
  LatentMatrix centroids;
  double inertia = 0.0;
  std::vector<double> inertia_curve;          // filled when k was chosen automatically
  std::vector<std::vector<double>> cluster_mean_spectra;  // k x n_i, from the denoised cube
};

inline LatentMatrix encode_cube(const ModelParams<float>& params, const ModelConfig& cfg, const ModelMeta& meta,
                                const HyperCube& cube, std::size_t threads = 1) {
  cube.validate();
  check_params(params, cfg);
  if (cube.bands != cfg.n_i) throw ShapeError("encode: cube bands differ from model n_i");
  const auto pd = cast_params<double>(params);
  LatentMatrix X(cube.pixels(), cfg.n_l);
  detail::parallel_pixels(cube.pixels(), threads, [&](std::size_t p) {
    const auto x = detail::scaled_spectrum(cube, p, meta.input_scale);
    const auto z = encode<double>(pd, cfg, x);
    std::copy(z.begin(), z.end(), X.row(p).begin());
  });
  return X;
}

/// Encode, cluster (k = 0 selects k by the elbow rule up to k_max) and average
/// the denoised spectra per cluster.
inline SegmentationResult segment_cube(const ModelParams<float>& params, const ModelConfig& cfg, const ModelMeta& meta,
                                       const HyperCube& cube, std::size_t k, std::uint64_t seed,
                                       std::size_t k_max = 8, std::size_t threads = 1) {
  const auto X = encode_cube(params, cfg, meta, cube, threads);
  if (!(detail::data_extent(X) > 0.0)) throw DegenerateInputError("segment: latent vectors have zero variance");
  KMeansResult km;
  SegmentationResult s;
  if (k == 0) {
    auto e = elbow_select_k(X, std::min(k_max, X.rows), seed);
    km = std::move(e.runs[e.k - 1]);
    s.inertia_curve = std::move(e.inertia);
  } else {
    km = kmeans_best_of(X, k, seed);
  }
  s.k = km.k;
  s.labels = LabelMap(cube.height, cube.width);
  s.labels.labels = km.labels;
  s.centroids = std::move(km.centroids);
  s.inertia = km.inertia;

  const auto denoised = denoise_cube(params, cfg, meta, cube, threads);
  s.cluster_mean_spectra.assign(s.k, std::vector<double>(cube.bands, 0.0));
  std::vector<std::size_t> counts(s.k, 0);
  for (std::size_t p = 0; p < cube.pixels(); ++p) {
    const auto c = static_cast<std::size_t>(s.labels.labels[p]);
    ++counts[c];
    const auto spec = denoised.spectrum(p);
    for (std::size_t b = 0; b < cube.bands; ++b) s.cluster_mean_spectra[c][b] += spec[b];
  }
  for (std::size_t c = 0; c < s.k; ++c)
    for (auto& v : s.cluster_mean_spectra[c]) v /= static_cast<double>(counts[c]);
  return s;
}

/// Fraction of pixels whose label matches the reference under the best
/// relabeling of `predicted` (exhaustive over permutations, k <= 8).
inline double best_permutation_accuracy(const std::vector<int>& predicted, const std::vector<int>& reference) {
  if (predicted.size() != reference.size() || predicted.empty()) throw ShapeError("accuracy: label count mismatch");
  const int kp = *std::max_element(predicted.begin(), predicted.end()) + 1;
  const int kr = *std::max_element(reference.begin(), reference.end()) + 1;
  const int n = std::max(kp, kr);
  if (n > 8) throw PreconditionError("accuracy: at most 8 labels");
  std::vector<std::size_t> confusion(static_cast<std::size_t>(n * n), 0);
  for (std::size_t i = 0; i < predicted.size(); ++i) ++confusion[static_cast<std::size_t>(predicted[i] * n + reference[i])];
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (int i = 0; i < n; ++i) hits += confusion[static_cast<std::size_t>(i * n + perm[static_cast<std::size_t>(i)])];
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(predicted.size());
}

} // namespace uhred
