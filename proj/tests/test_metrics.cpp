#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"
#include "uhred/metrics.hpp"
#include "uhred/phantom.hpp"

using namespace uhred;

namespace {

// Direct per-pixel evaluation written without sharing code with local_snr_map.
double brute_snr(const Image& img, std::size_t row, std::size_t col, int radius) {
  std::vector<double> vals;
  for (int r = 0; r < static_cast<int>(img.height); ++r)
    for (int c = 0; c < static_cast<int>(img.width); ++c) {
      const int dr = r - static_cast<int>(row), dc = c - static_cast<int>(col);
      if (dr * dr + dc * dc <= radius * radius) vals.push_back(img(r, c));
    }
  double mu = 0.0;
  for (double v : vals) mu += v;
  mu /= vals.size();
  double ss = 0.0;
  for (double v : vals) ss += (v - mu) * (v - mu);
  const double sd = std::sqrt(ss / (vals.size() - 1));
  if (mu <= 0) return -99.0;
  if (sd == 0) return 99.0;
  return std::clamp(20.0 * std::log10(mu / sd), -99.0, 99.0);
}

double psnr_d(const std::vector<double>& a, const std::vector<double>& b) {
  return psnr(std::span<const double>(a), std::span<const double>(b));
}

double mse_d(const std::vector<double>& a, const std::vector<double>& b) {
  return mse(std::span<const double>(a), std::span<const double>(b));
}

} // namespace

TEST(LocalSnr, ConstantImageIsCapped) {
  const auto m = local_snr_map(Image(10, 12, 0.7));
  for (double v : m.pixels) EXPECT_EQ(v, 99.0);
  const auto neg = local_snr_map(Image(4, 4, -0.7));
  for (double v : neg.pixels) EXPECT_EQ(v, -99.0);
}

TEST(LocalSnr, TenToOneIsTwentyDb) {
  // Radius-1 disk on a 1x2 image sees both pixels: mean 10, sample std 1.
  Image img(1, 2);
  img.pixels = {10.0 - 1.0 / std::sqrt(2.0), 10.0 + 1.0 / std::sqrt(2.0)};
  const auto m = local_snr_map(img, 1);
  EXPECT_NEAR(m(0, 0), 20.0, 1e-12);
  EXPECT_NEAR(m(0, 1), 20.0, 1e-12);
}

TEST(LocalSnr, MatchesBruteForce) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> d(1.0, 0.2);
  Image img(17, 13);
  for (auto& v : img.pixels) v = d(gen);
  for (int radius : {1, 2, 5}) {
    const auto m = local_snr_map(img, static_cast<std::size_t>(radius));
    for (std::size_t r = 0; r < img.height; ++r)
      for (std::size_t c = 0; c < img.width; ++c) ASSERT_NEAR(m(r, c), brute_snr(img, r, c, radius), 1e-9);
  }
  EXPECT_THROW(local_snr_map(img, 0), PreconditionError);
}

TEST(RegionSnr, Examples) {
  Image map(1, 3);
  map.pixels = {10.0, 20.0, 55.0};
  PixelMask one(1, 3);
  one.set(2);
  auto s = region_stats(map, one);
  EXPECT_EQ(s.mean_db, 55.0);
  EXPECT_EQ(s.std_db, 0.0);
  PixelMask two(1, 3);
  two.set(0);
  two.set(1);
  s = region_stats(map, two);
  EXPECT_DOUBLE_EQ(s.mean_db, 15.0);
  EXPECT_DOUBLE_EQ(s.std_db, 5.0);
  EXPECT_THROW(region_snr(map, PixelMask(1, 3)), PreconditionError);
  EXPECT_THROW(region_snr(map, PixelMask(3, 1)), PreconditionError);
}

TEST(RegionSnr, PeakPhaseBeatsBackgroundOnPhantom) {
  const auto ph = make_noisy_phantom(default_phantom_spec(2));
  const auto img = band_image(ph.noisy, 46);
  const auto peak = region_snr(img, ph.clean.phase_map.mask_of(1));
  const auto bg = region_snr(img, ph.clean.phase_map.mask_of(0));
  EXPECT_GT(peak.mean_db, bg.mean_db);
}

TEST(Psnr, Examples) {
  const std::vector<double> ref{0.2, 1.0, 0.5, 0.3};
  EXPECT_EQ(psnr_d(ref, ref), 99.0);
  std::vector<double> off = ref;
  for (auto& v : off) v += 0.1;
  EXPECT_NEAR(psnr_d(off, ref), 20.0, 1e-12);
  EXPECT_THROW(psnr_d(off, std::vector<double>{1.0}), ShapeError);
  const std::vector<double> zero(4, 0.0);
  EXPECT_THROW(psnr_d(off, zero), DegenerateInputError);
}

TEST(Mse, ExamplesAndPsnrIdentity) {
  const std::vector<double> a{1, 2, 3};
  EXPECT_EQ(mse_d(a, a), 0.0);
  for (std::size_t n : {1u, 7u, 100u}) {
    std::vector<double> x(n, 0.5), y(n, 0.6);
    EXPECT_NEAR(mse_d(x, y), 0.01, 1e-15);
  }
  std::mt19937_64 gen(2);
  for (int t = 0; t < 20; ++t) {
    const auto ref = test::random_vector(50, gen, 0.1, 2.0);
    const auto x = test::random_vector(50, gen, 0.1, 2.0);
    const double peak = *std::max_element(ref.begin(), ref.end());
    const double rmse = std::sqrt(mse_d(x, ref));
    EXPECT_NEAR(psnr_d(x, ref), 20.0 * std::log10(peak / rmse), 1e-10);
  }
}

TEST(SpectralPsnr, IdenticalCubesAreCapped) {
  const auto gt = render_phantom(default_phantom_spec()).ground_truth;
  const auto c = spectral_psnr(gt, gt);
  for (double v : c.per_pixel) EXPECT_EQ(v, 99.0);
  EXPECT_EQ(c.mean, 99.0);
  EXPECT_EQ(c.std, 0.0);
  HyperCube other(gt.height, gt.width, gt.bands + 1);
  EXPECT_THROW(spectral_psnr(gt, other), ShapeError);
  EXPECT_EQ(spectral_mse(gt, gt).mean, 0.0);
}

TEST(MovingAverage, Examples) {
  const std::vector<double> flat(30, 0.4);
  for (double v : moving_average<double>(flat, 10)) EXPECT_NEAR(v, 0.4, 1e-15);
  std::vector<double> impulse(40, 0.0);
  impulse[20] = 1.0;
  const auto y = moving_average<double>(impulse, 10);
  ASSERT_EQ(y.size(), 40u);
  // Window [i-5, i+4] contains sample 20 for i in 16..25.
  for (std::size_t i = 0; i < 40; ++i) EXPECT_NEAR(y[i], (i >= 16 && i <= 25) ? 0.1 : 0.0, 1e-15) << i;
  const std::vector<double> ramp{1, 2, 3};
  EXPECT_EQ(moving_average<double>(ramp, 1), ramp);
  EXPECT_THROW(moving_average<double>(ramp, 0), PreconditionError);
}

TEST(MovingAverage, ShrinkEdgesAverageInBounds) {
  const std::vector<double> x{1, 2, 3, 4, 5, 6};
  const auto y = moving_average<double>(x, 4);
  // i = 0 sees [-2, 1] -> {1, 2}.
  EXPECT_DOUBLE_EQ(y[0], 1.5);
  // i = 5 sees [3, 6] -> {4, 5, 6}.
  EXPECT_DOUBLE_EQ(y[5], 5.0);
}

TEST(MovingAverage, WrapPreservesMean) {
  std::mt19937_64 gen(7);
  for (std::size_t k : {1u, 3u, 10u, 17u}) {
    const auto x = test::random_vector(41, gen);
    const auto y = moving_average<double>(x, k, EdgePolicy::wrap);
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      mx += x[i];
      my += y[i];
    }
    EXPECT_NEAR(mx, my, 1e-12);
  }
}

TEST(MovingAverage, FlattensNarrowLorentzian) {
  std::vector<double> s(92);
  for (std::size_t b = 0; b < 92; ++b) s[b] = lorentzian(static_cast<double>(b), 46.0, 2.0, 1.0);
  const auto y = moving_average<double>(s, 10);
  const double peak = *std::max_element(y.begin(), y.end());
  EXPECT_LT(peak, 0.7);
  // Analytic window sum for the sample at the centre: sum over offsets -5..4 of 1 / (1 + (d/2)^2) / 10.
  double expect = 0.0;
  for (int d = -5; d <= 4; ++d) expect += 1.0 / (1.0 + d * d / 4.0);
  EXPECT_NEAR(y[46], expect / 10.0, 1e-12);
}

TEST(LineProfile, Lengths) {
  Image img(4, 9);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<double>(i);
  const auto full = line_profile(img, 2, 0, 8);
  ASSERT_EQ(full.size(), 9u);
  EXPECT_EQ(full[3].column, 3u);
  EXPECT_EQ(full[3].value, 21.0);
  EXPECT_EQ(line_profile(img, 0, 4, 4).size(), 1u);
  EXPECT_THROW(line_profile(img, 4, 0, 1), PreconditionError);
  EXPECT_THROW(line_profile(img, 0, 5, 4), PreconditionError);
  EXPECT_THROW(line_profile(img, 0, 0, 9), PreconditionError);
}

TEST(LineProfile, CrossesDropletPlateau) {
  auto spec = default_phantom_spec(4);
  spec.droplet_count = 1;
  const auto ph = render_phantom(spec);
  const auto img = band_image(ph.ground_truth, 46);
  const auto mask = ph.phase_map.mask_of(1);
  std::size_t row = 0;
  for (std::size_t p = 0; p < mask.bits.size(); ++p)
    if (mask.test(p)) {
      row = p / img.width;
      break;
    }
  row += spec.droplet_radius_min / 2;
  const auto prof = line_profile(img, row, 0, img.width - 1);
  double inside = 0.0, outside = 0.0;
  std::size_t n_out = 0;
  for (const auto& pt : prof) {
    if (ph.phase_map(row, pt.column) == 1)
      inside = std::max(inside, pt.value);
    else {
      outside += pt.value;
      ++n_out;
    }
  }
  EXPECT_GT(inside, 2.0 * outside / n_out);
}
