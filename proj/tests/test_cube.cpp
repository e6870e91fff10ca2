#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "test_util.hpp"
#include "uhred/cube.hpp"

using namespace uhred;

namespace {

HyperCube random_cube(std::size_t h, std::size_t w, std::size_t b, std::uint64_t seed) {
  HyperCube c(h, w, b);
  Rng rng(seed);
  for (auto& v : c.data) v = static_cast<float>(rng.uniform(-1.0, 2.0));
  return c;
}

} // namespace

TEST(CubeFormat, MinimalFileDecodes) {
  // "HSC1", H=1, W=1, B=1, no axis, 0.5f
  std::vector<std::uint8_t> bytes{'H', 'S', 'C', '1', 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0x00, 0x00, 0x00, 0x3f};
  const auto c = decode_cube(bytes);
  EXPECT_EQ(c.height, 1u);
  EXPECT_EQ(c.width, 1u);
  EXPECT_EQ(c.bands, 1u);
  EXPECT_FALSE(c.axis.has_value());
  ASSERT_EQ(c.data.size(), 1u);
  EXPECT_EQ(c.data[0], 0.5f);
}

TEST(CubeFormat, SingleValueCubeIs21Bytes) {
  HyperCube c(1, 1, 1, 0.5f);
  const auto bytes = encode_cube(c);
  EXPECT_EQ(bytes.size(), 21u);
  EXPECT_EQ(bytes[0], 'H');
  EXPECT_EQ(bytes[3], '1');
  EXPECT_EQ(bytes[16], 0);
}

TEST(CubeFormat, MissingFloatIsFormatError) {
  HyperCube c(1, 1, 92, 0.25f);
  auto bytes = encode_cube(c);
  bytes.resize(bytes.size() - 4);
  EXPECT_THROW(decode_cube(bytes), FormatError);
}

TEST(CubeFormat, TrailingBytesAreFormatError) {
  auto bytes = encode_cube(HyperCube(2, 2, 3, 1.0f));
  bytes.push_back(0);
  EXPECT_THROW(decode_cube(bytes), FormatError);
}

TEST(CubeFormat, BadMagicAndNonFinite) {
  auto bytes = encode_cube(HyperCube(1, 1, 2, 1.0f));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_cube(bad), FormatError);
  // NaN written directly into the payload.
  const std::uint32_t nan_bits = 0x7fc00000u;
  for (int i = 0; i < 4; ++i) bytes[bytes.size() - 4 + i] = static_cast<std::uint8_t>(nan_bits >> (8 * i));
  EXPECT_THROW(decode_cube(bytes), FormatError);
  EXPECT_THROW(decode_cube({'H', 'S', 'C'}), FormatError);
}

TEST(CubeFormat, AxisLengthMismatchRejectedOnSave) {
  HyperCube c(1, 1, 3, 0.0f);
  c.axis = std::vector<float>{1.0f, 2.0f};
  EXPECT_THROW(encode_cube(c), PreconditionError);
  c.axis = std::vector<float>{1.0f, 2.0f, 2.0f};
  EXPECT_THROW(encode_cube(c), PreconditionError);
}

TEST(CubeFormat, FileRoundTripIsByteIdentical) {
  auto c = random_cube(4, 4, 8, 7);
  c.axis = std::vector<float>{10, 9, 8, 7, 6, 5, 4, 3};
  test::TempDir dir;
  const auto path = dir.path() / "c.hsc";
  save_cube(c, path);
  const auto loaded = load_cube(path);
  EXPECT_EQ(loaded, c);
  EXPECT_EQ(detail::read_file(path), encode_cube(loaded));
}

TEST(CubeFormat, RoundTripProperty) {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const auto h = 1 + rng.index(5), w = 1 + rng.index(5), b = 1 + rng.index(12);
    auto c = random_cube(h, w, b, rng.next());
    if (rng.index(2)) {
      std::vector<float> axis(b);
      for (std::size_t i = 0; i < b; ++i) axis[i] = 100.0f + 0.5f * static_cast<float>(i);
      c.axis = axis;
    }
    const auto bytes = encode_cube(c);
    EXPECT_EQ(bytes.size(), 17 + 4 * ((c.axis ? b : 0) + h * w * b));
    EXPECT_EQ(encode_cube(decode_cube(bytes)), bytes);
  }
}

TEST(CubeFormat, MissingFileIsIoError) {
  EXPECT_THROW(load_cube("/nonexistent/dir/cube.hsc"), IoError);
}

TEST(Normalize, DividesByGlobalMax) {
  HyperCube c(1, 1, 3);
  c.data = {1, 2, 4};
  const auto n = normalize_max(c);
  EXPECT_EQ(n.data, (std::vector<float>{0.25f, 0.5f, 1.0f}));
  EXPECT_EQ(n.norm_factor, 4.0);
}

TEST(Normalize, AlreadyNormalizedIsUnchanged) {
  HyperCube c(1, 2, 2);
  c.data = {0.1f, 1.0f, 0.3f, 0.7f};
  const auto n = normalize_max(c);
  EXPECT_EQ(n.data, c.data);
  EXPECT_EQ(n.norm_factor, 1.0);
}

TEST(Normalize, AllZeroIsDegenerate) {
  EXPECT_THROW(normalize_max(HyperCube(2, 2, 2, 0.0f)), DegenerateInputError);
  EXPECT_THROW(normalize_max(HyperCube(2, 2, 2, -1.0f)), DegenerateInputError);
}

TEST(Normalize, IdempotentProperty) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto c = random_cube(3, 3, 1 + rng.index(10), rng.next());
    const auto once = normalize_max(c);
    const auto twice = normalize_max(once);
    EXPECT_EQ(twice.data, once.data);
    EXPECT_EQ(twice.norm_factor, once.norm_factor);
    EXPECT_EQ(*std::max_element(once.data.begin(), once.data.end()), 1.0f);
  }
}

TEST(Saturation, ThresholdAboveMaxGivesEmptyMask) {
  const auto c = random_cube(4, 4, 5, 3);
  EXPECT_TRUE(find_saturated(c, 2.5).empty());
}

TEST(Saturation, BoundaryIsInclusive) {
  HyperCube c(2, 2, 3, 0.1f);
  c.at(1, 0, 2) = 0.75f;
  const auto m = find_saturated(c, 0.75);
  EXPECT_EQ(m.count(), 1u);
  EXPECT_TRUE(m.test(2));
}

TEST(Saturation, FindsInjectedPixels) {
  auto c = random_cube(8, 8, 6, 11);
  for (auto& v : c.data) v = 0.5f * std::abs(v);
  const std::set<std::size_t> injected{3, 27, 60};
  for (auto p : injected) c.spectrum(p)[p % 6] = 5.0f;
  const auto m = find_saturated(c, 4.0);
  EXPECT_EQ(m.count(), injected.size());
  for (auto p : injected) EXPECT_TRUE(m.test(p));
}

TEST(Saturation, NonPositiveThresholdRejected) {
  EXPECT_THROW(find_saturated(HyperCube(1, 1, 1), 0.0), PreconditionError);
}

TEST(Repair, EmptyMaskLeavesCubeUnchanged) {
  const auto c = random_cube(5, 5, 4, 1);
  EXPECT_EQ(repair_saturated(c, PixelMask(5, 5), 42), c);
}

TEST(Repair, ConstantNeighborhoodIsRestored) {
  HyperCube c(9, 9, 3);
  const std::vector<float> s{0.2f, 0.4f, 0.6f};
  for (std::size_t p = 0; p < c.pixels(); ++p) std::copy(s.begin(), s.end(), c.spectrum(p).begin());
  c.at(4, 4, 1) = 100.0f;
  const auto mask = find_saturated(c, 50.0);
  const auto fixed = repair_saturated(c, mask, 3);
  for (std::size_t b = 0; b < 3; ++b) EXPECT_FLOAT_EQ(fixed.at(4, 4, b), s[b]);
}

TEST(Repair, DeterministicAndOnlyTouchesFlagged) {
  auto c = random_cube(10, 10, 5, 21);
  PixelMask mask(10, 10);
  for (std::size_t p : {0u, 15u, 44u, 45u, 99u}) mask.set(p);
  const auto a = repair_saturated(c, mask, 8);
  const auto b = repair_saturated(c, mask, 8);
  EXPECT_EQ(a, b);
  for (std::size_t p = 0; p < c.pixels(); ++p) {
    const auto orig = c.spectrum(p);
    const auto got = a.spectrum(p);
    if (!mask.test(p)) {
      EXPECT_TRUE(std::equal(orig.begin(), orig.end(), got.begin()));
    }
  }
}

TEST(Repair, ReplacementIsMeanOfNearbyUnflaggedDonors) {
  // Every donor spectrum is distinct; the repaired spectrum must be the mean of
  // exactly four of the unflagged pixels within Chebyshev radius 3.
  HyperCube c(7, 7, 1);
  for (std::size_t p = 0; p < c.pixels(); ++p) c.data[p] = static_cast<float>(1u << (p % 20));
  PixelMask mask(7, 7);
  mask.set(3 * 7 + 3);
  const auto fixed = repair_saturated(c, mask, 77);
  const double got = fixed.at(3, 3, 0) * 4.0;
  bool found = false;
  std::vector<double> donors;
  for (std::size_t p = 0; p < c.pixels(); ++p)
    if (p != 24) donors.push_back(c.data[p]);
  // Brute force over 4-subsets of the 48 neighbors.
  for (std::size_t a = 0; a < donors.size() && !found; ++a)
    for (std::size_t b = a + 1; b < donors.size() && !found; ++b)
      for (std::size_t d = b + 1; d < donors.size() && !found; ++d)
        for (std::size_t e = d + 1; e < donors.size() && !found; ++e)
          if (donors[a] + donors[b] + donors[d] + donors[e] == got) found = true;
  EXPECT_TRUE(found);
}

TEST(Repair, IsolatedPixelIsRepairError) {
  HyperCube c(3, 3, 2, 1.0f);
  PixelMask mask(3, 3);
  mask.bits.assign(9, true);
  EXPECT_THROW(repair_saturated(c, mask, 1), RepairError);
  EXPECT_THROW(repair_saturated(c, PixelMask(2, 3), 1), PreconditionError);
}

TEST(Repair, RepairedCubeHasNoSaturationWhenDonorsAreBelowThreshold) {
  auto c = random_cube(12, 12, 4, 4);
  for (auto& v : c.data) v = 0.3f * std::abs(v);
  for (std::size_t p : {5u, 70u, 130u}) c.spectrum(p)[0] = 9.0f;
  const auto mask = find_saturated(c, 1.0);
  ASSERT_EQ(mask.count(), 3u);
  EXPECT_TRUE(find_saturated(repair_saturated(c, mask, 2), 1.0).empty());
}

TEST(Split, EightyTwenty) {
  const auto s = split_train_val(10, 0.8, 1);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.val.size(), 2u);
}

TEST(Split, FullImagePopulation) {
  const auto s = split_train_val(65536, 0.8, 1);
  EXPECT_EQ(s.train.size(), 52428u);
  EXPECT_EQ(s.val.size(), 13108u);
}

TEST(Split, PermutationAndDeterminism) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.index(300);
    const double f = 0.5 + 0.4 * rng.uniform();
    const auto seed = rng.next();
    std::optional<SplitIndices> s;
    try {
      s = split_train_val(n, f, seed);
    } catch (const DegenerateInputError&) {
      continue;
    }
    const auto again = split_train_val(n, f, seed);
    EXPECT_EQ(s->train, again.train);
    EXPECT_EQ(s->val, again.val);
    std::vector<std::size_t> all = s->train;
    all.insert(all.end(), s->val.begin(), s->val.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(all[i], i);
    EXPECT_EQ(s->train.size(), static_cast<std::size_t>(std::floor(f * static_cast<double>(n))));
  }
}

TEST(Split, DegenerateFractions) {
  EXPECT_THROW(split_train_val(3, 0.2, 1), DegenerateInputError);
  EXPECT_THROW(split_train_val(1, 0.5, 1), PreconditionError);
  EXPECT_THROW(split_train_val(10, 1.0, 1), PreconditionError);
  EXPECT_THROW(split_train_val(10, 0.0, 1), PreconditionError);
}
