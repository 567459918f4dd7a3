#include <gtest/gtest.h>

#include <complex>
#include <cstdio>
#include <filesystem>

#include "fedhar/fft.hpp"
#include "fedhar/param_set.hpp"
#include "fedhar/rng.hpp"
#include "fedhar/tensor.hpp"

using namespace fedhar;

TEST(Rng, DeterministicStreams) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.next_u64(), b.next_u64());
  }
  Rng c(42), d(43);
  EXPECT_NE(c.next_u64(), d.next_u64());
}

TEST(Rng, UniformRangeAndMean) {
  Rng rng(7);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 20000.0, 0.5, 0.01);
}

TEST(Rng, NormalMoments) {
  Rng rng(11);
  double sum = 0.0, sum_sq = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum_sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.02);
  EXPECT_NEAR(sum_sq / n, 1.0, 0.03);
}

TEST(Rng, BelowIsUnbiasedEnough) {
  Rng rng(3);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) counts[static_cast<std::size_t>(rng.below(5))]++;
  for (int c : counts) EXPECT_NEAR(c / 50000.0, 0.2, 0.01);
}

TEST(Rng, DeriveSeedSeparatesStreams) {
  const auto a = derive_seed(1, "data", 0, 0);
  const auto b = derive_seed(1, "data", 1, 0);
  const auto c = derive_seed(1, "split", 0, 0);
  const auto d = derive_seed(2, "data", 0, 0);
  EXPECT_NE(a, b);
  EXPECT_NE(a, c);
  EXPECT_NE(a, d);
  EXPECT_EQ(a, derive_seed(1, "data", 0, 0));
}

TEST(Tensor, ShapeAndIndexing) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  t.at(1, 2, 3) = 5.0;
  EXPECT_DOUBLE_EQ(t[23], 5.0);
  t.reshape({6, 4});
  EXPECT_DOUBLE_EQ(t.at(5, 3), 5.0);
  EXPECT_THROW(t.reshape({7, 4}), std::invalid_argument);
}

TEST(Tensor, ArithmeticAndFiniteCheck) {
  Tensor a({2, 2}, std::vector<double>{1, 2, 3, 4});
  Tensor b({2, 2}, std::vector<double>{4, 3, 2, 1});
  a.add_(b);
  EXPECT_DOUBLE_EQ(a[0], 5.0);
  a.axpy_(2.0, b);
  EXPECT_DOUBLE_EQ(a[3], 7.0);
  a[0] = std::nan("");
  EXPECT_THROW(a.check_finite("test"), std::runtime_error);
}

TEST(Tensor, MatmulHelpers) {
  // A (2x3) * B (3x2)
  const double a[6] = {1, 2, 3, 4, 5, 6};
  const double b[6] = {7, 8, 9, 10, 11, 12};
  double c[4] = {0, 0, 0, 0};
  matmul_acc(a, b, c, 2, 3, 2);
  EXPECT_DOUBLE_EQ(c[0], 58.0);
  EXPECT_DOUBLE_EQ(c[1], 64.0);
  EXPECT_DOUBLE_EQ(c[2], 139.0);
  EXPECT_DOUBLE_EQ(c[3], 154.0);

  // A (2x3) * B^T with B (2x3) -> (2x2)
  double d[4] = {0, 0, 0, 0};
  const double bt[6] = {7, 9, 11, 8, 10, 12};
  matmul_bt_acc(a, bt, d, 2, 3, 2);
  EXPECT_DOUBLE_EQ(d[0], 58.0);
  EXPECT_DOUBLE_EQ(d[1], 64.0);
  EXPECT_DOUBLE_EQ(d[2], 139.0);
  EXPECT_DOUBLE_EQ(d[3], 154.0);
}

// --- DFT against a direct O(n^2) oracle -------------------------------------

static std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * M_PI * static_cast<double>(k * t) / static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

TEST(Fft, MatchesNaiveDftForManyLengths) {
  Rng rng(5);
  for (std::size_t n : {2u, 3u, 5u, 8u, 15u, 16u, 30u, 31u, 64u, 100u, 150u}) {
    std::vector<double> x(n);
    for (double& v : x) v = rng.normal();
    auto fast = dft(x);
    auto slow = naive_dft(x);
    double scale = 1.0;
    for (double v : x) scale = std::max(scale, std::abs(v));
    for (std::size_t k = 0; k < n; ++k) {
      EXPECT_NEAR(fast[k].real(), slow[k].real(), 1e-9 * scale * static_cast<double>(n));
      EXPECT_NEAR(fast[k].imag(), slow[k].imag(), 1e-9 * scale * static_cast<double>(n));
    }
  }
}

TEST(Fft, ConstantBlockIsDcOnly) {
  std::vector<double> block(30, 2.5);
  Spectrum s = fft_features(block, 25.0);
  ASSERT_EQ(s.magnitude.size(), 16u);
  EXPECT_NEAR(s.magnitude[0], 30.0 * 2.5, 1e-9);
  for (std::size_t j = 1; j < s.magnitude.size(); ++j) EXPECT_NEAR(s.magnitude[j], 0.0, 1e-9);
  EXPECT_DOUBLE_EQ(s.frequency[0], 0.0);
  EXPECT_NEAR(s.frequency[1], 25.0 / 30.0, 1e-12);
}

TEST(Fft, PureCosinePeaksAtItsBin) {
  const std::size_t n = 30;
  std::vector<double> block(n);
  for (std::size_t t = 0; t < n; ++t)
    block[t] = std::cos(2.0 * M_PI * 3.0 * static_cast<double>(t) / static_cast<double>(n));
  Spectrum s = fft_features(block, 25.0);
  std::size_t peak = 0;
  for (std::size_t j = 1; j < s.magnitude.size(); ++j)
    if (s.magnitude[j] > s.magnitude[peak]) peak = j;
  EXPECT_EQ(peak, 3u);
  EXPECT_NEAR(s.magnitude[3], static_cast<double>(n) / 2.0, 1e-9);
}

TEST(Fft, AllZeroBlock) {
  std::vector<double> block(30, 0.0);
  Spectrum s = fft_features(block, 25.0);
  for (double m : s.magnitude) EXPECT_NEAR(m, 0.0, 1e-12);
}

TEST(Fft, RejectsTooShortBlocks) {
  std::vector<double> block(1, 1.0);
  EXPECT_THROW(fft_features(block, 25.0), std::invalid_argument);
}

TEST(Fft, ParsevalOneSided) {
  Rng rng(9);
  std::vector<double> x(30);
  for (double& v : x) v = rng.normal();
  Spectrum s = fft_features(x, 25.0);
  double freq_energy = s.magnitude[0] * s.magnitude[0];
  for (std::size_t j = 1; j + 1 < s.magnitude.size(); ++j)
    freq_energy += 2.0 * s.magnitude[j] * s.magnitude[j];
  // even length: the Nyquist bin is not mirrored
  freq_energy += s.magnitude.back() * s.magnitude.back();
  double time_energy = 0.0;
  for (double v : x) time_energy += v * v;
  EXPECT_NEAR(freq_energy, 30.0 * time_energy, 1e-6 * freq_energy);
}

// --- ParamSet ----------------------------------------------------------------

static ParamSet demo_params() {
  ParamSet p;
  p.insert("layer.w", Tensor({2, 2}, std::vector<double>{1, 2, 3, 4}));
  p.insert("layer.b", Tensor({2}, std::vector<double>{-1, 1}));
  return p;
}

TEST(ParamSet, InsertionOrderAndLookup) {
  ParamSet p = demo_params();
  EXPECT_EQ(p.item(0).first, "layer.w");
  EXPECT_EQ(p.item(1).first, "layer.b");
  EXPECT_THROW(p.insert("layer.w", Tensor({1})), std::invalid_argument);
  EXPECT_THROW(p.at("missing"), std::invalid_argument);
}

TEST(ParamSet, CongruenceRules) {
  ParamSet a = demo_params();
  ParamSet b = demo_params();
  EXPECT_TRUE(a.congruent_with(b));
  ParamSet c;
  c.insert("layer.w", Tensor({2, 2}));
  EXPECT_FALSE(a.congruent_with(c));
  ParamSet d;
  d.insert("layer.w", Tensor({4}));
  d.insert("layer.b", Tensor({2}));
  EXPECT_FALSE(a.congruent_with(d));
  EXPECT_THROW(a.add_(c), std::invalid_argument);
}

TEST(ParamSet, MeanOfIdenticalSetsIsExact) {
  ParamSet a = demo_params();
  std::vector<ParamSet> sets{a, a, a};
  ParamSet m = ParamSet::mean(sets);
  EXPECT_TRUE(m.bitwise_equal(a));
}

TEST(ParamSet, MeanIsPermutationInvariantExactly) {
  Rng rng(13);
  std::vector<ParamSet> sets;
  for (int i = 0; i < 5; ++i) {
    ParamSet p = demo_params();
    for (auto& [_, t] : p)
      for (double& v : t.flat()) v = rng.normal() * std::pow(10.0, rng.uniform(-3, 3));
    sets.push_back(std::move(p));
  }
  ParamSet m1 = ParamSet::mean(sets);
  std::reverse(sets.begin(), sets.end());
  ParamSet m2 = ParamSet::mean(sets);
  std::swap(sets[0], sets[2]);
  ParamSet m3 = ParamSet::mean(sets);
  EXPECT_TRUE(m1.bitwise_equal(m2));
  EXPECT_TRUE(m1.bitwise_equal(m3));
}

TEST(ParamSet, SerializationRoundTripIsLossless) {
  Rng rng(17);
  ParamSet p;
  p.insert("a.w", Tensor({3, 5}));
  p.insert("a.b", Tensor({5}));
  p.insert("z", Tensor({2, 2, 2}));
  for (auto& [_, t] : p)
    for (double& v : t.flat()) v = rng.normal() * 1e-7 + rng.normal() * 1e7;

  const std::string path =
      (std::filesystem::temp_directory_path() / "fedhar_params_test.fhps").string();
  p.save(path);
  ParamSet q = ParamSet::load(path);
  EXPECT_TRUE(p.bitwise_equal(q));
  EXPECT_EQ(q.item(0).first, "a.w");
  EXPECT_EQ(q.item(2).first, "z");
  std::remove(path.c_str());
}

TEST(ParamSet, SubsetByPrefix) {
  ParamSet p;
  p.insert("embed.w", Tensor({2}));
  p.insert("embed.b", Tensor({2}));
  p.insert("head.w", Tensor({2}));
  ParamSet e = p.subset_with_prefix("embed.");
  EXPECT_EQ(e.size(), 2u);
  EXPECT_TRUE(e.has("embed.w"));
  EXPECT_FALSE(e.has("head.w"));
}
