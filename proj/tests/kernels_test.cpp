#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "umcam/kernels.hpp"

using namespace umcam::kernels;

namespace {

std::vector<double> randoms(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

class KernelEquivalence : public ::testing::Test {
 protected:
  void SetUp() override {
    simd_ = kernels_for(Isa::avx2);
    if (simd_ == nullptr) GTEST_SKIP() << "AVX2 variant unavailable on this machine";
  }
  const KernelTable& ref_ = scalar_kernels();
  const KernelTable* simd_ = nullptr;
  std::mt19937_64 rng_{2024};
};

}  // namespace

TEST(Kernels, ScalarTableIsAlwaysAvailable) {
  EXPECT_EQ(scalar_kernels().isa, Isa::scalar);
  EXPECT_EQ(kernels_for(Isa::scalar), &scalar_kernels());
  EXPECT_EQ(isa_name(Isa::scalar), "scalar");
  EXPECT_EQ(isa_name(Isa::avx2), "avx2");
}

TEST(Kernels, ScalarReferenceValues) {
  const auto& k = scalar_kernels();
  std::vector<double> x{1, -2, 3};
  EXPECT_EQ(k.sum(x), 2.0);
  std::vector<double> y{1, 1, 1};
  k.axpy(2.0, x, y);
  EXPECT_EQ(y, (std::vector<double>{3, -3, 7}));
  k.relu(y);
  EXPECT_EQ(y, (std::vector<double>{3, 0, 7}));
  k.divide(y, 2.0);
  EXPECT_EQ(y, (std::vector<double>{1.5, 0, 3.5}));

  std::vector<double> num{0, 0}, den{0, 0}, out(2);
  k.weighted_accumulate(std::vector<double>{1, 0}, std::vector<double>{0.9, 0.5}, num, den);
  k.fuse_finalize(num, den, std::vector<double>{1.4, 0.6}, 2.0, out);
  EXPECT_EQ(out, (std::vector<double>{0.9, 0.3}));

  const std::vector<std::uint8_t> a{1, 0, 1, 1}, b{1, 1, 0, 1};
  EXPECT_EQ(k.count_both(a, b), 2u);
}

TEST(Kernels, RelaxFromRowScalar) {
  const auto& k = scalar_kernels();
  const std::vector<double> adj_d{0, 10, 10}, adj_i{0, 0, 0}, img{1, 2, 3};
  std::vector<double> d{100, 100, 100};
  k.relax_from_row(adj_d, adj_i, img, d, false);
  EXPECT_EQ(d, (std::vector<double>{1, 12, 13}));
  d = {100, 100, 100};
  k.relax_from_row(adj_d, adj_i, img, d, true);
  EXPECT_EQ(d, (std::vector<double>{1, 2, 13}));
}

TEST_F(KernelEquivalence, ElementwiseKernelsAreBitIdentical) {
  for (std::size_t n = 0; n < 70; ++n) {
    const auto x = randoms(rng_, n, -5, 5);
    auto y0 = randoms(rng_, n, -5, 5);
    auto y1 = y0;
    ref_.axpy(0.37, x, y0);
    simd_->axpy(0.37, x, y1);
    ASSERT_EQ(y0, y1) << "axpy n=" << n;
    ref_.relu(y0);
    simd_->relu(y1);
    ASSERT_EQ(y0, y1) << "relu n=" << n;
    ref_.divide(y0, 3.1);
    simd_->divide(y1, 3.1);
    ASSERT_EQ(y0, y1) << "divide n=" << n;
  }
}

TEST_F(KernelEquivalence, SumAgreesToRounding) {
  for (std::size_t n = 0; n < 200; n += 7) {
    const auto x = randoms(rng_, n, -1, 1);
    EXPECT_NEAR(ref_.sum(x), simd_->sum(x), 1e-13 * static_cast<double>(n + 1));
  }
}

TEST_F(KernelEquivalence, FusionKernelsAreBitIdentical) {
  for (std::size_t n = 1; n < 70; ++n) {
    std::vector<double> n0(n, 0.0), d0(n, 0.0), n1(n, 0.0), d1(n, 0.0), plain(n, 0.0);
    for (int m = 0; m < 5; ++m) {
      auto w = randoms(rng_, n, 0, 1);
      const auto a = randoms(rng_, n, 0, 1);
      for (std::size_t i = 0; i < n; i += 3) w[i] = 0.0;
      ref_.weighted_accumulate(w, a, n0, d0);
      simd_->weighted_accumulate(w, a, n1, d1);
      for (std::size_t i = 0; i < n; ++i) plain[i] += a[i];
    }
    ASSERT_EQ(n0, n1);
    ASSERT_EQ(d0, d1);
    for (std::size_t i = 0; i < n; i += 4) d0[i] = d1[i] = 0.0;
    std::vector<double> o0(n), o1(n);
    ref_.fuse_finalize(n0, d0, plain, 5.0, o0);
    simd_->fuse_finalize(n1, d1, plain, 5.0, o1);
    ASSERT_EQ(o0, o1) << "n=" << n;
  }
}

TEST_F(KernelEquivalence, RelaxFromRowIsBitIdentical) {
  for (std::size_t n = 1; n < 70; ++n) {
    for (bool diag : {false, true}) {
      const auto adj_d = randoms(rng_, n, 0, 10);
      const auto adj_i = randoms(rng_, n, 0, 1);
      const auto img = randoms(rng_, n, 0, 1);
      auto d0 = randoms(rng_, n, 0, 12);
      if (n > 2) d0[n / 2] = std::numeric_limits<double>::infinity();
      auto d1 = d0;
      ref_.relax_from_row(adj_d, adj_i, img, d0, diag);
      simd_->relax_from_row(adj_d, adj_i, img, d1, diag);
      ASSERT_EQ(d0, d1) << "n=" << n << " diag=" << diag;
    }
  }
}

TEST_F(KernelEquivalence, CountBothMatches) {
  std::bernoulli_distribution b(0.5);
  for (std::size_t n = 0; n < 300; n += 5) {
    std::vector<std::uint8_t> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = b(rng_);
      y[i] = b(rng_);
    }
    ASSERT_EQ(ref_.count_both(x, y), simd_->count_both(x, y)) << "n=" << n;
  }
}
