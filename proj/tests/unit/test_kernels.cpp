#include <gtest/gtest.h>

#include <cmath>
#include <tuple>
#include <vector>

#include "idlab/kernels.hpp"
#include "oracle_util.hpp"

using namespace idlab;
using kernels::Isa;
using kernels::Trans;

namespace {

std::vector<double> randv(std::size_t n, std::uint64_t seed) {
  if (n == 0) return {};
  const Tensor t = oracle::random_tensor({n}, seed);
  return {t.values().begin(), t.values().end()};
}

class SimdVsScalar : public ::testing::TestWithParam<Isa> {
 protected:
  void SetUp() override {
    if (!kernels::supported(GetParam())) GTEST_SKIP() << "host lacks " << kernels::name(GetParam());
  }
  const kernels::KernelTable& simd() const { return kernels::table(GetParam()); }
  const kernels::KernelTable& ref() const { return kernels::table(Isa::scalar); }
};

TEST_P(SimdVsScalar, GemmAllLayouts) {
  const std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> shapes{
      {1, 1, 1}, {7, 5, 3}, {8, 24, 16}, {33, 47, 29}, {1, 800, 32}, {32, 1, 800}, {64, 49, 1}, {17, 200, 75}};
  std::uint64_t seed = 1;
  for (auto [m, n, k] : shapes) {
    for (Trans ta : {Trans::no, Trans::yes}) {
      for (Trans tb : {Trans::no, Trans::yes}) {
        for (double beta : {0.0, 1.0, -0.5}) {
          const auto a = randv(m * k, seed++);
          const auto b = randv(k * n, seed++);
          auto c1 = randv(m * n, seed++);
          auto c2 = c1;
          const std::size_t lda = ta == Trans::no ? k : m;
          const std::size_t ldb = tb == Trans::no ? n : k;
          ref().gemm(ta, tb, m, n, k, 1.3, a.data(), lda, b.data(), ldb, beta, c1.data(), n);
          simd().gemm(ta, tb, m, n, k, 1.3, a.data(), lda, b.data(), ldb, beta, c2.data(), n);
          const double tol = 1e-13 * static_cast<double>(k + 4);
          for (std::size_t i = 0; i < m * n; ++i) {
            ASSERT_NEAR(c1[i], c2[i], tol * (1.0 + std::abs(c1[i]))) << m << "x" << n << "x" << k << " at " << i;
          }
        }
      }
    }
  }
}

TEST_P(SimdVsScalar, GemmBetaZeroIgnoresNaN) {
  const auto a = randv(6 * 4, 3);
  const auto b = randv(4 * 9, 4);
  std::vector<double> c(6 * 9, std::nan(""));
  simd().gemm(Trans::no, Trans::no, 6, 9, 4, 1.0, a.data(), 4, b.data(), 9, 0.0, c.data(), 9);
  for (double v : c) EXPECT_TRUE(std::isfinite(v));
}

TEST_P(SimdVsScalar, VectorKernels) {
  for (std::size_t n : {0u, 1u, 3u, 8u, 15u, 16u, 17u, 1000u, 1031u}) {
    const auto x = randv(n, 10 + n);
    const auto y = randv(n, 20 + n);
    EXPECT_NEAR(ref().dot(x.data(), y.data(), n), simd().dot(x.data(), y.data(), n), 1e-12 * (1.0 + n));

    auto y1 = y;
    auto y2 = y;
    ref().axpy(-0.7, x.data(), y1.data(), n);
    simd().axpy(-0.7, x.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y1[i], y2[i], 1e-14);

    auto a1 = x, b1 = y, a2 = x, b2 = y;
    ref().rotate(0.6, 0.8, a1.data(), b1.data(), n);
    simd().rotate(0.6, 0.8, a2.data(), b2.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(a1[i], a2[i], 1e-14);
      EXPECT_NEAR(b1[i], b2[i], 1e-14);
    }

    std::vector<double> r1(n), r2(n), g1(n), g2(n);
    ref().relu(x.data(), r1.data(), n);
    simd().relu(x.data(), r2.data(), n);
    EXPECT_EQ(r1, r2);
    ref().relu_backward(r1.data(), y.data(), g1.data(), n);
    simd().relu_backward(r1.data(), y.data(), g2.data(), n);
    EXPECT_EQ(g1, g2);
  }
}

INSTANTIATE_TEST_SUITE_P(Isas, SimdVsScalar, ::testing::Values(Isa::avx2, Isa::avx512),
                         [](const auto& info) { return std::string(kernels::name(info.param)); });

TEST(Kernels, ScalarGemmMatchesTripleLoop) {
  const Tensor a = oracle::random_tensor({7, 5}, 1);
  const Tensor b = oracle::random_tensor({5, 3}, 2);
  Tensor c({7, 3});
  kernels::table(Isa::scalar).gemm(Trans::no, Trans::no, 7, 3, 5, 1.0, a.data(), 5, b.data(), 3, 0.0, c.data(), 3);
  EXPECT_LT(oracle::max_abs_diff(c, oracle::naive_matmul(a, b)), 1e-12);
}

TEST(Kernels, SelectAndParse) {
  EXPECT_TRUE(kernels::supported(Isa::scalar));
  EXPECT_EQ(kernels::parse_isa("avx2"), Isa::avx2);
  const Isa before = kernels::active().isa;
  kernels::select(Isa::scalar);
  EXPECT_EQ(kernels::active().isa, Isa::scalar);
  kernels::select(before);
}

}  // namespace
