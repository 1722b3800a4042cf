#include <gtest/gtest.h>

#include <cmath>

#include "idlab/errors.hpp"
#include "idlab/linalg.hpp"
#include "idlab/patches.hpp"
#include "oracle_util.hpp"

using namespace idlab;

namespace {

Tensor reconstruct(const Svd& s) {
  Tensor us = s.u;
  for (std::size_t i = 0; i < us.dim(0); ++i)
    for (std::size_t j = 0; j < us.dim(1); ++j) us.at(i, j) *= s.s[j];
  return oracle::naive_matmul(us, oracle::naive_transpose(s.v));
}

}  // namespace

TEST(Svd, Diagonal) {
  const Svd s = svd(Tensor::matrix({{3, 0}, {0, 1}}));
  ASSERT_EQ(s.s.size(), 2u);
  EXPECT_NEAR(s.s[0], 3.0, 1e-14);
  EXPECT_NEAR(s.s[1], 1.0, 1e-14);
}

TEST(Svd, RankOneOuterProduct) {
  const Tensor u = oracle::random_tensor({6}, 1);
  const Tensor v = oracle::random_tensor({4}, 2);
  const auto s = singular_values(outer(u, v));
  std::size_t above = 0;
  for (double x : s) above += x > 1e-10 * s[0];
  EXPECT_EQ(above, 1u);
}

TEST(Svd, ReconstructsRandomMatrices) {
  for (auto shape : {Tensor::Shape{6, 4}, Tensor::Shape{4, 6}, Tensor::Shape{25, 25}, Tensor::Shape{100, 9}}) {
    const Tensor a = oracle::random_tensor(shape, shape[0] * 31 + shape[1]);
    const Svd s = svd(a);
    EXPECT_LT(oracle::frob(reconstruct(s) - a) / oracle::frob(a), 1e-10);
    for (std::size_t i = 1; i < s.s.size(); ++i) EXPECT_GE(s.s[i - 1], s.s[i]);
    const Tensor vtv = oracle::naive_matmul(oracle::naive_transpose(s.v), s.v);
    EXPECT_LT(oracle::max_abs_diff(vtv, Tensor::identity(vtv.dim(0))), 1e-10);
    const Tensor utu = oracle::naive_matmul(oracle::naive_transpose(s.u), s.u);
    EXPECT_LT(oracle::max_abs_diff(utu, Tensor::identity(utu.dim(0))), 1e-10);
  }
}

TEST(Svd, RejectsNonFinite) {
  Tensor a = Tensor::identity(3);
  a[4] = INFINITY;
  EXPECT_THROW(svd(a), NumericError);
}

TEST(Rank, ConstructedCases) {
  EXPECT_EQ(rank_with_tol(Tensor({4, 4})), 0u);
  EXPECT_EQ(rank_with_tol(Tensor::identity(5)), 5u);
  EXPECT_EQ(rank_with_tol(Tensor::matrix({{1, 0}, {2, 0}, {0, 1}})), 2u);
}

TEST(SolveGram, TrivialCases) {
  EXPECT_LT(oracle::max_abs_diff(solve_gram(Tensor::identity(3), Tensor::identity(3)), Tensor::identity(3)), 1e-14);
  const Tensor u = solve_gram(Tensor::matrix({{2, 0}}), Tensor::matrix({{8}}));
  EXPECT_NEAR(u.at(0, 0), 2.0, 1e-14);
}

TEST(SolveGram, MatchesGaussianElimination) {
  const Tensor x = oracle::random_tensor({3, 8}, 5);
  const Tensor b = oracle::random_tensor({3, 2}, 6);
  const Tensor gram = oracle::naive_matmul(x, oracle::naive_transpose(x));
  EXPECT_LT(oracle::max_abs_diff(solve_gram(x, b), oracle::gauss_solve(gram, b)), 1e-9);
}

TEST(SolveGram, RankDeficientThrows) {
  const Tensor x = Tensor::matrix({{1, 2, 3}, {2, 4, 6}});
  try {
    solve_gram(x, Tensor({2, 1}, 1.0));
    FAIL() << "expected RankError";
  } catch (const RankError& e) {
    EXPECT_EQ(e.deficiency(), 1u);
  }
}

TEST(Qr, FactorsTallMatrix) {
  const Tensor a = oracle::random_tensor({9, 4}, 8);
  const Qr f = qr(a);
  EXPECT_LT(oracle::max_abs_diff(oracle::naive_matmul(f.q, f.r), a), 1e-12);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < i; ++j) EXPECT_EQ(f.r.at(i, j), 0.0);
}

TEST(LeastSquares, MatchesNormalEquations) {
  const Tensor a = oracle::random_tensor({20, 4}, 9);
  const Tensor b = oracle::random_tensor({20, 3}, 10);
  const Tensor at = oracle::naive_transpose(a);
  const Tensor normal = oracle::gauss_solve(oracle::naive_matmul(at, a), oracle::naive_matmul(at, b));
  EXPECT_LT(oracle::max_abs_diff(solve_least_squares(a, b), normal), 1e-9);
  EXPECT_THROW(solve_least_squares(Tensor({5, 2}), Tensor({5, 1})), RankError);
}

TEST(Cholesky, SolvesSpdSystem) {
  const Tensor x = oracle::random_tensor({5, 5}, 12);
  Tensor spd = oracle::naive_matmul(x, oracle::naive_transpose(x));
  for (std::size_t i = 0; i < 5; ++i) spd.at(i, i) += 1.0;
  const Tensor b = oracle::random_tensor({5, 2}, 13);
  EXPECT_LT(oracle::max_abs_diff(cholesky_solve(cholesky(spd), b), oracle::gauss_solve(spd, b)), 1e-10);
}

TEST(Patches, Im2colMatchesDefinition) {
  const Tensor img = oracle::random_tensor({2, 5, 6}, 14);
  const Tensor cols = im2col(img, 3, 5);
  ASSERT_EQ(cols.dim(0), 2u * 3 * 5);
  ASSERT_EQ(cols.dim(1), 30u);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t p = 0; p < 3; ++p)
      for (std::size_t q = 0; q < 5; ++q)
        for (std::size_t i = 0; i < 5; ++i)
          for (std::size_t j = 0; j < 6; ++j) {
            const long ii = static_cast<long>(i + p) - 1;
            const long jj = static_cast<long>(j + q) - 2;
            const double expect = (ii < 0 || jj < 0 || ii >= 5 || jj >= 6)
                                      ? 0.0
                                      : img.at(c, static_cast<std::size_t>(ii), static_cast<std::size_t>(jj));
            ASSERT_EQ(cols.at((c * 3 + p) * 5 + q, i * 6 + j), expect);
          }
}

TEST(Patches, Col2imIsAdjoint) {
  const PatchGeometry g{3, 7, 4, 5, 3};
  const Tensor img = oracle::random_tensor({3, 7, 4}, 15);
  const Tensor c = oracle::random_tensor({g.patch_size(), g.positions()}, 16);
  Tensor cols({g.patch_size(), g.positions()});
  im2col(g, img.data(), cols.data());
  Tensor back({3, 7, 4}, 123.0);
  col2im(g, c.data(), back.data());
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) lhs += cols[i] * c[i];
  for (std::size_t i = 0; i < img.size(); ++i) rhs += img[i] * back[i];
  EXPECT_NEAR(lhs, rhs, 1e-10 * std::abs(lhs));
}

TEST(Patches, EvenKernelRejected) { EXPECT_THROW(im2col(Tensor({1, 4, 4}), 2, 3), GeometryError); }
