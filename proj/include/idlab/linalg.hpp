#pragma once

#include <cstddef>
#include <vector>

#include "idlab/tensor.hpp"

namespace idlab {

// Thin SVD: a (m x n) = U (m x r) diag(S) V^T with r = min(m, n).
struct Svd {
  Tensor u;
  std::vector<double> s;
  Tensor v;
};

inline constexpr std::size_t kSvdMaxSweeps = 100;
inline constexpr double kDefaultRankTol = 1e-8;
inline constexpr double kGramConditionLimit = 1e12;

// One-sided (Hestenes) Jacobi. Singular values are non-negative and sorted
// in descending order; columns of U belonging to numerically zero singular
// values are completed to an orthonormal set. Throws NumericError after
// kSvdMaxSweeps sweeps without convergence.
Svd svd(const Tensor& a);
std::vector<double> singular_values(const Tensor& a);

// Number of singular values strictly above rel_tol * sigma_max.
std::size_t rank_with_tol(const Tensor& a, double rel_tol = kDefaultRankTol);

// Solves (X X^T) U = B for U. Throws RankError when cond(X X^T) exceeds
// kGramConditionLimit; the deficiency counts the offending directions.
Tensor solve_gram(const Tensor& x, const Tensor& b);

// Cholesky factor L (lower) of a symmetric positive definite matrix.
Tensor cholesky(const Tensor& spd);
// Solves L L^T X = B given the Cholesky factor.
Tensor cholesky_solve(const Tensor& l, const Tensor& b);

// Householder QR of an m x n matrix with m >= n.
struct Qr {
  Tensor q;  // m x n, orthonormal columns
  Tensor r;  // n x n, upper triangular
};
Qr qr(const Tensor& a);

// Minimiser of ||A W - B||_F for A with full column rank, via QR.
Tensor solve_least_squares(const Tensor& a, const Tensor& b);

}  // namespace idlab
