#include "idlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "idlab/errors.hpp"
#include "idlab/kernels.hpp"

namespace idlab {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_matrix(const Tensor& a, const char* what) {
  if (a.rank() != 2) throw ShapeError(std::string(what) + " expects a matrix, got " + shape_string(a.shape()));
}

// Jacobi on the rows of g (n x m): afterwards the rows are mutually
// orthogonal and vt holds the accumulated rotations (n x n, row j = v_j).
void jacobi_rows(Tensor& g, Tensor& vt) {
  const auto& k = kernels::active();
  const std::size_t n = g.rows();
  const std::size_t m = g.cols();
  const double tol = std::max(1e-15, std::sqrt(static_cast<double>(m)) * kEps);
  std::vector<double> norm2(n);

  for (std::size_t sweep = 0; sweep < kSvdMaxSweeps; ++sweep) {
    for (std::size_t j = 0; j < n; ++j) norm2[j] = k.dot(g.data() + j * m, g.data() + j * m, m);
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = norm2[p];
        const double beta = norm2[q];
        if (alpha == 0.0 || beta == 0.0) continue;
        double* gp = g.data() + p * m;
        double* gq = g.data() + q * m;
        const double gamma = k.dot(gp, gq, m);
        if (std::abs(gamma) <= tol * std::sqrt(alpha) * std::sqrt(beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        k.rotate(c, s, gp, gq, m);
        k.rotate(c, s, vt.data() + p * n, vt.data() + q * n, n);
        norm2[p] = std::max(0.0, alpha - t * gamma);
        norm2[q] = beta + t * gamma;
      }
    }
    if (!rotated) return;
  }
  throw NumericError("one-sided Jacobi SVD did not converge", kSvdMaxSweeps);
}

// Gram-Schmidt completion of column j of u against columns [0, j).
void complete_column(Tensor& u, std::size_t j, const std::vector<bool>& valid) {
  const std::size_t m = u.rows();
  const std::size_t r = u.cols();
  for (std::size_t e = 0; e < m; ++e) {
    std::vector<double> cand(m, 0.0);
    cand[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < r; ++i) {
        if (!valid[i]) continue;
        double d = 0.0;
        for (std::size_t t = 0; t < m; ++t) d += u.at(t, i) * cand[t];
        for (std::size_t t = 0; t < m; ++t) cand[t] -= d * u.at(t, i);
      }
    }
    double nrm = 0.0;
    for (double v : cand) nrm += v * v;
    nrm = std::sqrt(nrm);
    if (nrm > 0.5) {
      for (std::size_t t = 0; t < m; ++t) u.at(t, j) = cand[t] / nrm;
      return;
    }
  }
  throw NumericError("could not complete orthonormal basis", 0);
}

Svd svd_tall(const Tensor& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Tensor g = transpose(a);
  Tensor vt = Tensor::identity(n);
  jacobi_rows(g, vt);

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = std::sqrt(kernels::active().dot(g.data() + j * m, g.data() + j * m, m));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  Svd out{Tensor({m, n}), std::vector<double>(n), Tensor({n, n})};
  const double smax = sigma[order[0]];
  const double floor = smax * 1e-13;
  std::vector<bool> valid(n, false);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.s[j] = sigma[src];
    for (std::size_t t = 0; t < n; ++t) out.v.at(t, j) = vt.at(src, t);
    if (sigma[src] > floor && sigma[src] > 0.0) {
      for (std::size_t t = 0; t < m; ++t) out.u.at(t, j) = g.at(src, t) / sigma[src];
      valid[j] = true;
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!valid[j]) {
      complete_column(out.u, j, valid);
      valid[j] = true;
    }
  }
  return out;
}

}  // namespace

Svd svd(const Tensor& a) {
  require_matrix(a, "svd");
  if (!a.all_finite()) throw NumericError("svd input contains non-finite values", 0);
  if (a.rows() >= a.cols()) return svd_tall(a);
  Svd t = svd_tall(transpose(a));
  return Svd{std::move(t.v), std::move(t.s), std::move(t.u)};
}

std::vector<double> singular_values(const Tensor& a) { return svd(a).s; }

std::size_t rank_with_tol(const Tensor& a, double rel_tol) {
  if (!(rel_tol > 0.0)) throw ParameterError("rank tolerance must be positive");
  const auto s = singular_values(a);
  if (s.empty() || s[0] == 0.0) return 0;
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [&](double v) { return v > rel_tol * s[0]; }));
}

Tensor cholesky(const Tensor& spd) {
  require_matrix(spd, "cholesky");
  const std::size_t n = spd.rows();
  if (spd.cols() != n) throw ShapeError("cholesky expects a square matrix");
  Tensor l({n, n});
  for (std::size_t j = 0; j < n; ++j) {
    double d = spd.at(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l.at(j, k) * l.at(j, k);
    if (!(d > 0.0)) throw RankError("matrix is not positive definite", n - j);
    const double ljj = std::sqrt(d);
    l.at(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = spd.at(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= l.at(i, k) * l.at(j, k);
      l.at(i, j) = v / ljj;
    }
  }
  return l;
}

Tensor cholesky_solve(const Tensor& l, const Tensor& b) {
  const std::size_t n = l.rows();
  if (b.rank() != 2 || b.rows() != n) throw ShapeError("cholesky_solve: right-hand side shape mismatch");
  const std::size_t d = b.cols();
  Tensor x = b;
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double v = x.at(i, c);
      for (std::size_t k = 0; k < i; ++k) v -= l.at(i, k) * x.at(k, c);
      x.at(i, c) = v / l.at(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double v = x.at(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) v -= l.at(k, ii) * x.at(k, c);
      x.at(ii, c) = v / l.at(ii, ii);
    }
  }
  return x;
}

Tensor solve_gram(const Tensor& x, const Tensor& b) {
  require_matrix(x, "solve_gram");
  require_matrix(b, "solve_gram");
  if (b.rows() != x.rows()) {
    throw ShapeError("solve_gram: X has " + std::to_string(x.rows()) + " rows but B has " +
                     std::to_string(b.rows()));
  }
  const auto s = singular_values(x);
  const std::size_t n = x.rows();
  // Rows beyond the column count are necessarily dependent.
  std::size_t ok = 0;
  if (!s.empty() && s[0] > 0.0) {
    for (double v : s) {
      const double ratio = s[0] / v;
      if (v > 0.0 && ratio * ratio <= kGramConditionLimit) ++ok;
    }
  }
  if (ok < n) throw RankError("Gram matrix X X^T is singular or ill-conditioned", n - ok);

  Tensor gram({n, n});
  kernels::active().gemm(kernels::Trans::no, kernels::Trans::yes, n, n, x.cols(), 1.0, x.data(),
                         x.cols(), x.data(), x.cols(), 0.0, gram.data(), n);
  const Tensor l = cholesky(gram);
  Tensor u = cholesky_solve(l, b);
  // One step of iterative refinement.
  const Tensor residual = b - matmul(gram, u);
  u += cholesky_solve(l, residual);
  return u;
}

Qr qr(const Tensor& a) {
  require_matrix(a, "qr");
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (m < n) throw ShapeError("qr expects rows >= cols, got " + shape_string(a.shape()));
  Tensor r = a;
  std::vector<std::vector<double>> reflectors(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> v(m - j);
    for (std::size_t i = j; i < m; ++i) v[i - j] = r.at(i, j);
    double nrm = 0.0;
    for (double e : v) nrm += e * e;
    nrm = std::sqrt(nrm);
    if (nrm == 0.0) {
      reflectors[j] = {};
      continue;
    }
    const double alpha = v[0] >= 0.0 ? -nrm : nrm;
    v[0] -= alpha;
    double vn = 0.0;
    for (double e : v) vn += e * e;
    if (vn == 0.0) {
      reflectors[j] = {};
      continue;
    }
    for (std::size_t c = j; c < n; ++c) {
      double d = 0.0;
      for (std::size_t i = j; i < m; ++i) d += v[i - j] * r.at(i, c);
      const double f = 2.0 * d / vn;
      for (std::size_t i = j; i < m; ++i) r.at(i, c) -= f * v[i - j];
    }
    for (double& e : v) e /= std::sqrt(vn);
    reflectors[j] = std::move(v);
  }
  // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of I.
  Tensor q({m, n});
  for (std::size_t i = 0; i < n; ++i) q.at(i, i) = 1.0;
  for (std::size_t jj = n; jj-- > 0;) {
    const auto& v = reflectors[jj];
    if (v.empty()) continue;
    for (std::size_t c = 0; c < n; ++c) {
      double d = 0.0;
      for (std::size_t i = jj; i < m; ++i) d += v[i - jj] * q.at(i, c);
      for (std::size_t i = jj; i < m; ++i) q.at(i, c) -= 2.0 * d * v[i - jj];
    }
  }
  Tensor rr({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) rr.at(i, j) = r.at(i, j);
  return {std::move(q), std::move(rr)};
}

Tensor solve_least_squares(const Tensor& a, const Tensor& b) {
  require_matrix(a, "solve_least_squares");
  require_matrix(b, "solve_least_squares");
  if (a.rows() != b.rows()) throw ShapeError("solve_least_squares: row count mismatch");
  const std::size_t n = a.cols();
  const std::size_t rank = rank_with_tol(a, kDefaultRankTol);
  if (rank < n) throw RankError("least squares needs full column rank", n - rank);
  const Qr f = qr(a);
  // W = R^{-1} Q^T B
  Tensor qtb({n, b.cols()});
  kernels::active().gemm(kernels::Trans::yes, kernels::Trans::no, n, b.cols(), a.rows(), 1.0,
                         f.q.data(), n, b.data(), b.cols(), 0.0, qtb.data(), b.cols());
  Tensor w = qtb;
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t ii = n; ii-- > 0;) {
      double v = qtb.at(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) v -= f.r.at(ii, k) * w.at(k, c);
      w.at(ii, c) = v / f.r.at(ii, ii);
    }
  }
  return w;
}

}  // namespace idlab
