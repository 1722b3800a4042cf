#include "idlab/oracles.hpp"

#include <algorithm>
#include <cmath>

#include "idlab/errors.hpp"
#include "idlab/kernels.hpp"
#include "idlab/patches.hpp"

namespace idlab {
namespace {

void require_vector(const Tensor& v, std::size_t d, const char* what) {
  if (v.size() != d) {
    throw ShapeError(std::string(what) + " must have " + std::to_string(d) + " entries, got " +
                     shape_string(v.shape()));
  }
}

void check_inputs(const Thm2BoundInputs& in) {
  const std::size_t full = in.kh * in.kw * in.channels;
  if (in.kh == 0 || in.kw == 0 || in.channels == 0) throw ParameterError("kernel and channel sizes must be positive");
  if (in.nullity > full) throw ParameterError("nullity exceeds kh*kw*C");
  if (!(in.sigma >= 0.0) || !(in.pixel_bound >= 0.0)) throw ParameterError("sigma and B must be non-negative");
  if (!(in.delta > 0.0 && in.delta < 1.0)) throw ParameterError("delta must lie in (0, 1)");
  if (!(in.m > 1.0)) throw ParameterError("M must exceed 1");
}

}  // namespace

Tensor theorem1_weights(const Tensor& w0, const Tensor& xhat) {
  if (w0.rank() != 2 || w0.rows() != w0.cols()) throw ShapeError("W0 must be square");
  const std::size_t d = w0.rows();
  require_vector(xhat, d, "xhat");
  const double nn = dot(xhat, xhat);
  if (nn == 0.0) throw DegenerateInputError("training example has zero norm");
  const Tensor xv = xhat.reshaped({d, 1});
  const Tensor u = (1.0 / nn) * (xv - matmul(w0, xv));
  return w0 + outer(u, xhat);
}

Tensor theorem1_predict(const Tensor& w0, const Tensor& xhat, const Tensor& x) {
  if (w0.rank() != 2 || w0.rows() != w0.cols()) throw ShapeError("W0 must be square");
  const std::size_t d = w0.rows();
  require_vector(xhat, d, "xhat");
  require_vector(x, d, "x");
  const double nn = dot(xhat, xhat);
  if (nn == 0.0) throw DegenerateInputError("training example has zero norm");
  const double coef = dot(xhat, x) / nn;
  Tensor par({d});
  Tensor perp({d});
  for (std::size_t i = 0; i < d; ++i) {
    par[i] = coef * xhat[i];
    perp[i] = x[i] - par[i];
  }
  Tensor out = matmul(w0, perp.reshaped({d, 1})).reshaped({d});
  out += par;
  return out;
}

Tensor gd_limit_overparam(const Tensor& w0, const Tensor& x, const Tensor& y) {
  if (w0.rank() != 2 || x.rank() != 2 || y.rank() != 2) throw ShapeError("gd_limit_overparam expects matrices");
  if (x.cols() != w0.rows() || y.rows() != x.rows() || y.cols() != w0.cols()) {
    throw ShapeError("gd_limit_overparam: W0 " + shape_string(w0.shape()) + ", X " + shape_string(x.shape()) +
                     ", Y " + shape_string(y.shape()) + " are not conformable");
  }
  const Tensor u = solve_gram(x, y - matmul(x, w0));
  Tensor w = w0;
  kernels::active().gemm(kernels::Trans::yes, kernels::Trans::no, x.cols(), y.cols(), x.rows(), 1.0,
                         x.data(), x.cols(), u.data(), u.cols(), 1.0, w.data(), w.cols());
  return w;
}

Tensor least_squares_underparam(const Tensor& x, const Tensor& y) {
  if (x.rank() != 2 || y.rank() != 2 || x.rows() != y.rows()) {
    throw ShapeError("least_squares_underparam: X " + shape_string(x.shape()) + " and Y " +
                     shape_string(y.shape()) + " are not conformable");
  }
  return solve_least_squares(x, y);
}

PatchMatrix extract_patches(const Tensor& image, std::size_t kh, std::size_t kw) {
  if (image.rank() != 3) throw ShapeError("extract_patches expects a CxHxW image, got " + shape_string(image.shape()));
  require_odd_kernel(kh, kw);
  PatchMatrix pm;
  pm.kh = kh;
  pm.kw = kw;
  pm.channels = image.dim(0);
  pm.height = image.dim(1);
  pm.width = image.dim(2);
  pm.x = transpose(im2col(image, kh, kw));
  pm.y = Tensor({pm.height * pm.width, pm.channels});
  for (std::size_t i = 0; i < pm.height; ++i) {
    for (std::size_t j = 0; j < pm.width; ++j) {
      pm.coords.emplace_back(i, j);
      for (std::size_t c = 0; c < pm.channels; ++c) pm.y.at(i * pm.width + j, c) = image.at(c, i, j);
    }
  }
  return pm;
}

Tensor center_selector(std::size_t kh, std::size_t kw, std::size_t channels) {
  require_odd_kernel(kh, kw);
  Tensor lambda({kh * kw * channels, channels});
  for (std::size_t c = 0; c < channels; ++c) lambda.at((c * kh + kh / 2) * kw + kw / 2, c) = 1.0;
  return lambda;
}

Tensor conv_to_flat(const Tensor& kernel) {
  if (kernel.rank() != 4) throw ShapeError("conv kernel must be rank 4, got " + shape_string(kernel.shape()));
  const std::size_t co = kernel.dim(0);
  const std::size_t k = kernel.size() / co;
  return transpose(kernel.reshaped({co, k}));
}

Tensor flat_to_conv(const Tensor& flat, std::size_t c_in, std::size_t kh, std::size_t kw) {
  if (flat.rank() != 2 || flat.rows() != c_in * kh * kw) {
    throw ShapeError("flat weights " + shape_string(flat.shape()) + " do not match C_in*kh*kw = " +
                     std::to_string(c_in * kh * kw));
  }
  return transpose(flat).reshaped({flat.cols(), c_in, kh, kw});
}

RowBasis reduce_to_row_basis(const Tensor& x, const Tensor& y, double rel_tol) {
  if (x.rank() != 2 || y.rank() != 2 || x.rows() != y.rows()) throw ShapeError("reduce_to_row_basis: shape mismatch");
  const std::size_t r = rank_with_tol(x, rel_tol);
  if (r == 0) throw RankError("patch matrix is zero", x.rows());
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  Tensor resid = x;
  std::vector<double> norm2(n);
  std::vector<bool> used(n, false);
  std::vector<std::size_t> picked;
  for (std::size_t i = 0; i < n; ++i) norm2[i] = kernels::active().dot(x.data() + i * d, x.data() + i * d, d);
  while (picked.size() < r) {
    std::size_t best = n;
    double best_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!used[i] && norm2[i] > best_norm) {
        best = i;
        best_norm = norm2[i];
      }
    }
    if (best == n) break;
    used[best] = true;
    picked.push_back(best);
    std::vector<double> q(resid.data() + best * d, resid.data() + (best + 1) * d);
    const double qn = std::sqrt(kernels::active().dot(q.data(), q.data(), d));
    for (double& v : q) v /= qn;
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      double* row = resid.data() + i * d;
      const double c = kernels::active().dot(row, q.data(), d);
      kernels::active().axpy(-c, q.data(), row, d);
      norm2[i] = kernels::active().dot(row, row, d);
    }
  }
  std::sort(picked.begin(), picked.end());
  RowBasis out{gather_rows(x, picked), gather_rows(y, picked), picked};
  const std::size_t got = rank_with_tol(out.x, rel_tol);
  if (got < r) throw RankError("pivoted row selection lost rank", r - got);
  return out;
}

Tensor conv1_closed_form(const Tensor& w0_flat, const PatchMatrix& pm) {
  const std::size_t d = pm.patch_size();
  if (w0_flat.rank() != 2 || w0_flat.rows() != d || w0_flat.cols() != pm.channels) {
    throw ShapeError("W0_flat must be " + std::to_string(d) + "x" + std::to_string(pm.channels) + ", got " +
                     shape_string(w0_flat.shape()));
  }
  const std::size_t r = rank_with_tol(pm.x);
  if (r == 0) return w0_flat;
  if (r == d && pm.x.rows() > d) return least_squares_underparam(pm.x, pm.y);
  const RowBasis basis = reduce_to_row_basis(pm.x, pm.y);
  return gd_limit_overparam(w0_flat, basis.x, basis.y);
}

Tensor conv1_apply(const Tensor& w_flat, const Tensor& image, std::size_t kh, std::size_t kw) {
  const Tensor cols = im2col(image, kh, kw);
  if (w_flat.rank() != 2 || w_flat.rows() != cols.rows()) throw ShapeError("conv1_apply: weight/patch mismatch");
  Tensor out({w_flat.cols(), image.dim(1), image.dim(2)});
  kernels::active().gemm(kernels::Trans::yes, kernels::Trans::no, w_flat.cols(), cols.cols(), cols.rows(), 1.0,
                         w_flat.data(), w_flat.cols(), cols.data(), cols.cols(), 0.0, out.data(), cols.cols());
  return out;
}

double thm2_delta0(const Thm2BoundInputs& in) {
  check_inputs(in);
  const double c = static_cast<double>(in.channels);
  return 2.0 * static_cast<double>(in.nullity) / (c * (in.m - std::log(in.m) - 1.0));
}

double thm2_bound_unchecked(const Thm2BoundInputs& in) {
  check_inputs(in);
  if (in.nullity == 0) return 0.0;
  const double n = static_cast<double>(in.nullity);
  const double c = static_cast<double>(in.channels);
  const double k = static_cast<double>(in.kh * in.kw * in.channels);
  const double init_term = std::sqrt(n * in.sigma * in.sigma * (2.0 * std::log(n / in.delta) + c * (1.0 + std::log(in.m))));
  const double t = (init_term + std::sqrt(n * c)) * in.pixel_bound * std::sqrt(k);
  return t * t / c;
}

double thm2_bound(const Thm2BoundInputs& in) {
  const double d0 = thm2_delta0(in);
  if (in.delta < d0) {
    throw ValidityError("delta " + std::to_string(in.delta) + " is below the validity threshold " +
                        std::to_string(d0) + " for nullity " + std::to_string(in.nullity));
  }
  return thm2_bound_unchecked(in);
}

}  // namespace idlab
