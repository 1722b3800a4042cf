#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "idlab/linalg.hpp"
#include "idlab/tensor.hpp"

namespace idlab {

// One-layer linear model trained by gradient descent from W0 on a single
// example xhat (target xhat): the limit is W0 + u xhat^T with
// u = (I - W0) xhat / ||xhat||^2.
Tensor theorem1_weights(const Tensor& w0, const Tensor& xhat);
// Prediction of that limit on x: P(x) + W0 (x - P(x)), P(x) the projection
// of x onto xhat. Throws DegenerateInputError for xhat = 0.
Tensor theorem1_predict(const Tensor& w0, const Tensor& xhat, const Tensor& x);

// Minimum-distance interpolant W0 + X^T (X X^T)^{-1} (Y - X W0) reached by
// GD on ||X W - Y||^2 when X has full row rank. Throws RankError otherwise.
Tensor gd_limit_overparam(const Tensor& w0, const Tensor& x, const Tensor& y);
// (X^T X)^{-1} X^T Y for X with full column rank. Throws RankError otherwise.
Tensor least_squares_underparam(const Tensor& x, const Tensor& y);

struct PatchMatrix {
  Tensor x;  // |coords| x (kh*kw*C), column (c*kh + p)*kw + q
  Tensor y;  // |coords| x C, center pixels
  std::vector<std::pair<std::size_t, std::size_t>> coords;  // row-major (i, j)
  std::size_t kh = 1;
  std::size_t kw = 1;
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t patch_size() const { return kh * kw * channels; }
};

PatchMatrix extract_patches(const Tensor& image, std::size_t kh, std::size_t kw);

// Lambda with X Lambda = Y: picks the center entry of every channel.
Tensor center_selector(std::size_t kh, std::size_t kw, std::size_t channels);

// Conv kernel (C_out x C_in x kh x kw) <-> flat weights ((kh*kw*C_in) x C_out),
// in the column order used by PatchMatrix::x, so conv(x) = X W_flat.
Tensor conv_to_flat(const Tensor& kernel);
Tensor flat_to_conv(const Tensor& flat, std::size_t c_in, std::size_t kh, std::size_t kw);

struct RowBasis {
  Tensor x;
  Tensor y;
  std::vector<std::size_t> rows;  // indices into the original system
};

// Greedy pivoted Gram-Schmidt on the rows of X, keeping as many rows as the
// numerical rank (relative tolerance rel_tol). Throws RankError if X = 0.
RowBasis reduce_to_row_basis(const Tensor& x, const Tensor& y, double rel_tol = kDefaultRankTol);

// Closed-form limit of GD on a one-layer C -> C conv trained on the patch
// system: least squares when X has full column rank and more rows than
// columns, otherwise the minimum-distance interpolant on a row basis.
// A rank-0 system returns W0 unchanged.
Tensor conv1_closed_form(const Tensor& w0_flat, const PatchMatrix& pm);

// Applies flat conv weights to an image (C x H x W); no bias.
Tensor conv1_apply(const Tensor& w_flat, const Tensor& image, std::size_t kh, std::size_t kw);

struct Thm2BoundInputs {
  std::size_t kh = 5;
  std::size_t kw = 5;
  std::size_t channels = 1;
  std::size_t nullity = 0;
  double sigma = 0.2;        // init standard deviation
  double pixel_bound = 1.0;  // B
  double delta = 0.1;
  double m = 10.0;
};

// 2 n / (C (M - ln M - 1)): smallest delta for which the bound is proven.
double thm2_delta0(const Thm2BoundInputs& in);
// High-probability bound on the per-pixel MSE of the closed-form conv on
// test images with |pixel| <= B. Throws ValidityError when delta < delta0
// and ParameterError for malformed inputs.
double thm2_bound(const Thm2BoundInputs& in);
// Same display without the delta >= delta0 requirement.
double thm2_bound_unchecked(const Thm2BoundInputs& in);

}  // namespace idlab
