#pragma once

#include <cstddef>

#include "idlab/tensor.hpp"

namespace idlab {

// Stride-1, zero-padded, size-preserving patch geometry for odd kernels.
struct PatchGeometry {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t kh = 1;
  std::size_t kw = 1;

  std::size_t patch_size() const { return channels * kh * kw; }
  std::size_t positions() const { return height * width; }
};

// Throws GeometryError for even kernel sizes.
void require_odd_kernel(std::size_t kh, std::size_t kw);

// cols[(c*kh + p)*kw + q, i*W + j] = image[c, i + p - kh/2, j + q - kw/2]
// (zero outside the image). Output is patch_size x positions.
void im2col(const PatchGeometry& g, const double* image, double* cols);
// Adjoint of im2col: accumulates cols back into a zeroed image.
void col2im(const PatchGeometry& g, const double* cols, double* image);

Tensor im2col(const Tensor& image, std::size_t kh, std::size_t kw);

}  // namespace idlab
