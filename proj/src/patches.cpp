#include "idlab/patches.hpp"

#include <algorithm>

#include "idlab/errors.hpp"

namespace idlab {

void require_odd_kernel(std::size_t kh, std::size_t kw) {
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw GeometryError("kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                        " has no well-defined center; odd sizes only");
  }
}

void im2col(const PatchGeometry& g, const double* image, double* cols) {
  const long H = static_cast<long>(g.height);
  const long W = static_cast<long>(g.width);
  const long ph = static_cast<long>(g.kh / 2);
  const long pw = static_cast<long>(g.kw / 2);
  double* out = cols;
  for (std::size_t c = 0; c < g.channels; ++c) {
    const double* plane = image + c * g.height * g.width;
    for (long p = 0; p < static_cast<long>(g.kh); ++p) {
      for (long q = 0; q < static_cast<long>(g.kw); ++q, out += H * W) {
        const long di = p - ph;
        const long dj = q - pw;
        const long j0 = std::max(0L, -dj);
        const long j1 = std::min(W, W - dj);
        for (long i = 0; i < H; ++i) {
          double* dst = out + i * W;
          const long si = i + di;
          if (si < 0 || si >= H || j0 >= j1) {
            std::fill(dst, dst + W, 0.0);
            continue;
          }
          std::fill(dst, dst + j0, 0.0);
          std::copy(plane + si * W + j0 + dj, plane + si * W + j1 + dj, dst + j0);
          std::fill(dst + j1, dst + W, 0.0);
        }
      }
    }
  }
}

void col2im(const PatchGeometry& g, const double* cols, double* image) {
  const long H = static_cast<long>(g.height);
  const long W = static_cast<long>(g.width);
  const long ph = static_cast<long>(g.kh / 2);
  const long pw = static_cast<long>(g.kw / 2);
  std::fill(image, image + g.channels * g.height * g.width, 0.0);
  const double* in = cols;
  for (std::size_t c = 0; c < g.channels; ++c) {
    double* plane = image + c * g.height * g.width;
    for (long p = 0; p < static_cast<long>(g.kh); ++p) {
      for (long q = 0; q < static_cast<long>(g.kw); ++q, in += H * W) {
        const long di = p - ph;
        const long dj = q - pw;
        const long j0 = std::max(0L, -dj);
        const long j1 = std::min(W, W - dj);
        for (long i = 0; i < H; ++i) {
          const long si = i + di;
          if (si < 0 || si >= H) continue;
          const double* src = in + i * W;
          double* dst = plane + si * W + dj;
          for (long j = j0; j < j1; ++j) dst[j] += src[j];
        }
      }
    }
  }
}

Tensor im2col(const Tensor& image, std::size_t kh, std::size_t kw) {
  if (image.rank() != 3) throw ShapeError("im2col expects a CxHxW image, got " + shape_string(image.shape()));
  require_odd_kernel(kh, kw);
  const PatchGeometry g{image.dim(0), image.dim(1), image.dim(2), kh, kw};
  Tensor cols({g.patch_size(), g.positions()});
  im2col(g, image.data(), cols.data());
  return cols;
}

}  // namespace idlab
