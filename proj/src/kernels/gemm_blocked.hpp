#pragma once

// Packed, cache-blocked GEMM driver shared by the SIMD translation units.
// Each TU includes this header and instantiates `gemm_blocked` with its own
// micro-kernel; the unnamed namespace keeps every instantiation local to the
// TU so code compiled with different -m flags never gets merged by the
// linker.

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <vector>

#include "idlab/kernels.hpp"

namespace idlab::kernels {
namespace {

constexpr std::size_t kKc = 256;
constexpr std::size_t kMcRows = 96;

inline double load_op(Trans t, const double* p, std::size_t ld, std::size_t r, std::size_t c) {
  return t == Trans::no ? p[r * ld + c] : p[c * ld + r];
}

// Packs rows [i0, i0+mr_valid) x cols [p0, p0+kc) of op(A) into a kc x MR
// k-major panel, zero-padding the missing rows.
template <std::size_t MR>
void pack_a(Trans ta, const double* a, std::size_t lda, std::size_t i0, std::size_t mr_valid,
            std::size_t p0, std::size_t kc, double* out) {
  if (ta == Trans::no) {
    for (std::size_t r = 0; r < MR; ++r) {
      if (r < mr_valid) {
        const double* row = a + (i0 + r) * lda + p0;
        for (std::size_t k = 0; k < kc; ++k) out[k * MR + r] = row[k];
      } else {
        for (std::size_t k = 0; k < kc; ++k) out[k * MR + r] = 0.0;
      }
    }
  } else {
    for (std::size_t k = 0; k < kc; ++k) {
      const double* src = a + (p0 + k) * lda + i0;
      double* dst = out + k * MR;
      std::size_t r = 0;
      for (; r < mr_valid; ++r) dst[r] = src[r];
      for (; r < MR; ++r) dst[r] = 0.0;
    }
  }
}

// Packs rows [p0, p0+kc) x cols [j0, j0+nr_valid) of op(B) into a kc x NR
// k-major panel.
template <std::size_t NR>
void pack_b(Trans tb, const double* b, std::size_t ldb, std::size_t p0, std::size_t kc,
            std::size_t j0, std::size_t nr_valid, double* out) {
  if (tb == Trans::no) {
    for (std::size_t k = 0; k < kc; ++k) {
      const double* src = b + (p0 + k) * ldb + j0;
      double* dst = out + k * NR;
      std::size_t c = 0;
      for (; c < nr_valid; ++c) dst[c] = src[c];
      for (; c < NR; ++c) dst[c] = 0.0;
    }
  } else {
    for (std::size_t c = 0; c < NR; ++c) {
      if (c < nr_valid) {
        const double* col = b + (j0 + c) * ldb + p0;
        for (std::size_t k = 0; k < kc; ++k) out[k * NR + c] = col[k];
      } else {
        for (std::size_t k = 0; k < kc; ++k) out[k * NR + c] = 0.0;
      }
    }
  }
}

inline void scale_c(std::size_t m, std::size_t n, double beta, double* c, std::size_t ldc) {
  if (beta == 1.0) return;
  for (std::size_t i = 0; i < m; ++i) {
    double* row = c + i * ldc;
    if (beta == 0.0) {
      std::fill(row, row + n, 0.0);
    } else {
      for (std::size_t j = 0; j < n; ++j) row[j] *= beta;
    }
  }
}

// Vector-shaped products (m == 1, n == 1 or k == 1) go through dot/axpy;
// the packed path would spend most of each register tile on padding.
// Returns false when the shape is not thin.
template <typename Dot, typename Axpy>
bool gemm_thin(Dot dot, Axpy axpy, Trans ta, Trans tb, std::size_t m, std::size_t n,
               std::size_t k, double alpha, const double* a, std::size_t lda, const double* b,
               std::size_t ldb, double beta, double* c, std::size_t ldc) {
  if (m != 1 && n != 1 && k != 1) return false;
  scale_c(m, n, beta, c, ldc);
  if (m == 0 || n == 0 || k == 0 || alpha == 0.0) return true;
  thread_local std::vector<double> tmp;
  thread_local std::vector<double> out;
  if (k == 1) {
    const double* v = b;
    if (tb == Trans::yes && ldb != 1) {
      tmp.resize(n);
      for (std::size_t j = 0; j < n; ++j) tmp[j] = b[j * ldb];
      v = tmp.data();
    }
    for (std::size_t i = 0; i < m; ++i) {
      const double u = ta == Trans::no ? a[i * lda] : a[i];
      axpy(alpha * u, v, c + i * ldc, n);
    }
  } else if (m == 1) {
    const double* row = a;
    if (ta == Trans::yes && lda != 1) {
      tmp.resize(k);
      for (std::size_t p = 0; p < k; ++p) tmp[p] = a[p * lda];
      row = tmp.data();
    }
    if (tb == Trans::no) {
      for (std::size_t p = 0; p < k; ++p) axpy(alpha * row[p], b + p * ldb, c, n);
    } else {
      for (std::size_t j = 0; j < n; ++j) c[j] += alpha * dot(row, b + j * ldb, k);
    }
  } else {
    const double* col = b;
    if (tb == Trans::no && ldb != 1) {
      tmp.resize(k);
      for (std::size_t p = 0; p < k; ++p) tmp[p] = b[p * ldb];
      col = tmp.data();
    }
    if (ta == Trans::no) {
      for (std::size_t i = 0; i < m; ++i) c[i * ldc] += alpha * dot(a + i * lda, col, k);
    } else {
      out.assign(m, 0.0);
      for (std::size_t p = 0; p < k; ++p) axpy(alpha * col[p], a + p * lda, out.data(), m);
      for (std::size_t i = 0; i < m; ++i) c[i * ldc] += out[i];
    }
  }
  return true;
}

// Micro-kernel contract: acc = sum_k a[k*MR + r] * b[k*NR + c];
// then c_tile[r*ldc + c] += alpha * acc for the full MR x NR tile.
template <std::size_t MR, std::size_t NR, typename MicroKernel>
void gemm_blocked(MicroKernel&& ukr, Trans ta, Trans tb, std::size_t m, std::size_t n,
                  std::size_t k, double alpha, const double* a, std::size_t lda, const double* b,
                  std::size_t ldb, double beta, double* c, std::size_t ldc) {
  scale_c(m, n, beta, c, ldc);
  if (m == 0 || n == 0 || k == 0 || alpha == 0.0) return;

  const std::size_t n_panels = (n + NR - 1) / NR;
  const std::size_t mc = std::max<std::size_t>(MR, kMcRows / MR * MR);
  thread_local std::vector<double> bpack;
  thread_local std::vector<double> apack;
  bpack.resize(n_panels * NR * kKc);
  apack.resize(mc * kKc);
  double tile[MR * NR];

  for (std::size_t p0 = 0; p0 < k; p0 += kKc) {
    const std::size_t kc = std::min(kKc, k - p0);
    for (std::size_t jp = 0; jp < n_panels; ++jp) {
      const std::size_t j0 = jp * NR;
      pack_b<NR>(tb, b, ldb, p0, kc, j0, std::min(NR, n - j0), bpack.data() + jp * NR * kc);
    }
    for (std::size_t i0 = 0; i0 < m; i0 += mc) {
      const std::size_t mb = std::min(mc, m - i0);
      const std::size_t m_panels = (mb + MR - 1) / MR;
      for (std::size_t ip = 0; ip < m_panels; ++ip) {
        const std::size_t r0 = i0 + ip * MR;
        pack_a<MR>(ta, a, lda, r0, std::min(MR, m - r0), p0, kc, apack.data() + ip * MR * kc);
      }
      for (std::size_t jp = 0; jp < n_panels; ++jp) {
        const std::size_t j0 = jp * NR;
        const std::size_t nv = std::min(NR, n - j0);
        const double* bp = bpack.data() + jp * NR * kc;
        for (std::size_t ip = 0; ip < m_panels; ++ip) {
          const std::size_t r0 = i0 + ip * MR;
          const std::size_t mv = std::min(MR, m - r0);
          const double* ap = apack.data() + ip * MR * kc;
          if (mv == MR && nv == NR) {
            ukr(kc, ap, bp, alpha, c + r0 * ldc + j0, ldc);
          } else {
            std::memset(tile, 0, sizeof(tile));
            ukr(kc, ap, bp, alpha, tile, NR);
            for (std::size_t r = 0; r < mv; ++r)
              for (std::size_t cc = 0; cc < nv; ++cc) c[(r0 + r) * ldc + j0 + cc] += tile[r * NR + cc];
          }
        }
      }
    }
  }
}

}  // namespace
}  // namespace idlab::kernels
