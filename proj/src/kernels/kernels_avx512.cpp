#include <immintrin.h>

#include <cstddef>

#include "gemm_blocked.hpp"
#include "idlab/kernels.hpp"

namespace idlab::kernels::avx512 {
namespace {

constexpr std::size_t MR = 8;
constexpr std::size_t NR = 24;

void micro_8x24(std::size_t kc, const double* a, const double* b, double alpha, double* c,
                std::size_t ldc) {
  __m512d acc[MR][3];
  for (auto& row : acc)
    for (auto& v : row) v = _mm512_setzero_pd();
  for (std::size_t k = 0; k < kc; ++k) {
    const __m512d b0 = _mm512_loadu_pd(b + k * NR);
    const __m512d b1 = _mm512_loadu_pd(b + k * NR + 8);
    const __m512d b2 = _mm512_loadu_pd(b + k * NR + 16);
    for (std::size_t r = 0; r < MR; ++r) {
      const __m512d ar = _mm512_set1_pd(a[k * MR + r]);
      acc[r][0] = _mm512_fmadd_pd(ar, b0, acc[r][0]);
      acc[r][1] = _mm512_fmadd_pd(ar, b1, acc[r][1]);
      acc[r][2] = _mm512_fmadd_pd(ar, b2, acc[r][2]);
    }
  }
  const __m512d va = _mm512_set1_pd(alpha);
  for (std::size_t r = 0; r < MR; ++r) {
    double* out = c + r * ldc;
    for (std::size_t v = 0; v < 3; ++v) {
      const __m512d prev = _mm512_loadu_pd(out + 8 * v);
      _mm512_storeu_pd(out + 8 * v, _mm512_fmadd_pd(va, acc[r][v], prev));
    }
  }
}

double dot(const double* x, const double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
          double* c, std::size_t ldc) {
  if (gemm_thin(dot, axpy, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc)) return;
  gemm_blocked<MR, NR>(micro_8x24, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

double dot(const double* x, const double* y, std::size_t n) {
  __m512d s0 = _mm512_setzero_pd();
  __m512d s1 = _mm512_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    s0 = _mm512_fmadd_pd(_mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i), s0);
    s1 = _mm512_fmadd_pd(_mm512_loadu_pd(x + i + 8), _mm512_loadu_pd(y + i + 8), s1);
  }
  if (i + 8 <= n) {
    s0 = _mm512_fmadd_pd(_mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i), s0);
    i += 8;
  }
  double acc = _mm512_reduce_add_pd(_mm512_add_pd(s0, s1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m512d va = _mm512_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm512_storeu_pd(y + i, _mm512_fmadd_pd(va, _mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void rotate(double c, double s, double* x, double* y, std::size_t n) {
  const __m512d vc = _mm512_set1_pd(c);
  const __m512d vs = _mm512_set1_pd(s);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m512d xi = _mm512_loadu_pd(x + i);
    const __m512d yi = _mm512_loadu_pd(y + i);
    _mm512_storeu_pd(x + i, _mm512_fmsub_pd(vc, xi, _mm512_mul_pd(vs, yi)));
    _mm512_storeu_pd(y + i, _mm512_fmadd_pd(vs, xi, _mm512_mul_pd(vc, yi)));
  }
  for (; i < n; ++i) {
    const double xi = x[i];
    const double yi = y[i];
    x[i] = c * xi - s * yi;
    y[i] = s * xi + c * yi;
  }
}

void relu(const double* in, double* out, std::size_t n) {
  const __m512d zero = _mm512_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m512d v = _mm512_loadu_pd(in + i);
    const __mmask8 pos = _mm512_cmp_pd_mask(v, zero, _CMP_GT_OQ);
    _mm512_storeu_pd(out + i, _mm512_maskz_mov_pd(pos, v));
  }
  for (; i < n; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_backward(const double* act, const double* grad_out, double* grad_in, std::size_t n) {
  const __m512d zero = _mm512_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __mmask8 pos = _mm512_cmp_pd_mask(_mm512_loadu_pd(act + i), zero, _CMP_GT_OQ);
    _mm512_storeu_pd(grad_in + i, _mm512_maskz_mov_pd(pos, _mm512_loadu_pd(grad_out + i)));
  }
  for (; i < n; ++i) grad_in[i] = act[i] > 0.0 ? grad_out[i] : 0.0;
}

}  // namespace

const KernelTable table{Isa::avx512, gemm, dot, axpy, rotate, relu, relu_backward};

}  // namespace idlab::kernels::avx512
