#include <immintrin.h>

#include <cstddef>

#include "gemm_blocked.hpp"
#include "idlab/kernels.hpp"

namespace idlab::kernels::avx2 {
namespace {

constexpr std::size_t MR = 4;
constexpr std::size_t NR = 12;

void micro_4x12(std::size_t kc, const double* a, const double* b, double alpha, double* c,
                std::size_t ldc) {
  __m256d acc[MR][3];
  for (auto& row : acc)
    for (auto& v : row) v = _mm256_setzero_pd();
  for (std::size_t k = 0; k < kc; ++k) {
    const __m256d b0 = _mm256_loadu_pd(b + k * NR);
    const __m256d b1 = _mm256_loadu_pd(b + k * NR + 4);
    const __m256d b2 = _mm256_loadu_pd(b + k * NR + 8);
    for (std::size_t r = 0; r < MR; ++r) {
      const __m256d ar = _mm256_broadcast_sd(a + k * MR + r);
      acc[r][0] = _mm256_fmadd_pd(ar, b0, acc[r][0]);
      acc[r][1] = _mm256_fmadd_pd(ar, b1, acc[r][1]);
      acc[r][2] = _mm256_fmadd_pd(ar, b2, acc[r][2]);
    }
  }
  const __m256d va = _mm256_set1_pd(alpha);
  for (std::size_t r = 0; r < MR; ++r) {
    double* out = c + r * ldc;
    for (std::size_t v = 0; v < 3; ++v) {
      const __m256d prev = _mm256_loadu_pd(out + 4 * v);
      _mm256_storeu_pd(out + 4 * v, _mm256_fmadd_pd(va, acc[r][v], prev));
    }
  }
}

double dot(const double* x, const double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
          double* c, std::size_t ldc) {
  if (gemm_thin(dot, axpy, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc)) return;
  gemm_blocked<MR, NR>(micro_4x12, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* x, const double* y, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), s1);
  }
  double acc = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void rotate(double c, double s, double* x, double* y, std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xi = _mm256_loadu_pd(x + i);
    const __m256d yi = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(x + i, _mm256_fmsub_pd(vc, xi, _mm256_mul_pd(vs, yi)));
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(vs, xi, _mm256_mul_pd(vc, yi)));
  }
  for (; i < n; ++i) {
    const double xi = x[i];
    const double yi = y[i];
    x[i] = c * xi - s * yi;
    y[i] = s * xi + c * yi;
  }
}

void relu(const double* in, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(in + i);
    _mm256_storeu_pd(out + i, _mm256_and_pd(v, _mm256_cmp_pd(v, zero, _CMP_GT_OQ)));
  }
  for (; i < n; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_backward(const double* act, const double* grad_out, double* grad_in, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(act + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(grad_in + i, _mm256_and_pd(_mm256_loadu_pd(grad_out + i), mask));
  }
  for (; i < n; ++i) grad_in[i] = act[i] > 0.0 ? grad_out[i] : 0.0;
}

}  // namespace

const KernelTable table{Isa::avx2, gemm, dot, axpy, rotate, relu, relu_backward};

}  // namespace idlab::kernels::avx2
