#include <cstddef>

#include "idlab/kernels.hpp"

namespace idlab::kernels::scalar {
namespace {

// Reference GEMM: one dot product per output entry, summed in k order.
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
          double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ta == Trans::no ? a[i * lda + p] : a[p * lda + i];
        const double bv = tb == Trans::no ? b[p * ldb + j] : b[j * ldb + p];
        acc += av * bv;
      }
      double& out = c[i * ldc + j];
      out = beta == 0.0 ? alpha * acc : alpha * acc + beta * out;
    }
  }
}

double dot(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void rotate(double c, double s, double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i];
    const double yi = y[i];
    x[i] = c * xi - s * yi;
    y[i] = s * xi + c * yi;
  }
}

void relu(const double* in, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_backward(const double* act, const double* grad_out, double* grad_in, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) grad_in[i] = act[i] > 0.0 ? grad_out[i] : 0.0;
}

}  // namespace

const KernelTable table{Isa::scalar, gemm, dot, axpy, rotate, relu, relu_backward};

}  // namespace idlab::kernels::scalar
