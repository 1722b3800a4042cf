#pragma once

// Data-parallel inner loops used by the tensor, linear algebra and network
// code. Every kernel exists as a scalar reference plus AVX2/FMA and AVX-512
// variants; the active table is chosen once at startup from the CPU
// features and can be pinned with IDLAB_SIMD=scalar|avx2|avx512.

#include <cstddef>
#include <string_view>

namespace idlab::kernels {

enum class Isa { scalar, avx2, avx512 };

enum class Trans { no, yes };

// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C.
// op(A) is m x k, op(B) is k x n. lda/ldb/ldc are row strides of the
// stored (untransposed) arrays. beta == 0 overwrites C without reading it.
using GemmFn = void (*)(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                        double alpha, const double* a, std::size_t lda, const double* b,
                        std::size_t ldb, double beta, double* c, std::size_t ldc);
using DotFn = double (*)(const double* x, const double* y, std::size_t n);
using AxpyFn = void (*)(double alpha, const double* x, double* y, std::size_t n);
// Plane rotation used by one-sided Jacobi:
//   x' = c*x - s*y,  y' = s*x + c*y
using RotateFn = void (*)(double c, double s, double* x, double* y, std::size_t n);
using ReluFn = void (*)(const double* in, double* out, std::size_t n);
// grad_in[i] = act[i] > 0 ? grad_out[i] : 0
using ReluBackwardFn = void (*)(const double* act, const double* grad_out, double* grad_in,
                                std::size_t n);

struct KernelTable {
  Isa isa;
  GemmFn gemm;
  DotFn dot;
  AxpyFn axpy;
  RotateFn rotate;
  ReluFn relu;
  ReluBackwardFn relu_backward;
};

bool supported(Isa isa);
Isa best_supported();

// Table for a specific ISA; throws idlab::ParameterError when the host
// cannot run it.
const KernelTable& table(Isa isa);

// Table used by the library. Resolved lazily on first call.
const KernelTable& active();
void select(Isa isa);

std::string_view name(Isa isa);
Isa parse_isa(std::string_view text);

namespace scalar {
extern const KernelTable table;
}
namespace avx2 {
extern const KernelTable table;
}
namespace avx512 {
extern const KernelTable table;
}

}  // namespace idlab::kernels
