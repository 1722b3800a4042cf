#include <atomic>
#include <cstdlib>
#include <string>

#include "idlab/errors.hpp"
#include "idlab/kernels.hpp"

namespace idlab::kernels {
namespace {

const KernelTable* resolve_initial() {
  if (const char* env = std::getenv("IDLAB_SIMD"); env != nullptr && *env != '\0') {
    return &table(parse_isa(env));
  }
  return &table(best_supported());
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> ptr{resolve_initial()};
  return ptr;
}

}  // namespace

bool supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    case Isa::avx512:
      return __builtin_cpu_supports("avx512f") && supported(Isa::avx2);
  }
  return false;
}

Isa best_supported() {
  if (supported(Isa::avx512)) return Isa::avx512;
  if (supported(Isa::avx2)) return Isa::avx2;
  return Isa::scalar;
}

const KernelTable& table(Isa isa) {
  if (!supported(isa)) {
    throw ParameterError("kernel set '" + std::string(name(isa)) + "' is not supported by this CPU");
  }
  switch (isa) {
    case Isa::scalar:
      return scalar::table;
    case Isa::avx2:
      return avx2::table;
    case Isa::avx512:
      return avx512::table;
  }
  return scalar::table;
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select(Isa isa) { current().store(&table(isa), std::memory_order_release); }

std::string_view name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::avx512:
      return "avx512";
  }
  return "unknown";
}

Isa parse_isa(std::string_view text) {
  if (text == "scalar") return Isa::scalar;
  if (text == "avx2") return Isa::avx2;
  if (text == "avx512") return Isa::avx512;
  throw ParameterError("unknown kernel set '" + std::string(text) + "'");
}

}  // namespace idlab::kernels
