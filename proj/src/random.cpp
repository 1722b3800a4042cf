#include "idlab/random.hpp"

#include <cmath>
#include <numbers>

#include "idlab/errors.hpp"

namespace idlab {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::array<std::uint64_t, 2> block_at(const RngState& s) {
  const auto out = philox4x32_10(
      {static_cast<std::uint32_t>(s.counter), static_cast<std::uint32_t>(s.counter >> 32),
       static_cast<std::uint32_t>(s.stream), static_cast<std::uint32_t>(s.stream >> 32)},
      {static_cast<std::uint32_t>(s.seed), static_cast<std::uint32_t>(s.seed >> 32)});
  return {(std::uint64_t{out[1]} << 32) | out[0], (std::uint64_t{out[3]} << 32) | out[2]};
}

double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

// Box-Muller on one counter block; u1 is mapped to (0, 1] so log is finite.
std::pair<double, double> gaussian_pair(const std::array<std::uint64_t, 2>& block) {
  const double u1 = 1.0 - to_unit(block[0]);
  const double u2 = to_unit(block[1]);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(theta), r * std::sin(theta)};
}

void check(const Distribution& dist) {
  if (const auto* g = std::get_if<Gaussian>(&dist)) {
    if (!(g->stddev > 0.0) || !std::isfinite(g->mean) || !std::isfinite(g->stddev)) {
      throw ParameterError("gaussian requires finite mean and stddev > 0");
    }
  } else {
    const auto& u = std::get<Uniform>(dist);
    if (!(u.lo < u.hi) || !std::isfinite(u.lo) || !std::isfinite(u.hi)) {
      throw ParameterError("uniform requires finite lo < hi");
    }
  }
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

RngState substream(const RngState& parent, std::uint64_t purpose, std::uint64_t index) {
  const std::uint64_t mixed = splitmix64(parent.stream ^ splitmix64(purpose * 0x100000001B3ull + index));
  return RngState{parent.seed, mixed, 0};
}

std::pair<Tensor, RngState> sample(const Distribution& dist, const Tensor::Shape& shape,
                                   RngState state) {
  check(dist);
  Tensor out(shape);
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; i += 2) {
    const auto block = block_at(state);
    ++state.counter;
    double first = 0.0;
    double second = 0.0;
    if (const auto* g = std::get_if<Gaussian>(&dist)) {
      const auto [z0, z1] = gaussian_pair(block);
      first = g->mean + g->stddev * z0;
      second = g->mean + g->stddev * z1;
    } else {
      const auto& u = std::get<Uniform>(dist);
      first = u.lo + (u.hi - u.lo) * to_unit(block[0]);
      second = u.lo + (u.hi - u.lo) * to_unit(block[1]);
    }
    out[i] = first;
    if (i + 1 < n) out[i + 1] = second;
  }
  return {std::move(out), state};
}

std::uint64_t Rng::next_u64() {
  if (cached_ == 0) {
    block_ = block_at(state_);
    ++state_.counter;
    cached_ = 2;
  }
  return block_[2 - cached_--];
}

double Rng::uniform() { return to_unit(next_u64()); }

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_gaussian_;
  }
  const std::array<std::uint64_t, 2> block{next_u64(), next_u64()};
  const auto [z0, z1] = gaussian_pair(block);
  spare_gaussian_ = z1;
  has_spare_ = true;
  return z0;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ParameterError("Rng::below requires n > 0");
  // Rejection keeps the result exactly uniform.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t v = 0;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

Tensor Rng::sample(const Distribution& dist, const Tensor::Shape& shape) {
  // Tensor draws always start on a fresh counter block.
  cached_ = 0;
  has_spare_ = false;
  auto [t, next] = idlab::sample(dist, shape, state_);
  state_ = next;
  return t;
}

}  // namespace idlab
