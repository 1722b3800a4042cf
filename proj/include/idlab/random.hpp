#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <utility>
#include <variant>

#include "idlab/tensor.hpp"

namespace idlab {

// State of a Philox4x32-10 counter-based generator. The 128-bit counter is
// (counter, stream); the 64-bit key is the seed. One counter value yields
// four 32-bit words, i.e. two 64-bit draws. Identical states produce
// identical streams on every platform.
struct RngState {
  static constexpr std::string_view algorithm = "philox4x32-10";
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t counter = 0;

  bool operator==(const RngState&) const = default;
};

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key);

// Independent sub-stream for a (purpose, index) pair, e.g. (init, layer 3).
// Derivation only depends on the parent seed/stream, never on its counter.
RngState substream(const RngState& parent, std::uint64_t purpose, std::uint64_t index);

namespace purpose {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t eval = 2;
inline constexpr std::uint64_t data = 3;
inline constexpr std::uint64_t verify = 4;
inline constexpr std::uint64_t batch = 5;
inline constexpr std::uint64_t oracle = 6;
}  // namespace purpose

struct Gaussian {
  double mean = 0.0;
  double stddev = 1.0;
};

struct Uniform {
  double lo = 0.0;
  double hi = 1.0;
};

using Distribution = std::variant<Gaussian, Uniform>;

// Fills a tensor of `shape` and returns the advanced state.
std::pair<Tensor, RngState> sample(const Distribution& dist, const Tensor::Shape& shape,
                                   RngState state);

// Sequential convenience wrapper used by data sampling code.
class Rng {
 public:
  explicit Rng(RngState state) : state_(state) {}
  Rng(std::uint64_t seed, std::uint64_t stream = 0) : state_{seed, stream, 0} {}

  const RngState& state() const { return state_; }

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double gaussian();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  Tensor sample(const Distribution& dist, const Tensor::Shape& shape);

 private:
  std::uint64_t next_u64();

  RngState state_;
  std::array<std::uint64_t, 2> block_{};
  int cached_ = 0;
  double spare_gaussian_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace idlab
