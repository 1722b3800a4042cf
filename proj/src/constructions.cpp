#include "idlab/constructions.hpp"

#include <algorithm>
#include <cmath>

#include "idlab/errors.hpp"
#include "idlab/patches.hpp"
#include "idlab/random.hpp"

namespace idlab {
namespace {

// Zero all parameters, then let `fill` write the weights.
template <typename Fill>
Network with_weights(const NetworkSpec& spec, Fill fill) {
  Network net = build_network(spec);
  for (auto& layer : net.params)
    for (auto& t : layer) std::fill(t.values().begin(), t.values().end(), 0.0);
  const auto idx = param_layer_indices(spec);
  for (std::size_t n = 0; n < idx.size(); ++n) fill(n, net.params[idx[n]][0]);
  net.initial_params = net.params;
  return net;
}

}  // namespace

Network identity_linear_fcn(std::size_t depth, std::size_t d) {
  if (depth == 0 || d == 0) throw SpecError("identity_linear_fcn needs depth >= 1 and d >= 1");
  return with_weights(dense_stack(depth, d, d, false), [&](std::size_t, Tensor& w) {
    for (std::size_t i = 0; i < d; ++i) w.at(i, i) = 1.0;
  });
}

Network identity_relu_fcn(std::size_t depth, std::size_t d) {
  if (depth < 2) throw SpecError("a ReLU identity construction needs depth >= 2");
  if (d == 0) throw SpecError("identity_relu_fcn needs d >= 1");
  return with_weights(dense_stack(depth, d, 2 * d, true), [&](std::size_t n, Tensor& w) {
    if (n == 0) {
      for (std::size_t i = 0; i < d; ++i) {
        w.at(i, i) = 1.0;
        w.at(d + i, i) = -1.0;
      }
    } else if (n + 1 == depth) {
      for (std::size_t i = 0; i < d; ++i) {
        w.at(i, i) = 1.0;
        w.at(i, d + i) = -1.0;
      }
    } else {
      for (std::size_t i = 0; i < 2 * d; ++i) w.at(i, i) = 1.0;
    }
  });
}

Network identity_cnn(std::size_t depth, std::size_t channels, std::size_t k) {
  require_odd_kernel(k, k);
  if (depth == 0 || channels == 0) throw SpecError("identity_cnn needs depth >= 1 and C >= 1");
  const std::size_t c = channels;
  const std::size_t mid = k / 2;
  const std::size_t width = depth == 1 ? c : 2 * c;
  return with_weights(conv_stack(depth, width, k, c), [&](std::size_t n, Tensor& w) {
    auto set = [&](std::size_t o, std::size_t i, double v) { w[((o * w.dim(1) + i) * k + mid) * k + mid] = v; };
    if (depth == 1) {
      for (std::size_t i = 0; i < c; ++i) set(i, i, 1.0);
    } else if (n == 0) {
      for (std::size_t i = 0; i < c; ++i) {
        set(i, i, 1.0);
        set(c + i, i, -1.0);
      }
    } else if (n + 1 == depth) {
      for (std::size_t i = 0; i < c; ++i) {
        set(i, i, 1.0);
        set(i, c + i, -1.0);
      }
    } else {
      for (std::size_t i = 0; i < 2 * c; ++i) set(i, i, 1.0);
    }
  });
}

double verify_identity(const Network& net, std::size_t trials, std::uint64_t seed) {
  Rng rng(substream(RngState{seed, 0, 0}, purpose::verify, 0));
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const Tensor x = rng.sample(Gaussian{0.0, 1.0}, net.spec.input_shape());
    const Tensor y = predict(net, x);
    worst = std::max(worst, max_abs_diff(y, x));
  }
  return worst;
}

}  // namespace idlab
