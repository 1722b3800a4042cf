#pragma once

#include <cstddef>
#include <cstdint>

#include "idlab/nn.hpp"

namespace idlab {

// Exact identity networks. Biases are present but zero.

// depth dense layers, every weight I_d, no nonlinearity.
Network identity_linear_fcn(std::size_t depth, std::size_t d);

// depth >= 2 dense layers of hidden width 2d with ReLU between them:
// bottom [I; -I], middle I_{2d}, top [I, -I].
Network identity_relu_fcn(std::size_t depth, std::size_t d);

// depth conv layers with K x K kernels on C-channel images. Depth 1 is the
// center delta; deeper nets carry the positive part in channels [0, C) and
// the negative part in [C, 2C), with ReLU between layers.
Network identity_cnn(std::size_t depth, std::size_t channels, std::size_t k);

// Max over `trials` seeded N(0, 1) inputs of ||f(x) - x||_inf. Conv networks
// are probed at the spec's data geometry.
double verify_identity(const Network& net, std::size_t trials, std::uint64_t seed = 0);

}  // namespace idlab
