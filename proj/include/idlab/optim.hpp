#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "idlab/nn.hpp"

namespace idlab {

enum class OptimizerKind { sgd, adagrad, rmsprop, adam, adamax };

std::string_view optimizer_name(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view text);

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::sgd;
  double base_lr = 0.01;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double rms_decay = 0.99;
  double eps = 1e-8;
  std::size_t total_steps = 200000;
  std::vector<double> milestones{0.3, 0.6, 0.8};
  double decay_factor = 0.2;
};

// Throws ParameterError on an invalid spec.
void validate(const OptimizerSpec& spec);

// base_lr * decay^(#milestones m with t >= floor(m * total_steps)).
double lr_at_step(const OptimizerSpec& spec, std::size_t t);

struct OptimizerState {
  std::size_t step = 0;
  ParamList first;   // velocity, squared-gradient sum or first moment
  ParamList second;  // second moment / infinity norm (adam, adamax)
};

// Applies one update in place. Layers with an empty gradient list are left
// untouched. Non-finite gradients raise DivergenceError naming the step.
void optimizer_step(const OptimizerSpec& spec, OptimizerState& state, ParamList& params,
                    const ParamList& grads);

}  // namespace idlab
