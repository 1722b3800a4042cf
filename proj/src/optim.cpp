#include "idlab/optim.hpp"

#include <algorithm>
#include <cmath>

#include "idlab/errors.hpp"

namespace idlab {
namespace {

void ensure_buffers(ParamList& buf, const ParamList& params) {
  if (!buf.empty()) return;
  buf.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    for (const auto& p : params[i]) buf[i].emplace_back(p.shape());
}

}  // namespace

std::string_view optimizer_name(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adagrad: return "adagrad";
    case OptimizerKind::rmsprop: return "rmsprop";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::adamax: return "adamax";
  }
  return "?";
}

OptimizerKind parse_optimizer(std::string_view text) {
  for (auto k : {OptimizerKind::sgd, OptimizerKind::adagrad, OptimizerKind::rmsprop,
                 OptimizerKind::adam, OptimizerKind::adamax}) {
    if (optimizer_name(k) == text) return k;
  }
  throw ParameterError("unknown optimizer '" + std::string(text) + "'");
}

void validate(const OptimizerSpec& spec) {
  if (!(spec.base_lr > 0.0)) throw ParameterError("base_lr must be positive");
  if (!(spec.momentum >= 0.0 && spec.momentum < 1.0)) throw ParameterError("momentum must lie in [0, 1)");
  if (!(spec.beta1 >= 0.0 && spec.beta1 < 1.0) || !(spec.beta2 >= 0.0 && spec.beta2 < 1.0)) {
    throw ParameterError("betas must lie in [0, 1)");
  }
  if (!(spec.rms_decay >= 0.0 && spec.rms_decay < 1.0)) throw ParameterError("rms decay must lie in [0, 1)");
  if (!(spec.eps > 0.0)) throw ParameterError("eps must be positive");
  if (spec.total_steps == 0) throw ParameterError("total_steps must be positive");
  if (!(spec.decay_factor > 0.0)) throw ParameterError("decay_factor must be positive");
  double prev = 0.0;
  for (double m : spec.milestones) {
    if (!(m > prev && m < 1.0)) throw ParameterError("milestones must be strictly increasing in (0, 1)");
    prev = m;
  }
}

double lr_at_step(const OptimizerSpec& spec, std::size_t t) {
  if (t >= spec.total_steps) {
    throw ParameterError("step " + std::to_string(t) + " outside [0, " + std::to_string(spec.total_steps) + ")");
  }
  double lr = spec.base_lr;
  for (double m : spec.milestones) {
    if (t >= static_cast<std::size_t>(std::floor(m * static_cast<double>(spec.total_steps)))) lr *= spec.decay_factor;
  }
  return lr;
}

void optimizer_step(const OptimizerSpec& spec, OptimizerState& state, ParamList& params,
                    const ParamList& grads) {
  if (grads.size() != params.size()) throw ShapeError("optimizer_step: gradient list does not match parameters");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].empty()) continue;
    if (grads[i].size() != params[i].size()) throw ShapeError("optimizer_step: layer gradient count mismatch");
    for (std::size_t t = 0; t < grads[i].size(); ++t) {
      require_same_shape(params[i][t], grads[i][t], "optimizer_step");
      if (!grads[i][t].all_finite()) throw DivergenceError("non-finite gradient", state.step);
    }
  }
  const double lr = lr_at_step(spec, state.step);
  ensure_buffers(state.first, params);
  if (spec.kind == OptimizerKind::adam || spec.kind == OptimizerKind::adamax) ensure_buffers(state.second, params);
  const double t = static_cast<double>(state.step + 1);
  const double bc1 = 1.0 - std::pow(spec.beta1, t);
  const double bc2 = 1.0 - std::pow(spec.beta2, t);

  for (std::size_t i = 0; i < grads.size(); ++i) {
    for (std::size_t k = 0; k < grads[i].size(); ++k) {
      double* p = params[i][k].data();
      const double* g = grads[i][k].data();
      double* a = state.first[i][k].data();
      double* b = state.second.empty() ? nullptr : state.second[i][k].data();
      const std::size_t n = params[i][k].size();
      switch (spec.kind) {
        case OptimizerKind::sgd:
          for (std::size_t j = 0; j < n; ++j) {
            a[j] = spec.momentum * a[j] + g[j];
            p[j] -= lr * a[j];
          }
          break;
        case OptimizerKind::adagrad:
          for (std::size_t j = 0; j < n; ++j) {
            a[j] += g[j] * g[j];
            p[j] -= lr * g[j] / (std::sqrt(a[j]) + spec.eps);
          }
          break;
        case OptimizerKind::rmsprop:
          for (std::size_t j = 0; j < n; ++j) {
            a[j] = spec.rms_decay * a[j] + (1.0 - spec.rms_decay) * g[j] * g[j];
            p[j] -= lr * g[j] / (std::sqrt(a[j]) + spec.eps);
          }
          break;
        case OptimizerKind::adam:
          for (std::size_t j = 0; j < n; ++j) {
            a[j] = spec.beta1 * a[j] + (1.0 - spec.beta1) * g[j];
            b[j] = spec.beta2 * b[j] + (1.0 - spec.beta2) * g[j] * g[j];
            p[j] -= lr * (a[j] / bc1) / (std::sqrt(b[j] / bc2) + spec.eps);
          }
          break;
        case OptimizerKind::adamax:
          for (std::size_t j = 0; j < n; ++j) {
            a[j] = spec.beta1 * a[j] + (1.0 - spec.beta1) * g[j];
            b[j] = std::max(spec.beta2 * b[j], std::abs(g[j]) + spec.eps);
            p[j] -= lr / bc1 * a[j] / b[j];
          }
          break;
      }
    }
  }
  ++state.step;
}

}  // namespace idlab
