#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lace/network.hpp"

namespace lace {

/// SGD with classic momentum and coupled weight decay, plus the step-decay
/// schedule parameters. Defaults: lr 0.1, momentum 0.9, weight decay 5e-4,
/// decay by 0.1 every 50 epochs. Decay applies to biases too unless
/// decay_biases is flipped off.
struct SgdConfig {
  double lr0 = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int step_size = 50;
  double gamma = 0.1;
  bool decay_biases = true;
};

inline void validate(const SgdConfig& cfg) {
  if (!(cfg.lr0 > 0.0)) throw std::invalid_argument("SgdConfig: lr0 must be > 0");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw std::invalid_argument("SgdConfig: momentum must be in [0, 1)");
  }
  if (!(cfg.weight_decay >= 0.0)) {
    throw std::invalid_argument("SgdConfig: weight_decay must be >= 0");
  }
  if (cfg.step_size < 1) throw std::invalid_argument("SgdConfig: step_size must be >= 1");
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) {
    throw std::invalid_argument("SgdConfig: gamma must be in (0, 1)");
  }
}

/// Step-decay schedule: lr = lr0 * gamma^floor(epoch / step_size), counting
/// epochs from 0.
inline double step_lr(const SgdConfig& cfg, int epoch) {
  if (epoch < 0) {
    throw std::invalid_argument("step_lr: epoch must be >= 0, got " +
                                std::to_string(epoch));
  }
  return cfg.lr0 * std::pow(cfg.gamma, epoch / cfg.step_size);
}

/// Velocity buffers, one per parameter tensor, zero-initialized.
class SgdState {
 public:
  SgdState() = default;

  explicit SgdState(std::span<const ParamView> params) {
    velocities_.reserve(params.size());
    for (const ParamView& p : params) {
      velocities_.emplace_back(p.size, 0.0);
    }
  }

  std::size_t num_tensors() const { return velocities_.size(); }
  std::vector<double>& velocity(std::size_t i) { return velocities_[i]; }

 private:
  std::vector<std::vector<double>> velocities_;
};

/// One tensor update: g <- grad + weight_decay * param; v <- momentum * v + g;
/// param <- param - lr * v. No dampening, no Nesterov.
inline void sgd_step(std::span<double> param, std::span<const double> grad,
                     std::span<double> velocity, const SgdConfig& cfg, double lr) {
  if (param.size() != grad.size() || param.size() != velocity.size()) {
    throw std::invalid_argument("sgd_step: size mismatch, param " +
                                std::to_string(param.size()) + ", grad " +
                                std::to_string(grad.size()) + ", velocity " +
                                std::to_string(velocity.size()));
  }
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i] + cfg.weight_decay * param[i];
    velocity[i] = cfg.momentum * velocity[i] + g;
    param[i] -= lr * velocity[i];
    if (!std::isfinite(param[i])) {
      throw std::runtime_error("sgd_step: non-finite parameter after update");
    }
  }
}

/// Whole-model update across all parameter tensors.
inline void sgd_step(std::span<ParamView> params, std::span<ParamView> grads,
                     SgdState& state, const SgdConfig& cfg, double lr) {
  if (params.size() != grads.size() || params.size() != state.num_tensors()) {
    throw std::invalid_argument("sgd_step: tensor count mismatch, params " +
                                std::to_string(params.size()) + ", grads " +
                                std::to_string(grads.size()) + ", state " +
                                std::to_string(state.num_tensors()));
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    SgdConfig effective = cfg;
    if (params[t].is_bias && !cfg.decay_biases) effective.weight_decay = 0.0;
    sgd_step(std::span<double>(params[t].data, params[t].size),
             std::span<const double>(grads[t].data, grads[t].size),
             std::span<double>(state.velocity(t)), effective, lr);
  }
}

}  // namespace lace
