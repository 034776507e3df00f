#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "splitguard/error.hpp"
#include "splitguard/nn/network.hpp"

namespace splitguard::nn {

// SGD with heavy-ball momentum: v <- mu*v + g; p <- p - lr*v.
class SgdOptimizer {
 public:
  SgdOptimizer() = default;
  SgdOptimizer(double lr, double momentum) : lr_(lr), momentum_(momentum) {
    if (!(lr >= 0.0) || !(momentum >= 0.0) || momentum >= 1.0) {
      throw ConfigError("SgdOptimizer: need lr >= 0 and momentum in [0, 1)");
    }
  }

  double learning_rate() const noexcept { return lr_; }
  double momentum() const noexcept { return momentum_; }

  void step(Network& net, const GradVec& grad) {
    if (grad.dim() != net.parameter_count()) {
      throw ConfigError("sgd step: gradient dim " + std::to_string(grad.dim()) +
                        " != parameter count " + std::to_string(net.parameter_count()));
    }
    if (!grad.all_finite()) throw NumericError("sgd step: non-finite gradient");
    if (velocity_.size() != grad.dim()) velocity_.assign(grad.dim(), 0.0);
    std::vector<double> params = net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      velocity_[i] = momentum_ * velocity_[i] + grad.values[i];
      params[i] -= lr_ * velocity_[i];
    }
    net.set_parameters(params);
  }

  friend bool operator==(const SgdOptimizer&, const SgdOptimizer&) = default;

 private:
  double lr_ = 0.01;
  double momentum_ = 0.9;
  std::vector<double> velocity_;
};

// Plain SGD step without momentum state.
inline void sgd_step(Network& net, const GradVec& grad, double lr) {
  if (!(lr > 0.0)) throw ConfigError("sgd_step: lr must be positive");
  SgdOptimizer opt(lr, 0.0);
  opt.step(net, grad);
}

}  // namespace splitguard::nn
