#pragma once

#include <stdexcept>
#include <vector>

#include "ddg/tensor.hpp"

namespace ddg {

// SGD with classic momentum and decoupled-from-nothing L2 weight decay:
//   v <- momentum*v + grad + weight_decay*param
//   param <- param - lr*v
class SgdOptimizer {
 public:
  SgdOptimizer(std::vector<TensorPtr> params, double lr, double momentum,
               double weight_decay)
      : params_(std::move(params)),
        lr_(lr),
        momentum_(momentum),
        weight_decay_(weight_decay) {
    if (lr <= 0.0) throw std::invalid_argument("SgdOptimizer: lr must be positive");
    velocities_.reserve(params_.size());
    for (const auto& p : params_)
      velocities_.emplace_back(p->values.size(), 0.0);
  }

  void step() {
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor& p = *params_[k];
      std::vector<double>& v = velocities_[k];
      if (p.grad.size() != p.values.size()) p.ensure_grad();
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = momentum_ * v[i] + p.grad[i] + weight_decay_ * p.values[i];
        p.values[i] -= lr_ * v[i];
      }
    }
  }

  void zero_grad() { clear_grad(params_); }

  double lr() const { return lr_; }
  void set_lr(double lr) {
    if (lr <= 0.0) throw std::invalid_argument("SgdOptimizer: lr must be positive");
    lr_ = lr;
  }

 private:
  std::vector<TensorPtr> params_;
  std::vector<std::vector<double>> velocities_;
  double lr_;
  double momentum_;
  double weight_decay_;
};

}  // namespace ddg
