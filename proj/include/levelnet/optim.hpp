#pragma once

#include <vector>

#include "levelnet/layers.hpp"

namespace levelnet {

using nn::NamedTensor;

/// Adam over a fixed parameter list. Tensors that alias each other must be
/// listed once.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<NamedTensor> params, double lr, double beta1, double beta2,
       double epsilon = 1e-7);

  /// `grads[i]` belongs to `params()[i]`.
  void step(const std::vector<ag::Tensor>& grads);

  const std::vector<NamedTensor>& params() const { return params_; }
  std::vector<ag::Tensor> tensors() const;
  long steps() const { return t_; }
  double lr() const { return lr_; }

 private:
  std::vector<NamedTensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-7;
  long t_ = 0;
};

}  // namespace levelnet
