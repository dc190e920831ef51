#include "levelnet/optim.hpp"

#include <cmath>

#include "levelnet/error.hpp"

namespace levelnet {

Adam::Adam(std::vector<NamedTensor> params, double lr, double beta1, double beta2,
           double epsilon)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.size(), 0.0);
    v_.emplace_back(p.tensor.size(), 0.0);
  }
}

std::vector<ag::Tensor> Adam::tensors() const {
  std::vector<ag::Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

void Adam::step(const std::vector<ag::Tensor>& grads) {
  if (grads.size() != params_.size()) throw ShapeError("gradient count does not match parameters");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double step = lr_ * std::sqrt(c2) / c1;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& w = params_[k].tensor.mutable_values();
    const auto& g = grads[k].values();
    if (g.size() != w.size()) throw ShapeError("gradient shape mismatch for " + params_[k].name);
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= step * m[i] / (std::sqrt(v[i]) + eps_);
    }
  }
}

}  // namespace levelnet
