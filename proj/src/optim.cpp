#include "ssagan/optim.hpp"

#include <cmath>

#include "ssagan/error.hpp"

namespace ssagan::optim {

Adam::Adam(nn::TensorList params, AdamConfig config) : params_(std::move(params)), config_(config) {
  if (config_.lr < 0 || config_.beta1 < 0 || config_.beta1 >= 1 || config_.beta2 < 0 || config_.beta2 >= 1)
    throw ConfigError("invalid Adam hyperparameters");
  for (const auto& p : params_) {
    first_.push_back(Tensor::zeros(p.tensor.shape()));
    second_.push_back(Tensor::zeros(p.tensor.shape()));
  }
}

void Adam::step(const std::vector<Tensor>& grads) {
  if (grads.size() != params_.size()) throw ContractError("Adam::step: gradient count mismatch");
  ++steps_;
  const Real t = static_cast<Real>(steps_);
  const Real c1 = 1.0 - std::pow(config_.beta1, t);
  const Real c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto g = grads[i].data();
    auto p = params_[i].tensor.mutable_data();
    auto m = first_[i].mutable_data();
    auto v = second_[i].mutable_data();
    if (g.size() != p.size()) throw ContractError("Adam::step: gradient shape mismatch for " + params_[i].path);
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g[k];
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g[k] * g[k];
      const Real mhat = m[k] / c1;
      const Real vhat = v[k] / c2;
      p[k] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

nn::TensorList Adam::state(const std::string& prefix) const {
  nn::TensorList out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.push_back({nn::join_path(prefix, "m/" + params_[i].path), first_[i]});
    out.push_back({nn::join_path(prefix, "v/" + params_[i].path), second_[i]});
  }
  return out;
}

}  // namespace ssagan::optim
