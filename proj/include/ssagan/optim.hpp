#pragma once

#include <cstdint>
#include <vector>

#include "ssagan/nn.hpp"

namespace ssagan::optim {

struct AdamConfig {
  Real lr = 1e-4;
  Real beta1 = 0.0;
  Real beta2 = 0.9;
  Real eps = 1e-8;
};

/// Adam with bias correction, updating parameter leaves in place.
class Adam {
 public:
  Adam() = default;
  Adam(nn::TensorList params, AdamConfig config);

  /// `grads` aligned with the parameter list.
  void step(const std::vector<Tensor>& grads);

  const nn::TensorList& params() const { return params_; }
  const AdamConfig& config() const { return config_; }
  std::int64_t steps() const { return steps_; }

  /// Moment buffers as named tensors ("<prefix>/m/<path>", "<prefix>/v/<path>") for checkpointing.
  nn::TensorList state(const std::string& prefix) const;
  void set_steps(std::int64_t steps) { steps_ = steps; }

 private:
  nn::TensorList params_;
  std::vector<Tensor> first_, second_;
  AdamConfig config_;
  std::int64_t steps_ = 0;
};

}  // namespace ssagan::optim
