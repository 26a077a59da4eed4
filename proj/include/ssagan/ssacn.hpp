#pragma once

#include <vector>

#include "ssagan/nn.hpp"

namespace ssagan {

enum class Mode { train, eval };

struct NormConfig {
  Real eps = 1e-5;
  Real momentum = 0.1;
  /// Normalize with batch statistics in eval mode too.
  bool eval_batch_stats = false;
};

/// Affine-free batch normalization with running statistics.
///
/// The running scale tracks sigma = sqrt(var + eps) directly, so eval mode is
/// exactly (x - mean) / scale.
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(std::int64_t channels, NormConfig config = {});

  /// Train mode normalizes with the batch and updates the running statistics.
  Tensor forward(const Tensor& x, Mode mode);

  void collect_state(const std::string& prefix, nn::TensorList& out) const;

  Tensor running_mean;   // (C)
  Tensor running_scale;  // (C)
  NormConfig config;
};

/// P(ē): 256 -> hidden -> leaky 0.2 -> out, or a single linear map when hidden == 0.
class ConditionMlp {
 public:
  ConditionMlp() = default;
  ConditionMlp(std::int64_t in, std::int64_t hidden, std::int64_t out, Rng& rng);

  Tensor forward(const Tensor& e) const;
  void collect(const std::string& prefix, nn::TensorList& out) const;

  nn::Linear first;
  nn::Linear second;  // unused for single-layer maps
  bool two_layer = true;
};

struct AffineParams {
  Tensor gamma;  // (B, C)
  Tensor beta;   // (B, C)
};

/// Per-sample, per-channel gamma and beta from the sentence vector.
class ConditionAffine {
 public:
  ConditionAffine() = default;
  /// The last layers start at gamma == 1 and beta == 0.
  ConditionAffine(std::int64_t cond_dim, std::int64_t hidden, std::int64_t channels, Rng& rng);

  AffineParams forward(const Tensor& sentence) const;
  void collect(const std::string& prefix, nn::TensorList& out) const;

  ConditionMlp gamma_mlp;
  ConditionMlp beta_mlp;
};

/// m * (gamma * x_hat + beta), broadcast over space and channels.
Tensor modulate(const Tensor& x_hat, const AffineParams& affine, const Tensor& mask);

/// Semantic-spatial conditional batch normalization.
Tensor sscbn(const Tensor& x, const Tensor& sentence, const Tensor& mask, BatchNorm& bn,
             const ConditionAffine& affine, Mode mode);

/// conv3x3 (ch -> hidden) -> leaky 0.2 -> conv1x1 (hidden -> 1) -> sigmoid.
class MaskPredictor {
 public:
  MaskPredictor() = default;
  MaskPredictor(std::int64_t channels, std::int64_t hidden, Rng& rng);

  Tensor forward(const Tensor& h) const;
  void collect(const std::string& prefix, nn::TensorList& out) const;

  nn::Conv2d conv1;
  nn::Conv2d conv2;
};

struct SsacnConfig {
  std::int64_t in_channels = 512;
  std::int64_t out_channels = 512;
  bool upsample = true;
  std::int64_t cond_dim = 256;
  std::int64_t affine_hidden = 256;
  std::int64_t mask_hidden = 100;
  NormConfig norm;
};

struct BlockOutput {
  Tensor features;
  Tensor mask;  // predicted mask, also when gating is disabled
};

class SsacnBlock {
 public:
  SsacnBlock() = default;
  SsacnBlock(const SsacnConfig& config, Rng& rng);

  /// With gating disabled, the SSCBN sites see an all-ones mask.
  BlockOutput forward(const Tensor& f_prev, const Tensor& sentence, Mode mode, bool mask_enabled = true);
  /// Runs the block with `gate` in place of the predicted mask at both SSCBN sites.
  BlockOutput forward_with_gate(const Tensor& f_prev, const Tensor& sentence, Mode mode, const Tensor& gate);

  void collect(const std::string& prefix, nn::TensorList& out) const;
  void collect_state(const std::string& prefix, nn::TensorList& out) const;

  const SsacnConfig& config() const { return config_; }

  MaskPredictor mask;
  BatchNorm norm1, norm2;
  ConditionAffine affine1, affine2;
  nn::Conv2d conv1, conv2;
  nn::Conv2d shortcut;  // only when channel counts differ

 private:
  Tensor upsampled(const Tensor& f_prev) const;
  BlockOutput run(const Tensor& h, const Tensor& sentence, Mode mode, const Tensor& predicted, const Tensor& gate);

  SsacnConfig config_;
};

}  // namespace ssagan
