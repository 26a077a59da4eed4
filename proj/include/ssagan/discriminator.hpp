#pragma once

#include <vector>

#include "ssagan/nn.hpp"

namespace ssagan {

struct DiscriminatorConfig {
  int image_size = 256;
  std::int64_t base_channels = 64;
  std::int64_t cond_dim = 256;
};

/// Residual downsampling block: conv4x4/s2 -> leaky -> conv3x3 -> leaky, plus
/// an average-pooled (optionally 1x1-projected) shortcut.
class DownBlock {
 public:
  DownBlock() = default;
  DownBlock(std::int64_t in, std::int64_t out, Rng& rng);

  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, nn::TensorList& out) const;

  nn::Conv2d conv1, conv2;
  nn::Conv2d shortcut;  // only when channel counts differ
};

class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const DiscriminatorConfig& config, Rng& rng);

  /// (B, 3, S, S) -> (B, C, 4, 4).
  Tensor features(const Tensor& images) const;
  /// Fuses the sentence vector with image features -> logits (B).
  Tensor head(const Tensor& features, const Tensor& sentence) const;
  Tensor discriminate(const Tensor& images, const Tensor& sentence) const { return head(features(images), sentence); }

  void collect(const std::string& prefix, nn::TensorList& out) const;
  nn::TensorList parameters() const;
  const DiscriminatorConfig& config() const { return config_; }

  nn::Conv2d conv_img;
  std::vector<DownBlock> blocks;
  nn::Conv2d joint_conv;  // (C + cond) -> 2*base, 3x3
  nn::Conv2d logit_conv;  // 2*base -> 1, 4x4 valid

 private:
  DiscriminatorConfig config_;
};

}  // namespace ssagan
