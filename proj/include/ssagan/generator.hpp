#pragma once

#include <vector>

#include "ssagan/ssacn.hpp"

namespace ssagan {

inline constexpr std::int64_t kNoiseDim = 100;
inline constexpr std::int64_t kSentenceDim = 256;

struct GeneratorConfig {
  int stages = 7;
  std::int64_t base_channels = 64;
  std::int64_t mask_hidden = 100;
  std::int64_t affine_hidden = 256;
  std::int64_t cond_dim = kSentenceDim;
  NormConfig norm;
  /// Stage k (1-based) gates its SSCBN sites with the predicted mask iff mask_enabled[k-1].
  std::vector<bool> mask_enabled;  // empty = all enabled
};

/// Stage output channels: base x [8, 8, 8, 8, 4, 2, 1], first `stages` entries.
std::vector<std::int64_t> channel_schedule(int stages, std::int64_t base_channels);
/// Checked config for a given depth; throws ConfigError outside [3, 7].
GeneratorConfig configure_scale(int stages, std::int64_t base_channels);

struct Generated {
  Tensor image;              // (B, 3, S, S) in [-1, 1]
  std::vector<Tensor> masks;  // one (B, 1, h, h) per stage
};

class Generator {
 public:
  Generator() = default;
  Generator(const GeneratorConfig& config, Rng& rng);

  Generated generate(const Tensor& z, const Tensor& sentence, Mode mode);

  void collect(const std::string& prefix, nn::TensorList& out) const;
  void collect_state(const std::string& prefix, nn::TensorList& out) const;
  nn::TensorList parameters() const;

  int image_size() const { return 4 << (config_.stages - 1); }
  const GeneratorConfig& config() const { return config_; }
  void set_mask_enabled(std::vector<bool> enabled);

  nn::Linear projection;  // 100 -> 4*4*ch1
  std::vector<SsacnBlock> blocks;
  nn::Conv2d head;  // ch_last -> 3, 3x3

 private:
  GeneratorConfig config_;
};

}  // namespace ssagan
