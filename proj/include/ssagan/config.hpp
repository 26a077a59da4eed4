#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace ssagan {

/// Every experiment knob. Serialized as flat `key = value` lines with these field names.
struct TrainConfig {
  // Model scale.
  int stages = 5;
  std::set<int> masked_stages;  // 1-based; empty in a file means "none"
  std::int64_t g_base_channels = 64;
  std::int64_t d_base_channels = 64;
  std::int64_t mask_hidden = 100;
  std::int64_t affine_hidden = 256;
  std::int64_t text_embedding_dim = 300;
  std::int64_t text_hidden = 128;
  std::int64_t damsm_base_channels = 32;
  bool eval_batch_stats = false;

  // Optimization.
  bool finetune_text_encoder = false;
  int batch_size = 24;
  double lr_g = 1e-4;
  double lr_d = 4e-4;
  double adam_beta1 = 0.0;
  double adam_beta2 = 0.9;
  double lambda_ma = 2.0;
  double p = 6.0;
  double lambda_da = 0.1;
  double gamma1 = 5.0;
  double gamma2 = 5.0;
  double gamma3 = 10.0;
  int d_steps_per_g = 1;
  double ema_decay = 0.0;  // 0 disables the averaged generator

  // Encoder pretraining.
  int pretrain_steps = 200;
  double pretrain_lr = 2e-4;
  double pretrain_beta1 = 0.5;
  double pretrain_beta2 = 0.999;

  // Run length and I/O (excluded from the config hash).
  int epochs = 1;
  std::int64_t max_steps = 0;  // > 0 caps the run
  std::uint64_t seed = 0;
  std::string dataset_root;
  int image_size = 64;
  std::string encoder_ckpt;
  std::string out_dir = "run";
  std::int64_t checkpoint_every = 0;  // 0: only the final checkpoint
  std::int64_t sample_every = 0;      // 0: only final samples

  /// Throws ConfigError on inconsistent values.
  void validate() const;
  /// Stage k gates with its mask iff k is in masked_stages.
  std::vector<bool> mask_flags() const;
};

/// Defaults filled for a given depth: masked_stages = {1..stages}, image_size = 4 * 2^(stages-1).
TrainConfig default_config(int stages = 5);

/// Applies `key = value` text; '#' starts a comment. Unknown keys are errors.
void apply_config_text(TrainConfig& config, const std::string& text);
void apply_config_file(TrainConfig& config, const std::filesystem::path& path);
void set_config_value(TrainConfig& config, const std::string& key, const std::string& value);

/// Every field, in a fixed order.
std::map<std::string, std::string> config_entries(const TrainConfig& config);
std::string to_config_text(const TrainConfig& config);

/// FNV-1a over the fields that affect training results.
std::uint64_t config_hash(const TrainConfig& config);

std::string hex64(std::uint64_t v);

}  // namespace ssagan
