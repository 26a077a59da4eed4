#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ssagan/checkpoint.hpp"
#include "ssagan/config.hpp"
#include "ssagan/damsm.hpp"
#include "ssagan/data.hpp"
#include "ssagan/discriminator.hpp"
#include "ssagan/error.hpp"
#include "ssagan/generator.hpp"
#include "ssagan/optim.hpp"
#include "ssagan/text_encoder.hpp"

namespace ssagan {

/// Raised after the diagnostic record for a NaN or infinite loss is written.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Stream ids for Rng::derive.
inline constexpr std::uint64_t kInitStream = 0x1417;
inline constexpr std::uint64_t kNoiseStream = 0x2015;
inline constexpr std::uint64_t kBatchStream = 0x3b47;
inline constexpr std::uint64_t kSampleStream = 0x5a3e;

/// Every model of a run, built from the config at initialization.
struct Models {
  data::Vocabulary vocab;
  TextEncoder text;
  damsm::ImageEncoder image;
  Generator gen;
  Discriminator disc;
  std::optional<Generator> gen_ema;

  Models(const TrainConfig& config, data::Vocabulary vocabulary);

  /// Everything a GAN checkpoint stores except optimizer moments.
  nn::TensorList state() const;
  /// Text and image encoder parameters only.
  nn::TensorList encoder_state() const;
  /// The averaged generator when present.
  Generator& sampler() { return gen_ema ? *gen_ema : gen; }
};

damsm::Hyper damsm_hyper(const TrainConfig& config);
/// Builds a config from the text snapshot stored in a checkpoint.
TrainConfig config_from_checkpoint(const Checkpoint& ck);

struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<double> losses;
};

/// Jointly fits both DAMSM encoders on the dataset for config.pretrain_steps.
PretrainResult pretrain_damsm(const TrainConfig& config, const data::Dataset& dataset,
                              const std::filesystem::path& log_path = {});

struct StepRecord {
  std::int64_t step = 0;
  double d_total = 0, d_real = 0, d_fake = 0, d_mismatch = 0, gp = 0;
  double g_adv = 0, g_damsm = 0, g_total = 0;
  // Logits behind the terms, for recomputation (last D update of the step).
  std::vector<double> real_logits, fake_logits, mismatch_logits, g_fake_logits;
};

/// One JSON object, no trailing newline.
std::string to_json_line(const StepRecord& record);

class Trainer {
 public:
  /// `encoders` may be null, in which case both encoders keep their random init.
  Trainer(TrainConfig config, data::Dataset dataset, const Checkpoint* encoders = nullptr);

  /// One (or d_steps_per_g) discriminator update then one generator update.
  StepRecord train_step();

  std::int64_t step() const { return step_; }
  std::int64_t total_steps() const;
  const TrainConfig& config() const { return config_; }
  Models& models() { return *models_; }
  const data::Dataset& dataset() const { return dataset_; }

  Checkpoint checkpoint() const;
  /// Restores a GAN checkpoint; refuses a different config or vocabulary.
  void restore(const Checkpoint& ck);

  /// Where the diagnostic record of a non-finite loss goes (default: none).
  void set_diagnostic_path(std::filesystem::path path) { diagnostic_path_ = std::move(path); }


 private:
  void check_finite(const StepRecord& r) const;
  void update_ema();

  TrainConfig config_;
  data::Dataset dataset_;
  std::unique_ptr<Models> models_;
  std::unique_ptr<data::BatchStream> stream_;
  optim::Adam adam_g_, adam_d_, adam_t_;
  std::int64_t step_ = 0;
  std::filesystem::path diagnostic_path_;
};

struct RunResult {
  std::filesystem::path final_checkpoint;
  std::filesystem::path log_path;
  std::vector<StepRecord> records;  // records produced by this call
};

/// Full loop: optional resume, JSONL log, periodic checkpoints and sample grids, final checkpoint.
RunResult run_training(const TrainConfig& config, const data::Dataset& dataset, const Checkpoint* encoders,
                       const Checkpoint* resume = nullptr);

}  // namespace ssagan
