#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ssagan/trainer.hpp"

namespace ssagan::commands {

/// A trained run reloaded for sampling.
struct LoadedRun {
  TrainConfig config;
  std::unique_ptr<Models> models;
};
LoadedRun load_run(const std::filesystem::path& ckpt);

/// Tokens of a caption; throws InputError when no word is in the vocabulary.
data::TokenSequence tokenize_checked(const std::string& caption, const data::Vocabulary& vocab);

/// Replaces whole words OLD by NEW; throws InputError when OLD does not occur.
std::string apply_swap(const std::string& caption, const std::string& old_word, const std::string& new_word);

/// n noise vectors for a sampling seed, shared by generate, masks and edit.
Tensor sampling_noise(std::uint64_t seed, std::int64_t n);

/// Images for each caption variant under the same noise: result[v] is (n, 3, S, S).
std::vector<Generated> sample_variants(Models& models, const std::vector<std::string>& captions, const Tensor& z);

struct SampleOptions {
  std::filesystem::path ckpt;
  std::string caption;
  std::vector<std::pair<std::string, std::string>> swaps;
  std::uint64_t seed = 0;
  int n = 4;
  std::filesystem::path out;
};

/// Writes <out>/generated.png: one row per sample.
std::filesystem::path generate(const SampleOptions& options);
/// Writes <out>/<sample>_stage<k>_mask.png for every stage.
std::vector<std::filesystem::path> masks(const SampleOptions& options);
/// Writes <out>/edit.png: one row per sample, one column per variant (original first).
std::filesystem::path edit(const SampleOptions& options);

struct EvalOptions {
  std::filesystem::path ckpt;
  int n = 64;
  std::filesystem::path out;
  std::string dataset_root;  // empty: the run's own dataset
  int classifier_steps = 1500;
};

struct EvalRecord {
  double is_mean = 0, is_std = 0, fid = 0;
  int n_samples = 0;
  std::string backend_id;
};
EvalRecord evaluate(const EvalOptions& options);

/// Trains the toy-grammar classifier used for IS and returns class probabilities of `images`.
Tensor toy_classifier_probs(const Tensor& train_images, const std::vector<int>& labels, const Tensor& images,
                            int steps, std::uint64_t seed);

void pretrain(const TrainConfig& config);
RunResult train(const TrainConfig& config, const std::filesystem::path& resume);
void make_toy(int n, int image_size, std::uint64_t seed, const std::filesystem::path& out);

}  // namespace ssagan::commands
