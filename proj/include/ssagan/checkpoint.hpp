#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ssagan/nn.hpp"

namespace ssagan {

/// Tar archive holding manifest.txt, vocab.txt, config.txt and one
/// little-endian float64 blob per tensor.
struct Checkpoint {
  std::string kind;  // "damsm" or "gan"
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  std::uint64_t vocab_hash = 0;
  std::uint64_t config_hash = 0;
  std::string config_text;
  std::vector<std::string> vocab_tokens;
  std::map<std::string, std::int64_t> counters;  // optimizer step counts etc.

  struct Blob {
    Shape shape;
    std::vector<Real> values;
  };
  std::map<std::string, Blob> blobs;

  void put(const nn::TensorList& tensors);
  /// Copies stored values into every target; a missing path or a shape mismatch throws IoError.
  void restore(const nn::TensorList& targets) const;
  bool has(const std::string& path) const { return blobs.count(path) > 0; }
  Tensor tensor(const std::string& path) const;
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ssagan
