#pragma once

#include <cstdint>
#include <vector>

#include "ssagan/data.hpp"
#include "ssagan/nn.hpp"

namespace ssagan {

struct TextEncoderConfig {
  std::int64_t embedding_dim = 300;
  std::int64_t hidden = 128;  // per direction
};

struct TextFeatures {
  Tensor words;     // (B, 2*hidden, 18), zero at padded steps
  Tensor sentence;  // (B, 2*hidden)
};

/// Bidirectional LSTM over fixed-length token rows.
///
/// Each direction only advances over the first `length` steps; at padded
/// steps both the cell and hidden state are carried unchanged, so the
/// backward direction starts from zero state at step length-1.
class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(std::int64_t vocab_size, Rng& rng, TextEncoderConfig config = {});

  /// ids: B*18 row-major; lengths: B values in [1, 18].
  TextFeatures encode(const std::vector<std::int64_t>& ids, const std::vector<int>& lengths) const;
  TextFeatures encode(const std::vector<data::TokenSequence>& tokens) const;

  void collect(const std::string& prefix, nn::TensorList& out) const;
  nn::TensorList parameters() const;

  void set_trainable(bool flag);
  bool trainable() const { return trainable_; }

  std::int64_t vocab_size() const { return embedding.dim(0); }
  std::int64_t output_dim() const { return 2 * config_.hidden; }

  struct Direction {
    nn::Linear input;      // embedding_dim -> 4*hidden, gates i, f, g, o
    nn::Linear recurrent;  // hidden -> 4*hidden, no bias
  };

  Tensor embedding;  // (vocab, embedding_dim)
  Direction forward_dir;
  Direction backward_dir;

 private:
  TextEncoderConfig config_;
  bool trainable_ = true;
};

}  // namespace ssagan
