#pragma once

#include <vector>

#include "ssagan/nn.hpp"
#include "ssagan/text_encoder.hpp"

namespace ssagan::damsm {

struct Hyper {
  Real gamma1 = 5.0;
  Real gamma2 = 5.0;
  Real gamma3 = 10.0;
};

struct ImageEncoderConfig {
  int image_size = 64;
  std::int64_t base_channels = 32;
  std::int64_t common_dim = 256;
};

struct ImageFeatures {
  Tensor local;   // (B, D, R)
  Tensor global;  // (B, D)
};

/// Four stride-2 conv blocks. Local regions come from block 3 (grid S/8),
/// the global vector from the mean-pooled block 4.
class ImageEncoder {
 public:
  ImageEncoder() = default;
  ImageEncoder(ImageEncoderConfig config, Rng& rng);

  ImageFeatures encode(const Tensor& images) const;
  void collect(const std::string& prefix, nn::TensorList& out) const;
  nn::TensorList parameters() const;

  std::int64_t regions() const;
  const ImageEncoderConfig& config() const { return config_; }

  std::vector<nn::Conv2d> blocks;
  Tensor local_projection;   // W: (D, C3, 1, 1), no bias
  nn::Linear global_projection;  // W̄: C4 -> D, no bias

 private:
  ImageEncoderConfig config_;
};

// Word-level pipeline. Every function accepts a single pair (rank 2) or a
// batch of pairs (rank 3, leading batch axis).

/// s = e^T v: e (D, T), v (D, R) -> (T, R).
Tensor similarity_matrix(const Tensor& e, const Tensor& v);
/// Softmax over words for each region: columns of the result sum to 1.
Tensor normalize_similarity(const Tensor& s);
/// Attention weights over regions, softmax of gamma1 * s_bar along regions: (T, R).
Tensor attention_weights(const Tensor& s_bar, Real gamma1);
/// c_i = sum_j alpha_ij v_j: -> (T, D).
Tensor region_context(const Tensor& v, const Tensor& s_bar, Real gamma1);
/// Cosine of c_i and e_i per word, 0 for zero vectors: c (T, D), e (D, T) -> (T).
Tensor relevance(const Tensor& c, const Tensor& e);
/// (1/gamma2) log sum_i exp(gamma2 R_i) over the last axis.
Tensor match_score(const Tensor& relevances, Real gamma2);

/// Attention-driven score matrix: [i, j] = R(image i, sentence j), (M, M).
Tensor word_scores(const Tensor& local, const Tensor& words, const std::vector<int>& lengths, const Hyper& hyper);
/// [i, j] = cos(v̄_i, ē_j), (M, M).
Tensor sentence_scores(const Tensor& global, const Tensor& sentence);

struct Posteriors {
  Tensor sentence_given_image;  // row softmax of gamma3 * R
  Tensor image_given_sentence;  // column softmax of gamma3 * R
};
Posteriors matching_posteriors(const Tensor& scores, Real gamma3);

struct Loss {
  Tensor total;
  Tensor words_1, words_2, sentence_1, sentence_2;
  Tensor word_scores;      // (M, M)
  Tensor sentence_scores;  // (M, M)
};

/// Sum over the batch of -log of the matched posteriors, four terms.
Loss damsm_loss(const ImageFeatures& image, const TextFeatures& text, const std::vector<int>& lengths,
                const Hyper& hyper);

}  // namespace ssagan::damsm
