#include "ssagan/damsm.hpp"

#include <cmath>

#include "ssagan/error.hpp"
#include "ssagan/log.hpp"

namespace ssagan::damsm {

ImageEncoder::ImageEncoder(ImageEncoderConfig config, Rng& rng) : config_(config) {
  if (config.image_size < 32 || (config.image_size & (config.image_size - 1)))
    throw ConfigError("DAMSM image encoder needs a power-of-two image size >= 32");
  if (config.base_channels < 1 || config.common_dim < 1) throw ConfigError("DAMSM channel counts must be positive");
  std::int64_t in = 3;
  for (std::int64_t mult : {1, 2, 4, 8}) {
    blocks.emplace_back(in, config.base_channels * mult, 3, 2, 1, rng, true);
    in = config.base_channels * mult;
  }
  const std::int64_t c3 = config.base_channels * 4;
  const Real bound = 1.0 / std::sqrt(static_cast<Real>(c3));
  local_projection = Tensor::uniform({config.common_dim, c3, 1, 1}, rng, -bound, bound).set_requires_grad(true);
  global_projection = nn::Linear(in, config.common_dim, rng, false);
}

std::int64_t ImageEncoder::regions() const {
  const std::int64_t g = config_.image_size / 8;
  return g * g;
}

ImageFeatures ImageEncoder::encode(const Tensor& images) const {
  if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != config_.image_size ||
      images.dim(3) != config_.image_size)
    throw InputError("DAMSM image encoder expects (B,3," + std::to_string(config_.image_size) + "," +
                     std::to_string(config_.image_size) + "), got " + shape_str(images.shape()));
  Tensor h = images;
  Tensor tap;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    h = ops::leaky_relu(blocks[k].forward(h), 0.2);
    if (k == 2) tap = h;
  }
  const std::int64_t batch = images.dim(0);
  ImageFeatures out;
  Tensor local = ops::conv2d(tap, local_projection, {});
  out.local = ops::reshape(local, {batch, config_.common_dim, regions()});
  out.global = global_projection.forward(ops::mean(h, {2, 3}, false));
  return out;
}

void ImageEncoder::collect(const std::string& prefix, nn::TensorList& out) const {
  for (std::size_t k = 0; k < blocks.size(); ++k)
    blocks[k].collect(nn::join_path(prefix, "block" + std::to_string(k + 1)), out);
  out.push_back({nn::join_path(prefix, "local_projection"), local_projection});
  global_projection.collect(nn::join_path(prefix, "global_projection"), out);
}

nn::TensorList ImageEncoder::parameters() const {
  nn::TensorList out;
  collect("", out);
  return out;
}

namespace {

void require_pair_rank(const Tensor& t, const char* what) {
  if (t.rank() != 2 && t.rank() != 3) throw InputError(std::string(what) + " must be rank 2 or 3");
}

}  // namespace

Tensor similarity_matrix(const Tensor& e, const Tensor& v) {
  require_pair_rank(e, "word features");
  require_pair_rank(v, "region features");
  return ops::matmul(e, v, true, false);
}

Tensor normalize_similarity(const Tensor& s) { return ops::softmax(s, -2); }

Tensor attention_weights(const Tensor& s_bar, Real gamma1) { return ops::softmax(s_bar * gamma1, -1); }

Tensor region_context(const Tensor& v, const Tensor& s_bar, Real gamma1) {
  return ops::matmul(attention_weights(s_bar, gamma1), v, false, true);
}

Tensor relevance(const Tensor& c, const Tensor& e) {
  Tensor et = e.rank() == 2 ? ops::permute(e, {1, 0}) : ops::permute(e, {0, 2, 1});
  Tensor r = ops::cosine_similarity(c, et, -1);
  NoGradGuard guard;
  Tensor cn = ops::sum(ops::square(c), {-1}, false);
  Tensor en = ops::sum(ops::square(et), {-1}, false);
  for (std::int64_t i = 0; i < cn.numel(); ++i)
    if (cn[i] == 0.0 || en[i] == 0.0) {
      warn("zero vector in word relevance; cosine taken as 0");
      break;
    }
  return r;
}

Tensor match_score(const Tensor& relevances, Real gamma2) {
  return ops::logsumexp(relevances * gamma2, -1, false) / gamma2;
}

Tensor word_scores(const Tensor& local, const Tensor& words, const std::vector<int>& lengths, const Hyper& hyper) {
  const std::int64_t m = local.dim(0);
  if (words.dim(0) != m || static_cast<std::int64_t>(lengths.size()) != m)
    throw InputError("word_scores needs equal image and sentence counts");
  if (words.dim(1) != local.dim(1)) throw InputError("word and region features differ in dimension");
  const std::int64_t d = local.dim(1);
  std::vector<Tensor> columns;
  for (std::int64_t j = 0; j < m; ++j) {
    const int t = lengths[static_cast<std::size_t>(j)];
    if (t < 1 || t > words.dim(2)) throw InputError("effective length out of range");
    Tensor e = ops::slice(ops::slice(words, 0, j, 1), 2, 0, t);  // (1, D, T)
    e = ops::broadcast_to(e, {m, d, t});
    Tensor s = similarity_matrix(e, local);
    Tensor c = region_context(local, normalize_similarity(s), hyper.gamma1);
    Tensor score = match_score(relevance(c, e), hyper.gamma2);  // (M)
    columns.push_back(ops::reshape(score, {m, 1}));
  }
  return ops::concat(columns, 1);
}

Tensor sentence_scores(const Tensor& global, const Tensor& sentence) {
  const std::int64_t m = global.dim(0);
  if (sentence.dim(0) != m || sentence.dim(1) != global.dim(1))
    throw InputError("sentence_scores needs matching (M, D) inputs");
  const std::int64_t d = global.dim(1);
  Tensor a = ops::broadcast_to(ops::reshape(global, {m, 1, d}), {m, m, d});
  Tensor b = ops::broadcast_to(ops::reshape(sentence, {1, m, d}), {m, m, d});
  return ops::cosine_similarity(a, b, 2);
}

Posteriors matching_posteriors(const Tensor& scores, Real gamma3) {
  if (scores.rank() != 2 || scores.dim(0) != scores.dim(1)) throw InputError("posteriors need a square score matrix");
  Tensor z = scores * gamma3;
  return {ops::softmax(z, 1), ops::softmax(z, 0)};
}

namespace {

// -sum_i log softmax(gamma3 R)_ii along `axis` (1: over sentences, 0: over images).
Tensor neg_log_diagonal(const Tensor& scores, Real gamma3, int axis) {
  const std::int64_t m = scores.dim(0);
  Tensor z = scores * gamma3;
  Tensor eye = Tensor::zeros({m, m});
  for (std::int64_t i = 0; i < m; ++i) eye.mutable_data()[static_cast<std::size_t>(i * m + i)] = 1.0;
  return ops::sum(ops::logsumexp(z, axis, false)) - ops::sum(z * eye);
}

}  // namespace

Loss damsm_loss(const ImageFeatures& image, const TextFeatures& text, const std::vector<int>& lengths,
                const Hyper& hyper) {
  if (hyper.gamma1 <= 0 || hyper.gamma2 <= 0 || hyper.gamma3 <= 0) throw ConfigError("DAMSM gammas must be positive");
  const std::int64_t m = image.local.dim(0);
  if (m < 2) warn("DAMSM loss on a batch of " + std::to_string(m) + ": mismatch terms are vacuous");
  Loss out;
  out.word_scores = word_scores(image.local, text.words, lengths, hyper);
  out.sentence_scores = sentence_scores(image.global, text.sentence);
  out.words_1 = neg_log_diagonal(out.word_scores, hyper.gamma3, 1);
  out.words_2 = neg_log_diagonal(out.word_scores, hyper.gamma3, 0);
  out.sentence_1 = neg_log_diagonal(out.sentence_scores, hyper.gamma3, 1);
  out.sentence_2 = neg_log_diagonal(out.sentence_scores, hyper.gamma3, 0);
  out.total = out.words_1 + out.words_2 + out.sentence_1 + out.sentence_2;
  return out;
}

}  // namespace ssagan::damsm
