#include "ssagan/text_encoder.hpp"

#include <cmath>

#include "ssagan/error.hpp"

namespace ssagan {

namespace {

using data::kMaxWords;

TextEncoder::Direction make_direction(std::int64_t in, std::int64_t hidden, Rng& rng) {
  TextEncoder::Direction d;
  d.input = nn::Linear(in, 4 * hidden, rng, true);
  d.recurrent = nn::Linear(hidden, 4 * hidden, rng, false);
  // LSTM convention: every weight uses the recurrent fan-in.
  const Real bound = 1.0 / std::sqrt(static_cast<Real>(hidden));
  d.input.weight = Tensor::uniform(d.input.weight.shape(), rng, -bound, bound).set_requires_grad(true);
  d.input.bias = Tensor::uniform(d.input.bias.shape(), rng, -bound, bound).set_requires_grad(true);
  d.recurrent.weight = Tensor::uniform(d.recurrent.weight.shape(), rng, -bound, bound).set_requires_grad(true);
  return d;
}

}  // namespace

TextEncoder::TextEncoder(std::int64_t vocab_size, Rng& rng, TextEncoderConfig config) : config_(config) {
  if (vocab_size < 2) throw ConfigError("text encoder needs a vocabulary of at least the two specials");
  embedding = Tensor::uniform({vocab_size, config.embedding_dim}, rng, -0.1, 0.1).set_requires_grad(true);
  forward_dir = make_direction(config.embedding_dim, config.hidden, rng);
  backward_dir = make_direction(config.embedding_dim, config.hidden, rng);
}

TextFeatures TextEncoder::encode(const std::vector<data::TokenSequence>& tokens) const {
  return encode(data::flat_ids(tokens), data::lengths_of(tokens));
}

TextFeatures TextEncoder::encode(const std::vector<std::int64_t>& ids, const std::vector<int>& lengths) const {
  const auto batch = static_cast<std::int64_t>(lengths.size());
  if (batch < 1) throw InputError("encode_text on an empty batch");
  if (static_cast<std::int64_t>(ids.size()) != batch * kMaxWords)
    throw InputError("encode_text expects " + std::to_string(batch * kMaxWords) + " ids");
  for (auto id : ids)
    if (id < 0 || id >= vocab_size()) throw InputError("token id " + std::to_string(id) + " outside the vocabulary");
  for (int len : lengths)
    if (len < 1 || len > kMaxWords) throw InputError("effective length must lie in [1, 18]");

  const std::int64_t h = config_.hidden;
  Tensor emb = ops::gather_rows(embedding, ids);  // (B*18, E)

  std::vector<Tensor> masks;
  for (int t = 0; t < kMaxWords; ++t) {
    std::vector<Real> m(static_cast<std::size_t>(batch));
    for (std::int64_t b = 0; b < batch; ++b) m[static_cast<std::size_t>(b)] = t < lengths[static_cast<std::size_t>(b)] ? 1.0 : 0.0;
    masks.emplace_back(Shape{batch, 1}, std::move(m));
  }

  auto run = [&](const Direction& dir, bool reverse) {
    Tensor xproj = ops::reshape(dir.input.forward(emb), {batch, kMaxWords, 4 * h});
    Tensor hs = Tensor::zeros({batch, h});
    Tensor cs = Tensor::zeros({batch, h});
    std::vector<Tensor> outputs(kMaxWords);
    for (int k = 0; k < kMaxWords; ++k) {
      const int t = reverse ? kMaxWords - 1 - k : k;
      Tensor gates = ops::reshape(ops::slice(xproj, 1, t, 1), {batch, 4 * h}) + dir.recurrent.forward(hs);
      Tensor i = ops::sigmoid(ops::slice(gates, 1, 0, h));
      Tensor f = ops::sigmoid(ops::slice(gates, 1, h, h));
      Tensor g = ops::tanh(ops::slice(gates, 1, 2 * h, h));
      Tensor o = ops::sigmoid(ops::slice(gates, 1, 3 * h, h));
      Tensor c_new = f * cs + i * g;
      Tensor h_new = o * ops::tanh(c_new);
      const Tensor& m = masks[static_cast<std::size_t>(t)];
      Tensor keep = 1.0 - m;
      cs = m * c_new + keep * cs;
      hs = m * h_new + keep * hs;
      outputs[static_cast<std::size_t>(t)] = m * h_new;
    }
    return std::make_pair(outputs, hs);
  };

  auto [fwd_out, fwd_last] = run(forward_dir, false);
  auto [bwd_out, bwd_last] = run(backward_dir, true);

  std::vector<Tensor> steps;
  for (int t = 0; t < kMaxWords; ++t)
    steps.push_back(ops::reshape(ops::concat({fwd_out[static_cast<std::size_t>(t)], bwd_out[static_cast<std::size_t>(t)]}, 1),
                                 {batch, 2 * h, 1}));
  TextFeatures out;
  out.words = ops::concat(steps, 2);
  out.sentence = ops::concat({fwd_last, bwd_last}, 1);
  return out;
}

void TextEncoder::collect(const std::string& prefix, nn::TensorList& out) const {
  out.push_back({nn::join_path(prefix, "embedding"), embedding});
  forward_dir.input.collect(nn::join_path(prefix, "fwd/input"), out);
  forward_dir.recurrent.collect(nn::join_path(prefix, "fwd/recurrent"), out);
  backward_dir.input.collect(nn::join_path(prefix, "bwd/input"), out);
  backward_dir.recurrent.collect(nn::join_path(prefix, "bwd/recurrent"), out);
}

nn::TensorList TextEncoder::parameters() const {
  nn::TensorList out;
  collect("", out);
  return out;
}

void TextEncoder::set_trainable(bool flag) {
  trainable_ = flag;
  nn::set_requires_grad(parameters(), flag);
}

}  // namespace ssagan
