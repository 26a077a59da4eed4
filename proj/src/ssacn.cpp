#include "ssagan/ssacn.hpp"

#include <cmath>

#include "ssagan/error.hpp"

namespace ssagan {

BatchNorm::BatchNorm(std::int64_t channels, NormConfig config)
    : running_mean(Tensor::zeros({channels})), running_scale(Tensor::ones({channels})), config(config) {
  if (config.eps <= 0) throw ConfigError("batch norm eps must be positive");
  if (config.momentum < 0 || config.momentum > 1) throw ConfigError("batch norm momentum must lie in [0, 1]");
}

Tensor BatchNorm::forward(const Tensor& x, Mode mode) {
  const std::int64_t c = running_mean.numel();
  if (x.rank() != 4 || x.dim(1) != c)
    throw InputError("batch norm over " + std::to_string(c) + " channels got " + shape_str(x.shape()));
  const bool batch_stats = mode == Mode::train || config.eval_batch_stats;
  if (!batch_stats) {
    Tensor mu = ops::reshape(running_mean, {1, c, 1, 1});
    Tensor sigma = ops::reshape(running_scale, {1, c, 1, 1});
    return (x - mu) / sigma;
  }
  if (x.dim(0) < 2) throw ConfigError("batch statistics need a batch of at least 2");
  Tensor mu = ops::mean(x, {0, 2, 3}, true);
  Tensor centred = x - mu;
  Tensor var = ops::mean(ops::square(centred), {0, 2, 3}, true);
  Tensor sigma = ops::sqrt(var + config.eps);
  if (mode == Mode::train) {
    auto rm = running_mean.mutable_data();
    auto rs = running_scale.mutable_data();
    const Real k = config.momentum;
    for (std::int64_t i = 0; i < c; ++i) {
      rm[static_cast<std::size_t>(i)] = (1 - k) * rm[static_cast<std::size_t>(i)] + k * mu[i];
      rs[static_cast<std::size_t>(i)] = (1 - k) * rs[static_cast<std::size_t>(i)] + k * sigma[i];
    }
  }
  return centred / sigma;
}

void BatchNorm::collect_state(const std::string& prefix, nn::TensorList& out) const {
  out.push_back({nn::join_path(prefix, "running_mean"), running_mean});
  out.push_back({nn::join_path(prefix, "running_scale"), running_scale});
}

ConditionMlp::ConditionMlp(std::int64_t in, std::int64_t hidden, std::int64_t out, Rng& rng) : two_layer(hidden > 0) {
  if (two_layer) {
    first = nn::Linear(in, hidden, rng);
    second = nn::Linear(hidden, out, rng);
  } else {
    first = nn::Linear(in, out, rng);
  }
}

Tensor ConditionMlp::forward(const Tensor& e) const {
  Tensor y = first.forward(e);
  return two_layer ? second.forward(ops::leaky_relu(y, 0.2)) : y;
}

void ConditionMlp::collect(const std::string& prefix, nn::TensorList& out) const {
  first.collect(nn::join_path(prefix, "fc1"), out);
  if (two_layer) second.collect(nn::join_path(prefix, "fc2"), out);
}

namespace {

void set_values(Tensor& t, Real value) {
  for (auto& v : t.mutable_data()) v = value;
}

}  // namespace

ConditionAffine::ConditionAffine(std::int64_t cond_dim, std::int64_t hidden, std::int64_t channels, Rng& rng)
    : gamma_mlp(cond_dim, hidden, channels, rng), beta_mlp(cond_dim, hidden, channels, rng) {
  nn::Linear& g = gamma_mlp.two_layer ? gamma_mlp.second : gamma_mlp.first;
  nn::Linear& b = beta_mlp.two_layer ? beta_mlp.second : beta_mlp.first;
  set_values(g.weight, 0.0);
  set_values(g.bias, 1.0);
  set_values(b.weight, 0.0);
  set_values(b.bias, 0.0);
}

AffineParams ConditionAffine::forward(const Tensor& sentence) const {
  return {gamma_mlp.forward(sentence), beta_mlp.forward(sentence)};
}

void ConditionAffine::collect(const std::string& prefix, nn::TensorList& out) const {
  gamma_mlp.collect(nn::join_path(prefix, "gamma"), out);
  beta_mlp.collect(nn::join_path(prefix, "beta"), out);
}

Tensor modulate(const Tensor& x_hat, const AffineParams& affine, const Tensor& mask) {
  const std::int64_t b = x_hat.dim(0), c = x_hat.dim(1);
  if (affine.gamma.shape() != Shape{b, c} || affine.beta.shape() != Shape{b, c})
    throw InputError("affine parameters must be (B, C) = " + shape_str({b, c}));
  if (mask.rank() != 4 || mask.dim(0) != b || mask.dim(1) != 1 || mask.dim(2) != x_hat.dim(2) ||
      mask.dim(3) != x_hat.dim(3))
    throw InputError("mask " + shape_str(mask.shape()) + " does not match features " + shape_str(x_hat.shape()));
  Tensor gamma = ops::reshape(affine.gamma, {b, c, 1, 1});
  Tensor beta = ops::reshape(affine.beta, {b, c, 1, 1});
  return mask * (gamma * x_hat + beta);
}

Tensor sscbn(const Tensor& x, const Tensor& sentence, const Tensor& mask, BatchNorm& bn,
             const ConditionAffine& affine, Mode mode) {
  if (sentence.rank() != 2 || sentence.dim(0) != x.dim(0))
    throw InputError("sentence batch does not match the feature batch");
  if (mask.rank() != 4 || mask.dim(2) != x.dim(2) || mask.dim(3) != x.dim(3))
    throw InputError("mask " + shape_str(mask.shape()) + " does not match features " + shape_str(x.shape()));
  return modulate(bn.forward(x, mode), affine.forward(sentence), mask);
}

MaskPredictor::MaskPredictor(std::int64_t channels, std::int64_t hidden, Rng& rng)
    : conv1(channels, hidden, 3, 1, 1, rng), conv2(hidden, 1, 1, 1, 0, rng) {
  if (hidden < 1) throw ConfigError("mask predictor needs a positive hidden width");
}

Tensor MaskPredictor::forward(const Tensor& h) const {
  return ops::sigmoid(conv2.forward(ops::leaky_relu(conv1.forward(h), 0.2)));
}

void MaskPredictor::collect(const std::string& prefix, nn::TensorList& out) const {
  conv1.collect(nn::join_path(prefix, "conv1"), out);
  conv2.collect(nn::join_path(prefix, "conv2"), out);
}

SsacnBlock::SsacnBlock(const SsacnConfig& config, Rng& rng) : config_(config) {
  if (config.in_channels < 1 || config.out_channels < 1) throw ConfigError("block channel counts must be positive");
  mask = MaskPredictor(config.in_channels, config.mask_hidden, rng);
  norm1 = BatchNorm(config.in_channels, config.norm);
  affine1 = ConditionAffine(config.cond_dim, config.affine_hidden, config.in_channels, rng);
  conv1 = nn::Conv2d(config.in_channels, config.out_channels, 3, 1, 1, rng);
  norm2 = BatchNorm(config.out_channels, config.norm);
  affine2 = ConditionAffine(config.cond_dim, config.affine_hidden, config.out_channels, rng);
  conv2 = nn::Conv2d(config.out_channels, config.out_channels, 3, 1, 1, rng);
  if (config.in_channels != config.out_channels)
    shortcut = nn::Conv2d(config.in_channels, config.out_channels, 1, 1, 0, rng);
}

Tensor SsacnBlock::upsampled(const Tensor& f_prev) const {
  if (f_prev.rank() != 4 || f_prev.dim(1) != config_.in_channels || f_prev.dim(2) != f_prev.dim(3))
    throw InputError("block expects square (B," + std::to_string(config_.in_channels) + ",h,h), got " +
                     shape_str(f_prev.shape()));
  return config_.upsample ? ops::upsample_bilinear2x(f_prev) : f_prev;
}

BlockOutput SsacnBlock::forward(const Tensor& f_prev, const Tensor& sentence, Mode mode, bool mask_enabled) {
  Tensor h = upsampled(f_prev);
  Tensor m = mask.forward(h);
  if (mask_enabled) return run(h, sentence, mode, m, m);
  return run(h, sentence, mode, m, Tensor::ones(m.shape()));
}

BlockOutput SsacnBlock::forward_with_gate(const Tensor& f_prev, const Tensor& sentence, Mode mode, const Tensor& gate) {
  Tensor h = upsampled(f_prev);
  return run(h, sentence, mode, mask.forward(h), gate);
}

BlockOutput SsacnBlock::run(const Tensor& h, const Tensor& sentence, Mode mode, const Tensor& predicted,
                            const Tensor& gate) {
  Tensor a = conv1.forward(ops::leaky_relu(sscbn(h, sentence, gate, norm1, affine1, mode), 0.2));
  Tensor b = conv2.forward(ops::leaky_relu(sscbn(a, sentence, gate, norm2, affine2, mode), 0.2));
  Tensor skip = shortcut.weight.defined() ? shortcut.forward(h) : h;
  return {skip + b, predicted};
}

void SsacnBlock::collect(const std::string& prefix, nn::TensorList& out) const {
  mask.collect(nn::join_path(prefix, "mask"), out);
  affine1.collect(nn::join_path(prefix, "affine1"), out);
  conv1.collect(nn::join_path(prefix, "conv1"), out);
  affine2.collect(nn::join_path(prefix, "affine2"), out);
  conv2.collect(nn::join_path(prefix, "conv2"), out);
  if (shortcut.weight.defined()) shortcut.collect(nn::join_path(prefix, "shortcut"), out);
}

void SsacnBlock::collect_state(const std::string& prefix, nn::TensorList& out) const {
  norm1.collect_state(nn::join_path(prefix, "norm1"), out);
  norm2.collect_state(nn::join_path(prefix, "norm2"), out);
}

}  // namespace ssagan
