#include "ssagan/discriminator.hpp"

#include <algorithm>

#include "ssagan/error.hpp"

namespace ssagan {

DownBlock::DownBlock(std::int64_t in, std::int64_t out, Rng& rng)
    : conv1(in, out, 4, 2, 1, rng), conv2(out, out, 3, 1, 1, rng) {
  if (in != out) shortcut = nn::Conv2d(in, out, 1, 1, 0, rng, false);
}

Tensor DownBlock::forward(const Tensor& x) const {
  Tensor r = ops::leaky_relu(conv2.forward(ops::leaky_relu(conv1.forward(x), 0.2)), 0.2);
  Tensor s = shortcut.weight.defined() ? shortcut.forward(x) : x;
  return ops::avg_pool2x(s) + r;
}

void DownBlock::collect(const std::string& prefix, nn::TensorList& out) const {
  conv1.collect(nn::join_path(prefix, "conv1"), out);
  conv2.collect(nn::join_path(prefix, "conv2"), out);
  if (shortcut.weight.defined()) shortcut.collect(nn::join_path(prefix, "shortcut"), out);
}

Discriminator::Discriminator(const DiscriminatorConfig& config, Rng& rng) : config_(config) {
  if (config.image_size < 8 || (config.image_size & (config.image_size - 1)))
    throw ConfigError("discriminator image_size must be a power of two >= 8");
  if (config.base_channels < 1) throw ConfigError("discriminator base_channels must be positive");
  const std::int64_t base = config.base_channels;
  conv_img = nn::Conv2d(3, base, 3, 1, 1, rng);
  std::int64_t ch = base;
  int mult = 1;
  for (int s = config.image_size; s > 4; s /= 2) {
    mult = std::min(mult * 2, 8);
    blocks.emplace_back(ch, base * mult, rng);
    ch = base * mult;
  }
  joint_conv = nn::Conv2d(ch + config.cond_dim, 2 * base, 3, 1, 1, rng);
  logit_conv = nn::Conv2d(2 * base, 1, 4, 1, 0, rng);
}

Tensor Discriminator::features(const Tensor& images) const {
  if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != config_.image_size ||
      images.dim(3) != config_.image_size)
    throw InputError("discriminator expects (B,3," + std::to_string(config_.image_size) + "," +
                     std::to_string(config_.image_size) + "), got " + shape_str(images.shape()));
  Tensor h = conv_img.forward(images);
  for (const auto& b : blocks) h = b.forward(h);
  return h;
}

Tensor Discriminator::head(const Tensor& features, const Tensor& sentence) const {
  const std::int64_t batch = features.dim(0);
  if (sentence.rank() != 2 || sentence.dim(0) != batch || sentence.dim(1) != config_.cond_dim)
    throw InputError("discriminator sentence must be (B, " + std::to_string(config_.cond_dim) + ")");
  Tensor s = ops::broadcast_to(ops::reshape(sentence, {batch, config_.cond_dim, 1, 1}),
                               {batch, config_.cond_dim, features.dim(2), features.dim(3)});
  Tensor h = ops::leaky_relu(joint_conv.forward(ops::concat({features, s}, 1)), 0.2);
  return ops::reshape(logit_conv.forward(h), {batch});
}

void Discriminator::collect(const std::string& prefix, nn::TensorList& out) const {
  conv_img.collect(nn::join_path(prefix, "conv_img"), out);
  for (std::size_t k = 0; k < blocks.size(); ++k)
    blocks[k].collect(nn::join_path(prefix, "block" + std::to_string(k + 1)), out);
  joint_conv.collect(nn::join_path(prefix, "joint_conv"), out);
  logit_conv.collect(nn::join_path(prefix, "logit_conv"), out);
}

nn::TensorList Discriminator::parameters() const {
  nn::TensorList out;
  collect("", out);
  return out;
}

}  // namespace ssagan
