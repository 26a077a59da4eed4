#include "ssagan/generator.hpp"

#include "ssagan/error.hpp"

namespace ssagan {

std::vector<std::int64_t> channel_schedule(int stages, std::int64_t base_channels) {
  static const std::int64_t mult[] = {8, 8, 8, 8, 4, 2, 1};
  if (stages < 3 || stages > 7) throw ConfigError("generator stages must lie in [3, 7], got " + std::to_string(stages));
  if (base_channels < 1) throw ConfigError("generator base_channels must be positive");
  std::vector<std::int64_t> out;
  for (int k = 0; k < stages; ++k) out.push_back(base_channels * mult[k]);
  return out;
}

GeneratorConfig configure_scale(int stages, std::int64_t base_channels) {
  channel_schedule(stages, base_channels);
  GeneratorConfig c;
  c.stages = stages;
  c.base_channels = base_channels;
  return c;
}

Generator::Generator(const GeneratorConfig& config, Rng& rng) : config_(config) {
  const auto ch = channel_schedule(config.stages, config.base_channels);
  set_mask_enabled(config.mask_enabled);
  projection = nn::Linear(kNoiseDim, 4 * 4 * ch[0], rng);
  for (int k = 0; k < config.stages; ++k) {
    SsacnConfig b;
    b.in_channels = k == 0 ? ch[0] : ch[static_cast<std::size_t>(k - 1)];
    b.out_channels = ch[static_cast<std::size_t>(k)];
    b.upsample = k > 0;
    b.cond_dim = config.cond_dim;
    b.affine_hidden = config.affine_hidden;
    b.mask_hidden = config.mask_hidden;
    b.norm = config.norm;
    blocks.emplace_back(b, rng);
  }
  head = nn::Conv2d(ch.back(), 3, 3, 1, 1, rng);
}

void Generator::set_mask_enabled(std::vector<bool> enabled) {
  if (enabled.empty()) enabled.assign(static_cast<std::size_t>(config_.stages), true);
  if (static_cast<int>(enabled.size()) != config_.stages)
    throw ConfigError("mask_enabled needs one flag per generator stage");
  config_.mask_enabled = std::move(enabled);
}

Generated Generator::generate(const Tensor& z, const Tensor& sentence, Mode mode) {
  if (z.rank() != 2 || z.dim(1) != kNoiseDim) throw InputError("noise must be (B, 100), got " + shape_str(z.shape()));
  if (sentence.rank() != 2 || sentence.dim(1) != config_.cond_dim)
    throw InputError("sentence must be (B, " + std::to_string(config_.cond_dim) + "), got " +
                     shape_str(sentence.shape()));
  if (z.dim(0) != sentence.dim(0)) throw InputError("noise and sentence batch sizes differ");
  const std::int64_t batch = z.dim(0);
  Generated out;
  Tensor h = ops::reshape(projection.forward(z), {batch, blocks.front().config().in_channels, 4, 4});
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    auto r = blocks[k].forward(h, sentence, mode, config_.mask_enabled[k]);
    h = r.features;
    out.masks.push_back(r.mask);
  }
  out.image = ops::tanh(head.forward(ops::leaky_relu(h, 0.2)));
  return out;
}

void Generator::collect(const std::string& prefix, nn::TensorList& out) const {
  projection.collect(nn::join_path(prefix, "projection"), out);
  for (std::size_t k = 0; k < blocks.size(); ++k)
    blocks[k].collect(nn::join_path(prefix, "block" + std::to_string(k + 1)), out);
  head.collect(nn::join_path(prefix, "head"), out);
}

void Generator::collect_state(const std::string& prefix, nn::TensorList& out) const {
  for (std::size_t k = 0; k < blocks.size(); ++k)
    blocks[k].collect_state(nn::join_path(prefix, "block" + std::to_string(k + 1)), out);
}

nn::TensorList Generator::parameters() const {
  nn::TensorList out;
  collect("", out);
  return out;
}

}  // namespace ssagan
