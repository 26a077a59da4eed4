#include "ssagan/nn.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "ssagan/error.hpp"

namespace ssagan::nn {

std::string join_path(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "/" + name;
}

std::vector<Tensor> tensors_of(const TensorList& list) {
  std::vector<Tensor> out;
  out.reserve(list.size());
  for (const auto& nt : list) out.push_back(nt.tensor);
  return out;
}

namespace {

// PyTorch-style default: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
Tensor fan_in_uniform(const Shape& shape, std::int64_t fan_in, Rng& rng) {
  const Real bound = 1.0 / std::sqrt(static_cast<Real>(fan_in));
  Tensor t = Tensor::uniform(shape, rng, -bound, bound);
  t.set_requires_grad(true);
  return t;
}

}  // namespace

Linear::Linear(std::int64_t in_features, std::int64_t out_features, Rng& rng, bool bias) {
  weight = fan_in_uniform({out_features, in_features}, in_features, rng);
  if (bias) this->bias = fan_in_uniform({out_features}, in_features, rng);
}

Tensor Linear::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != in_features())
    throw InputError("linear layer expects (N, " + std::to_string(in_features()) + "), got " + shape_str(x.shape()));
  Tensor y = ops::matmul(x, weight, false, true);
  return bias.defined() ? y + bias : y;
}

void Linear::collect(const std::string& prefix, TensorList& out) const {
  out.push_back({join_path(prefix, "weight"), weight});
  if (bias.defined()) out.push_back({join_path(prefix, "bias"), bias});
}

Conv2d::Conv2d(std::int64_t in_ch, std::int64_t out_ch, int kernel, int stride, int padding, Rng& rng, bool bias)
    : geometry{stride, padding} {
  const std::int64_t fan_in = in_ch * kernel * kernel;
  weight = fan_in_uniform({out_ch, in_ch, kernel, kernel}, fan_in, rng);
  if (bias) this->bias = fan_in_uniform({out_ch}, fan_in, rng);
}

Tensor Conv2d::forward(const Tensor& x) const {
  Tensor y = ops::conv2d(x, weight, geometry);
  if (!bias.defined()) return y;
  return y + ops::reshape(bias, {1, out_channels(), 1, 1});
}

void Conv2d::collect(const std::string& prefix, TensorList& out) const {
  out.push_back({join_path(prefix, "weight"), weight});
  if (bias.defined()) out.push_back({join_path(prefix, "bias"), bias});
}

void set_requires_grad(const TensorList& params, bool flag) {
  for (auto nt : params) nt.tensor.set_requires_grad(flag);
}

void copy_values(const TensorList& src, const TensorList& dst) {
  std::unordered_map<std::string, const Tensor*> by_path;
  for (const auto& nt : src) by_path.emplace(nt.path, &nt.tensor);
  for (auto nt : dst) {
    auto it = by_path.find(nt.path);
    if (it == by_path.end()) throw InputError("missing tensor " + nt.path);
    if (it->second->shape() != nt.tensor.shape())
      throw InputError("shape mismatch for " + nt.path + ": " + shape_str(it->second->shape()) + " vs " +
                       shape_str(nt.tensor.shape()));
    auto values = it->second->data();
    std::copy(values.begin(), values.end(), nt.tensor.mutable_data().begin());
  }
}

}  // namespace ssagan::nn
