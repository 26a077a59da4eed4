#pragma once

#include <string>
#include <vector>

#include "ssagan/ops.hpp"
#include "ssagan/rng.hpp"
#include "ssagan/tensor.hpp"

namespace ssagan::nn {

/// A tensor with a stable, slash-separated path ("gen/block3/mask/conv1/weight").
/// Paths name checkpoint blobs, so they must not change between versions.
struct NamedTensor {
  std::string path;
  Tensor tensor;
};
using TensorList = std::vector<NamedTensor>;

std::string join_path(const std::string& prefix, const std::string& name);
std::vector<Tensor> tensors_of(const TensorList& list);

/// y = x W^T + b, x of shape (N, in).
class Linear {
 public:
  Linear() = default;
  Linear(std::int64_t in_features, std::int64_t out_features, Rng& rng, bool bias = true);

  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, TensorList& out) const;

  std::int64_t in_features() const { return weight.dim(1); }
  std::int64_t out_features() const { return weight.dim(0); }

  Tensor weight;  // (out, in)
  Tensor bias;    // (out) or undefined
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::int64_t in_ch, std::int64_t out_ch, int kernel, int stride, int padding, Rng& rng, bool bias = true);

  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, TensorList& out) const;

  std::int64_t in_channels() const { return weight.dim(1); }
  std::int64_t out_channels() const { return weight.dim(0); }

  Tensor weight;  // (out, in, k, k)
  Tensor bias;    // (out) or undefined
  ops::Conv2dGeometry geometry;
};

/// Marks every tensor in the list as trainable or frozen.
void set_requires_grad(const TensorList& params, bool flag);

/// Overwrites values of `dst` with those of `src`, matched by path.
void copy_values(const TensorList& src, const TensorList& dst);

}  // namespace ssagan::nn
