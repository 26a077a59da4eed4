#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ssagan {

using Real = double;
using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Rng;
class Tensor;

/// Maps the gradient of a node's output to gradients of its inputs.
/// Written in terms of Tensor ops, so running it with grad recording enabled
/// yields a differentiable graph (double backward).
using BackwardFn = std::function<std::vector<Tensor>(const Tensor& grad_out)>;

struct GraphNode {
  const char* op = "";
  std::vector<Tensor> inputs;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  std::shared_ptr<std::vector<Real>> storage;
  bool requires_grad = false;
  std::shared_ptr<GraphNode> node;  // null for leaves
};

/// Dense row-major array of Real with reverse-mode autodiff.
///
/// Tensors are cheap handles; copies share storage. Values of non-leaf
/// tensors are immutable. Leaves (parameters, inputs) may be edited in place
/// through mutable_data(), which is how optimizers update weights.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = 0);
  Tensor(Shape shape, std::vector<Real> values);

  static Tensor zeros(const Shape& shape) { return Tensor(shape, 0.0); }
  static Tensor ones(const Shape& shape) { return Tensor(shape, 1.0); }
  static Tensor scalar(Real v) { return Tensor(Shape{}, v); }
  static Tensor randn(const Shape& shape, Rng& rng, Real stddev = 1.0);
  static Tensor uniform(const Shape& shape, Rng& rng, Real lo, Real hi);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  std::int64_t dim(int axis) const;
  std::int64_t numel() const { return static_cast<std::int64_t>(impl_->storage->size()); }

  std::span<const Real> data() const { return *impl_->storage; }
  std::span<Real> mutable_data();
  const Real* ptr() const { return impl_->storage->data(); }
  Real item() const;
  Real operator[](std::int64_t flat) const { return (*impl_->storage)[static_cast<std::size_t>(flat)]; }
  Real at(std::initializer_list<std::int64_t> index) const;

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  /// Only valid on leaves.
  Tensor& set_requires_grad(bool flag);
  bool is_leaf() const { return impl_->node == nullptr; }
  const GraphNode* node() const { return impl_->node.get(); }

  /// Same storage, cut from the graph.
  Tensor detach() const;
  /// Fresh storage, cut from the graph.
  Tensor clone() const;
  std::vector<Real> to_vector() const { return *impl_->storage; }

  TensorImpl* impl() const { return impl_.get(); }
  bool same_as(const Tensor& other) const { return impl_ == other.impl_; }

  /// Builds an op result. Records a graph node when grad mode is on and any
  /// input requires grad.
  static Tensor make(Shape shape, std::vector<Real> values, const char* op, std::vector<Tensor> inputs,
                     BackwardFn backward);

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Thread-local switch for graph recording.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool flag);
};

class NoGradGuard {
 public:
  NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

struct GradOptions {
  /// Record the backward pass itself so the returned gradients can be differentiated again.
  bool create_graph = false;
  /// Seed gradient; defaults to ones for a scalar output.
  Tensor grad_output;
};

/// Gradients of `output` with respect to each of `inputs`. Inputs that do not
/// influence the output get zero tensors of their own shape.
std::vector<Tensor> grad(const Tensor& output, const std::vector<Tensor>& inputs, const GradOptions& options = {});

}  // namespace ssagan
