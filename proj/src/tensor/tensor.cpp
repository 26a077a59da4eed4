#include "ssagan/tensor.hpp"

#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "ssagan/error.hpp"
#include "ssagan/ops.hpp"
#include "ssagan/rng.hpp"

namespace ssagan {

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw ContractError("negative dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, Real fill) : impl_(std::make_shared<TensorImpl>()) {
  auto n = ssagan::numel(shape);
  impl_->shape = std::move(shape);
  impl_->storage = std::make_shared<std::vector<Real>>(static_cast<std::size_t>(n), fill);
}

Tensor::Tensor(Shape shape, std::vector<Real> values) : impl_(std::make_shared<TensorImpl>()) {
  if (ssagan::numel(shape) != static_cast<std::int64_t>(values.size()))
    throw ContractError("tensor of shape " + shape_str(shape) + " given " + std::to_string(values.size()) +
                        " values");
  impl_->shape = std::move(shape);
  impl_->storage = std::make_shared<std::vector<Real>>(std::move(values));
}

Tensor Tensor::randn(const Shape& shape, Rng& rng, Real stddev) {
  Tensor t(shape);
  for (auto& v : *t.impl_->storage) v = stddev * rng.normal();
  return t;
}

Tensor Tensor::uniform(const Shape& shape, Rng& rng, Real lo, Real hi) {
  Tensor t(shape);
  for (auto& v : *t.impl_->storage) v = rng.uniform(lo, hi);
  return t;
}

std::int64_t Tensor::dim(int axis) const {
  int r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw ContractError("axis out of range for shape " + shape_str(shape()));
  return impl_->shape[static_cast<std::size_t>(axis)];
}

std::span<Real> Tensor::mutable_data() {
  if (!is_leaf()) throw ContractError("mutable_data() on a non-leaf tensor");
  return *impl_->storage;
}

Real Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return (*impl_->storage)[0];
}

Real Tensor::at(std::initializer_list<std::int64_t> index) const {
  if (static_cast<int>(index.size()) != rank()) throw ContractError("at(): index rank mismatch");
  std::int64_t flat = 0;
  int axis = 0;
  for (auto i : index) {
    auto d = impl_->shape[static_cast<std::size_t>(axis++)];
    if (i < 0 || i >= d) throw ContractError("at(): index out of range");
    flat = flat * d + i;
  }
  return (*impl_->storage)[static_cast<std::size_t>(flat)];
}

Tensor& Tensor::set_requires_grad(bool flag) {
  if (!is_leaf()) throw ContractError("set_requires_grad on a non-leaf tensor");
  impl_->requires_grad = flag;
  return *this;
}

Tensor Tensor::detach() const {
  Tensor t;
  t.impl_ = std::make_shared<TensorImpl>();
  t.impl_->shape = impl_->shape;
  t.impl_->storage = impl_->storage;
  return t;
}

Tensor Tensor::clone() const { return Tensor(impl_->shape, *impl_->storage); }

Tensor Tensor::make(Shape shape, std::vector<Real> values, const char* op, std::vector<Tensor> inputs,
                    BackwardFn backward) {
  Tensor t(std::move(shape), std::move(values));
  if (!GradMode::enabled()) return t;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return t;
  t.impl_->requires_grad = true;
  auto node = std::make_shared<GraphNode>();
  node->op = op;
  node->inputs = std::move(inputs);
  node->backward = std::move(backward);
  t.impl_->node = std::move(node);
  return t;
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set_enabled(bool flag) { g_grad_enabled = flag; }

std::vector<Tensor> grad(const Tensor& output, const std::vector<Tensor>& inputs, const GradOptions& options) {
  std::vector<Tensor> result;
  result.reserve(inputs.size());
  if (!output.requires_grad()) {
    for (const auto& in : inputs) result.push_back(Tensor::zeros(in.shape()));
    return result;
  }

  Tensor seed = options.grad_output;
  if (!seed.defined()) {
    if (output.numel() != 1) throw ContractError("grad() of a non-scalar output needs grad_output");
    seed = Tensor::ones(output.shape());
  } else if (seed.shape() != output.shape()) {
    throw ContractError("grad_output shape mismatch");
  }

  std::unordered_set<const TensorImpl*> targets;
  for (const auto& in : inputs) targets.insert(in.impl());

  // Post-order DFS: every node appears after all of its inputs.
  std::vector<TensorImpl*> order;
  std::unordered_map<const TensorImpl*, bool> needed;
  {
    struct Frame {
      TensorImpl* impl;
      std::size_t next;
    };
    std::unordered_set<const TensorImpl*> visited;
    std::vector<Frame> stack{{output.impl(), 0}};
    visited.insert(output.impl());
    while (!stack.empty()) {
      auto& top = stack.back();
      const GraphNode* node = top.impl->node.get();
      if (node && top.next < node->inputs.size()) {
        TensorImpl* child = node->inputs[top.next++].impl();
        if (child && child->requires_grad && visited.insert(child).second) stack.push_back({child, 0});
        continue;
      }
      TensorImpl* done = top.impl;
      stack.pop_back();
      bool need = targets.count(done) > 0;
      if (done->node)
        for (const auto& in : done->node->inputs)
          if (in.requires_grad()) need = need || needed[in.impl()];
      needed[done] = need;
      order.push_back(done);
    }
  }

  bool previous = GradMode::enabled();
  GradMode::set_enabled(options.create_graph);
  struct Restore {
    bool flag;
    ~Restore() { GradMode::set_enabled(flag); }
  } restore{previous};

  std::unordered_map<const TensorImpl*, Tensor> grads;
  grads.emplace(output.impl(), options.create_graph ? seed : seed.detach());
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* impl = *it;
    if (!needed[impl] || !impl->node) continue;
    auto found = grads.find(impl);
    if (found == grads.end()) continue;
    Tensor upstream = found->second;
    if (!targets.count(impl)) grads.erase(found);
    const GraphNode& node = *impl->node;
    std::vector<Tensor> local = node.backward(upstream);
    if (local.size() != node.inputs.size())
      throw ContractError(std::string("backward of ") + node.op + " returned wrong arity");
    for (std::size_t i = 0; i < local.size(); ++i) {
      const Tensor& in = node.inputs[i];
      if (!in.requires_grad() || !needed[in.impl()] || !local[i].defined()) continue;
      if (local[i].shape() != in.shape())
        throw ContractError(std::string("backward of ") + node.op + " produced gradient " +
                            shape_str(local[i].shape()) + " for input " + shape_str(in.shape()));
      auto slot = grads.find(in.impl());
      if (slot == grads.end())
        grads.emplace(in.impl(), local[i]);
      else
        slot->second = ops::add(slot->second, local[i]);
    }
  }

  for (const auto& in : inputs) {
    auto found = grads.find(in.impl());
    result.push_back(found == grads.end() ? Tensor::zeros(in.shape()) : found->second);
  }
  return result;
}

}  // namespace ssagan
