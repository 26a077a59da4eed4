#include <algorithm>
#include <array>
#include <cmath>

#include "ssagan/error.hpp"
#include "ssagan/ops.hpp"

namespace ssagan::ops {

namespace {

constexpr int kMaxRank = 4;
using Dims4 = std::array<std::int64_t, kMaxRank>;

Dims4 pad4(const Shape& s) {
  if (s.size() > kMaxRank) throw ContractError("broadcasting supports rank <= 4, got " + shape_str(s));
  Dims4 d{1, 1, 1, 1};
  std::size_t off = kMaxRank - s.size();
  for (std::size_t i = 0; i < s.size(); ++i) d[off + i] = s[i];
  return d;
}

/// Strides of `from` laid over `to` (0 on broadcast axes).
Dims4 broadcast_strides(const Dims4& from, const Dims4& to) {
  Dims4 st{};
  std::int64_t acc = 1;
  for (int i = kMaxRank - 1; i >= 0; --i) {
    st[i] = (from[i] == 1 && to[i] != 1) ? 0 : acc;
    acc *= from[i];
  }
  return st;
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  std::size_t r = std::max(a.size(), b.size());
  Shape out(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    std::int64_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    std::int64_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1)
      throw InputError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    out[i] = std::max(da, db);
  }
  return out;
}

template <class F>
std::vector<Real> binary_kernel(const Tensor& a, const Tensor& b, const Shape& out_shape, F f) {
  std::vector<Real> out(static_cast<std::size_t>(numel(out_shape)));
  const Real* pa = a.ptr();
  const Real* pb = b.ptr();
  if (a.shape() == b.shape()) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(pa[i], pb[i]);
    return out;
  }
  Dims4 o = pad4(out_shape);
  Dims4 sa = broadcast_strides(pad4(a.shape()), o);
  Dims4 sb = broadcast_strides(pad4(b.shape()), o);
  std::size_t k = 0;
  for (std::int64_t i0 = 0; i0 < o[0]; ++i0)
    for (std::int64_t i1 = 0; i1 < o[1]; ++i1)
      for (std::int64_t i2 = 0; i2 < o[2]; ++i2) {
        const Real* ra = pa + i0 * sa[0] + i1 * sa[1] + i2 * sa[2];
        const Real* rb = pb + i0 * sb[0] + i1 * sb[1] + i2 * sb[2];
        for (std::int64_t i3 = 0; i3 < o[3]; ++i3) out[k++] = f(ra[i3 * sa[3]], rb[i3 * sb[3]]);
      }
  return out;
}

template <class F>
std::vector<Real> unary_kernel(const Tensor& x, F f) {
  std::vector<Real> out(static_cast<std::size_t>(x.numel()));
  const Real* p = x.ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(p[i]);
  return out;
}

Tensor grad_to(const Tensor& g, const Tensor& like) {
  return g.shape() == like.shape() ? g : sum_to(g, like.shape());
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  Shape s = broadcast_shape(a.shape(), b.shape());
  return Tensor::make(s, binary_kernel(a, b, s, [](Real x, Real y) { return x + y; }), "add", {a, b},
                      [a, b](const Tensor& g) -> std::vector<Tensor> { return {grad_to(g, a), grad_to(g, b)}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Shape s = broadcast_shape(a.shape(), b.shape());
  return Tensor::make(s, binary_kernel(a, b, s, [](Real x, Real y) { return x - y; }), "sub", {a, b},
                      [a, b](const Tensor& g) -> std::vector<Tensor> { return {grad_to(g, a), grad_to(neg(g), b)}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Shape s = broadcast_shape(a.shape(), b.shape());
  return Tensor::make(s, binary_kernel(a, b, s, [](Real x, Real y) { return x * y; }), "mul", {a, b},
                      [a, b](const Tensor& g) -> std::vector<Tensor> {
                        Tensor ga, gb;
                        if (a.requires_grad()) ga = grad_to(mul(g, b), a);
                        if (b.requires_grad()) gb = grad_to(mul(g, a), b);
                        return {ga, gb};
                      });
}

Tensor div(const Tensor& a, const Tensor& b) {
  Shape s = broadcast_shape(a.shape(), b.shape());
  return Tensor::make(s, binary_kernel(a, b, s, [](Real x, Real y) { return x / y; }), "div", {a, b},
                      [a, b](const Tensor& g) -> std::vector<Tensor> {
                        Tensor ga, gb;
                        if (a.requires_grad()) ga = grad_to(div(g, b), a);
                        if (b.requires_grad()) gb = grad_to(neg(div(mul(g, a), mul(b, b))), b);
                        return {ga, gb};
                      });
}

Tensor add_scalar(const Tensor& x, Real c) {
  return Tensor::make(x.shape(), unary_kernel(x, [c](Real v) { return v + c; }), "add_scalar", {x},
                      [](const Tensor& g) -> std::vector<Tensor> { return {g}; });
}

Tensor mul_scalar(const Tensor& x, Real c) {
  return Tensor::make(x.shape(), unary_kernel(x, [c](Real v) { return v * c; }), "mul_scalar", {x},
                      [c](const Tensor& g) -> std::vector<Tensor> { return {mul_scalar(g, c)}; });
}

Tensor neg(const Tensor& x) {
  return Tensor::make(x.shape(), unary_kernel(x, [](Real v) { return -v; }), "neg", {x},
                      [](const Tensor& g) -> std::vector<Tensor> { return {neg(g)}; });
}

Tensor exp(const Tensor& x) {
  return Tensor::make(x.shape(), unary_kernel(x, [](Real v) { return std::exp(v); }), "exp", {x},
                      [x](const Tensor& g) -> std::vector<Tensor> { return {mul(g, exp(x))}; });
}

Tensor log(const Tensor& x) {
  return Tensor::make(x.shape(), unary_kernel(x, [](Real v) { return std::log(v); }), "log", {x},
                      [x](const Tensor& g) -> std::vector<Tensor> { return {div(g, x)}; });
}

Tensor tanh(const Tensor& x) {
  return Tensor::make(x.shape(), unary_kernel(x, [](Real v) { return std::tanh(v); }), "tanh", {x},
                      [x](const Tensor& g) -> std::vector<Tensor> {
                        Tensor y = tanh(x);
                        return {mul(g, add_scalar(neg(mul(y, y)), 1.0))};
                      });
}

Tensor sigmoid(const Tensor& x) {
  auto f = [](Real v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); };
  return Tensor::make(x.shape(), unary_kernel(x, f), "sigmoid", {x}, [x](const Tensor& g) -> std::vector<Tensor> {
    Tensor y = sigmoid(x);
    return {mul(g, mul(y, add_scalar(neg(y), 1.0)))};
  });
}

Tensor square(const Tensor& x) {
  return Tensor::make(x.shape(), unary_kernel(x, [](Real v) { return v * v; }), "square", {x},
                      [x](const Tensor& g) -> std::vector<Tensor> { return {mul(g, mul_scalar(x, 2.0))}; });
}

Tensor pow(const Tensor& x, Real p) {
  return Tensor::make(x.shape(), unary_kernel(x, [p](Real v) { return std::pow(v, p); }), "pow", {x},
                      [x, p](const Tensor& g) -> std::vector<Tensor> {
                        if (p == 1.0) return {g};
                        return {mul(g, mul_scalar(pow(x, p - 1.0), p))};
                      });
}

Tensor safe_reciprocal(const Tensor& x) {
  return Tensor::make(x.shape(), unary_kernel(x, [](Real v) { return v == 0.0 ? 0.0 : 1.0 / v; }),
                      "safe_reciprocal", {x}, [x](const Tensor& g) -> std::vector<Tensor> {
                        Tensor r = safe_reciprocal(x);
                        return {neg(mul(g, mul(r, r)))};
                      });
}

Tensor sqrt(const Tensor& x) {
  return Tensor::make(x.shape(), unary_kernel(x, [](Real v) { return std::sqrt(v); }), "sqrt", {x},
                      [x](const Tensor& g) -> std::vector<Tensor> {
                        return {mul(g, mul_scalar(safe_reciprocal(sqrt(x)), 0.5))};
                      });
}

Tensor leaky_relu(const Tensor& x, Real slope) {
  return Tensor::make(x.shape(), unary_kernel(x, [slope](Real v) { return v > 0 ? v : slope * v; }), "leaky_relu",
                      {x}, [x, slope](const Tensor& g) -> std::vector<Tensor> {
                        // Piecewise linear: the local slope is a constant, so second derivatives vanish.
                        Tensor gate(x.shape(), unary_kernel(x, [slope](Real v) { return v > 0 ? 1.0 : slope; }));
                        return {mul(g, gate)};
                      });
}

}  // namespace ssagan::ops
