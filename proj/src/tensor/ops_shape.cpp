#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "ssagan/error.hpp"
#include "ssagan/ops.hpp"

namespace ssagan::ops {

namespace {

constexpr int kMaxRank = 4;
using Dims4 = std::array<std::int64_t, kMaxRank>;

Dims4 pad4(const Shape& s) {
  if (s.size() > kMaxRank) throw ContractError("rank <= 4 required, got " + shape_str(s));
  Dims4 d{1, 1, 1, 1};
  std::size_t off = kMaxRank - s.size();
  for (std::size_t i = 0; i < s.size(); ++i) d[off + i] = s[i];
  return d;
}

int normalize_axis(int axis, int rank) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw ContractError("axis out of range");
  return axis;
}

struct AxisSplit {
  std::int64_t outer = 1, mid = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, int axis) {
  AxisSplit r;
  for (int i = 0; i < static_cast<int>(s.size()); ++i) {
    if (i < axis)
      r.outer *= s[i];
    else if (i == axis)
      r.mid = s[i];
    else
      r.inner *= s[i];
  }
  return r;
}

}  // namespace

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel())
    throw ContractError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  Shape original = x.shape();
  return Tensor::make(std::move(shape), x.to_vector(), "reshape", {x},
                      [original](const Tensor& g) -> std::vector<Tensor> { return {reshape(g, original)}; });
}

Tensor permute(const Tensor& x, const std::vector<int>& perm) {
  const int r = x.rank();
  if (static_cast<int>(perm.size()) != r || r > kMaxRank) throw ContractError("permute: bad permutation");
  Shape out_shape(r);
  Dims4 in_strides{};
  {
    std::int64_t acc = 1;
    for (int i = r - 1; i >= 0; --i) {
      in_strides[i] = acc;
      acc *= x.shape()[i];
    }
  }
  Dims4 o{1, 1, 1, 1}, st{0, 0, 0, 0};
  std::vector<int> inverse(r);
  for (int i = 0; i < r; ++i) {
    out_shape[i] = x.shape()[perm[i]];
    inverse[perm[i]] = i;
    o[kMaxRank - r + i] = out_shape[i];
    st[kMaxRank - r + i] = in_strides[perm[i]];
  }
  std::vector<Real> out(static_cast<std::size_t>(x.numel()));
  const Real* p = x.ptr();
  std::size_t k = 0;
  for (std::int64_t a = 0; a < o[0]; ++a)
    for (std::int64_t b = 0; b < o[1]; ++b)
      for (std::int64_t c = 0; c < o[2]; ++c)
        for (std::int64_t d = 0; d < o[3]; ++d) out[k++] = p[a * st[0] + b * st[1] + c * st[2] + d * st[3]];
  return Tensor::make(out_shape, std::move(out), "permute", {x},
                      [inverse](const Tensor& g) -> std::vector<Tensor> { return {permute(g, inverse)}; });
}

Tensor broadcast_to(const Tensor& x, const Shape& shape) {
  if (x.shape() == shape) return x;
  Dims4 from = pad4(x.shape());
  Dims4 to = pad4(shape);
  if (shape.size() < x.shape().size()) throw ContractError("broadcast_to: rank decrease");
  Dims4 st{};
  std::int64_t acc = 1;
  for (int i = kMaxRank - 1; i >= 0; --i) {
    if (from[i] != to[i] && from[i] != 1)
      throw InputError("broadcast_to " + shape_str(x.shape()) + " -> " + shape_str(shape));
    st[i] = from[i] == 1 ? 0 : acc;
    acc *= from[i];
  }
  std::vector<Real> out(static_cast<std::size_t>(numel(shape)));
  const Real* p = x.ptr();
  std::size_t k = 0;
  for (std::int64_t a = 0; a < to[0]; ++a)
    for (std::int64_t b = 0; b < to[1]; ++b)
      for (std::int64_t c = 0; c < to[2]; ++c)
        for (std::int64_t d = 0; d < to[3]; ++d) out[k++] = p[a * st[0] + b * st[1] + c * st[2] + d * st[3]];
  Shape original = x.shape();
  return Tensor::make(shape, std::move(out), "broadcast_to", {x},
                      [original](const Tensor& g) -> std::vector<Tensor> { return {sum_to(g, original)}; });
}

Tensor sum_to(const Tensor& x, const Shape& shape) {
  if (x.shape() == shape) return x;
  if (shape.size() > x.shape().size()) throw ContractError("sum_to: rank increase");
  Dims4 from = pad4(x.shape());
  Dims4 to = pad4(shape);
  Dims4 st{};
  std::int64_t acc = 1;
  for (int i = kMaxRank - 1; i >= 0; --i) {
    if (from[i] != to[i] && to[i] != 1)
      throw ContractError("sum_to " + shape_str(x.shape()) + " -> " + shape_str(shape));
    st[i] = (to[i] == 1 && from[i] != 1) ? 0 : acc;
    acc *= to[i];
  }
  std::vector<Real> out(static_cast<std::size_t>(numel(shape)), 0.0);
  const Real* p = x.ptr();
  std::size_t k = 0;
  for (std::int64_t a = 0; a < from[0]; ++a)
    for (std::int64_t b = 0; b < from[1]; ++b)
      for (std::int64_t c = 0; c < from[2]; ++c) {
        Real* row = out.data() + a * st[0] + b * st[1] + c * st[2];
        for (std::int64_t d = 0; d < from[3]; ++d) row[d * st[3]] += p[k++];
      }
  Shape original = x.shape();
  return Tensor::make(shape, std::move(out), "sum_to", {x},
                      [original](const Tensor& g) -> std::vector<Tensor> { return {broadcast_to(g, original)}; });
}

Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t length) {
  axis = normalize_axis(axis, x.rank());
  const std::int64_t full = x.shape()[axis];
  if (start < 0 || length < 0 || start + length > full) throw ContractError("slice out of range");
  AxisSplit s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  std::vector<Real> out(static_cast<std::size_t>(s.outer * length * s.inner));
  const Real* p = x.ptr();
  for (std::int64_t o = 0; o < s.outer; ++o)
    std::copy_n(p + (o * full + start) * s.inner, length * s.inner, out.data() + o * length * s.inner);
  return Tensor::make(out_shape, std::move(out), "slice", {x},
                      [axis, start, full](const Tensor& g) -> std::vector<Tensor> {
                        return {pad_axis(g, axis, start, full)};
                      });
}

Tensor pad_axis(const Tensor& x, int axis, std::int64_t start, std::int64_t full) {
  axis = normalize_axis(axis, x.rank());
  const std::int64_t length = x.shape()[axis];
  if (start < 0 || start + length > full) throw ContractError("pad_axis out of range");
  AxisSplit s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = full;
  std::vector<Real> out(static_cast<std::size_t>(s.outer * full * s.inner), 0.0);
  const Real* p = x.ptr();
  for (std::int64_t o = 0; o < s.outer; ++o)
    std::copy_n(p + o * length * s.inner, length * s.inner, out.data() + (o * full + start) * s.inner);
  return Tensor::make(out_shape, std::move(out), "pad_axis", {x},
                      [axis, start, length](const Tensor& g) -> std::vector<Tensor> {
                        return {slice(g, axis, start, length)};
                      });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ContractError("concat of nothing");
  axis = normalize_axis(axis, parts[0].rank());
  Shape out_shape = parts[0].shape();
  std::int64_t total = 0;
  std::vector<std::int64_t> offsets, lengths;
  for (const auto& t : parts) {
    Shape probe = t.shape();
    if (static_cast<int>(probe.size()) != static_cast<int>(out_shape.size())) throw InputError("concat: rank mismatch");
    probe[axis] = out_shape[axis];
    if (probe != out_shape) throw InputError("concat: shape mismatch " + shape_str(t.shape()));
    offsets.push_back(total);
    lengths.push_back(t.shape()[axis]);
    total += t.shape()[axis];
  }
  out_shape[axis] = total;
  AxisSplit s = split_at(out_shape, axis);
  std::vector<Real> out(static_cast<std::size_t>(numel(out_shape)));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Real* p = parts[i].ptr();
    for (std::int64_t o = 0; o < s.outer; ++o)
      std::copy_n(p + o * lengths[i] * s.inner, lengths[i] * s.inner,
                  out.data() + (o * total + offsets[i]) * s.inner);
  }
  return Tensor::make(out_shape, std::move(out), "concat", parts,
                      [axis, offsets, lengths](const Tensor& g) -> std::vector<Tensor> {
                        std::vector<Tensor> r;
                        for (std::size_t i = 0; i < offsets.size(); ++i) r.push_back(slice(g, axis, offsets[i], lengths[i]));
                        return r;
                      });
}

Tensor sum(const Tensor& x) { return reshape(sum_to(x, Shape(static_cast<std::size_t>(x.rank()), 1)), Shape{}); }

Tensor sum(const Tensor& x, const std::vector<int>& axes, bool keepdim) {
  Shape kept = x.shape();
  for (int a : axes) kept[normalize_axis(a, x.rank())] = 1;
  Tensor r = sum_to(x, kept);
  if (keepdim) return r;
  Shape squeezed;
  for (int i = 0; i < x.rank(); ++i)
    if (std::find_if(axes.begin(), axes.end(), [&](int a) { return normalize_axis(a, x.rank()) == i; }) == axes.end())
      squeezed.push_back(x.shape()[i]);
  return reshape(r, squeezed);
}

Tensor mean(const Tensor& x) { return mul_scalar(sum(x), 1.0 / static_cast<Real>(x.numel())); }

Tensor mean(const Tensor& x, const std::vector<int>& axes, bool keepdim) {
  std::int64_t count = 1;
  for (int a : axes) count *= x.shape()[normalize_axis(a, x.rank())];
  return mul_scalar(sum(x, axes, keepdim), 1.0 / static_cast<Real>(count));
}

Tensor amax(const Tensor& x, int axis, bool keepdim) {
  axis = normalize_axis(axis, x.rank());
  AxisSplit s = split_at(x.shape(), axis);
  std::vector<Real> out(static_cast<std::size_t>(s.outer * s.inner), -std::numeric_limits<Real>::infinity());
  const Real* p = x.ptr();
  for (std::int64_t o = 0; o < s.outer; ++o)
    for (std::int64_t m = 0; m < s.mid; ++m)
      for (std::int64_t i = 0; i < s.inner; ++i) {
        Real& slot = out[o * s.inner + i];
        slot = std::max(slot, p[(o * s.mid + m) * s.inner + i]);
      }
  Shape shape = x.shape();
  if (keepdim)
    shape[axis] = 1;
  else
    shape.erase(shape.begin() + axis);
  return Tensor(shape, std::move(out));
}

Tensor softmax(const Tensor& x, int axis) {
  Tensor shifted = sub(x, amax(x, axis, true));
  Tensor e = exp(shifted);
  return div(e, sum(e, {axis}, true));
}

Tensor logsumexp(const Tensor& x, int axis, bool keepdim) {
  Tensor m = amax(x, axis, true);
  Tensor r = add(log(sum(exp(sub(x, m)), {axis}, true)), m);
  if (keepdim) return r;
  Shape shape = r.shape();
  shape.erase(shape.begin() + normalize_axis(axis, x.rank()));
  return reshape(r, shape);
}

Tensor norm_per_sample(const Tensor& x) {
  std::vector<int> axes;
  for (int i = 1; i < x.rank(); ++i) axes.push_back(i);
  Tensor sq = square(x);
  Tensor s = axes.empty() ? sq : sum(sq, axes, false);
  return sqrt(s);
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b, int axis) {
  Tensor dot = sum(mul(a, b), {axis}, false);
  Tensor na = sqrt(sum(square(a), {axis}, false));
  Tensor nb = sqrt(sum(square(b), {axis}, false));
  return mul(dot, safe_reciprocal(mul(na, nb)));
}

}  // namespace ssagan::ops
