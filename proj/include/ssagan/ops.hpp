#pragma once

#include <cstdint>
#include <vector>

#include "ssagan/tensor.hpp"

// Differentiable tensor operations. Every backward rule is itself written in
// terms of these ops, so gradients can be differentiated again (needed for
// gradient penalties). Broadcasting follows numpy rules up to rank 4.

namespace ssagan::ops {

// Elementwise binary, broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& x, Real c);
Tensor mul_scalar(const Tensor& x, Real c);
Tensor neg(const Tensor& x);

// Elementwise unary.
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor square(const Tensor& x);
/// x^p for real p; callers keep x >= 0 when p is not an integer.
Tensor pow(const Tensor& x, Real p);
/// sqrt with a zero (sub)gradient at 0 instead of infinity.
Tensor sqrt(const Tensor& x);
/// 1/x, defined as 0 at x == 0.
Tensor safe_reciprocal(const Tensor& x);
Tensor leaky_relu(const Tensor& x, Real slope);
inline Tensor relu(const Tensor& x) { return leaky_relu(x, 0.0); }

// Shape manipulation.
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& perm);
Tensor broadcast_to(const Tensor& x, const Shape& shape);
/// Sums broadcast dimensions away so the result has `shape`.
Tensor sum_to(const Tensor& x, const Shape& shape);
Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t length);
Tensor concat(const std::vector<Tensor>& parts, int axis);
/// Embeds x into zeros of extent `full` along `axis` at offset `start` (adjoint of slice).
Tensor pad_axis(const Tensor& x, int axis, std::int64_t start, std::int64_t full);

// Reductions.
Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, const std::vector<int>& axes, bool keepdim);
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, const std::vector<int>& axes, bool keepdim);
/// Max along one axis; not differentiable (returned as a constant).
Tensor amax(const Tensor& x, int axis, bool keepdim);

/// Softmax along `axis`, max-shifted.
Tensor softmax(const Tensor& x, int axis);
/// log(sum(exp(x))) along `axis`, max-shifted.
Tensor logsumexp(const Tensor& x, int axis, bool keepdim);
/// Euclidean norm over every axis except 0: (B, ...) -> (B,).
Tensor norm_per_sample(const Tensor& x);
/// Cosine similarity along `axis`; 0 where either vector is zero.
Tensor cosine_similarity(const Tensor& a, const Tensor& b, int axis);

/// (M,K)x(K,N) or batched (B,M,K)x(B,K,N), with optional transposes of the
/// trailing two axes.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a = false, bool transpose_b = false);

/// Rows of `table` (V, D) picked by `ids` -> (ids.size(), D).
Tensor gather_rows(const Tensor& table, const std::vector<std::int64_t>& ids);
/// Adjoint of gather_rows: accumulate rows of `src` into a (rows, D) zero table.
Tensor scatter_add_rows(const Tensor& src, const std::vector<std::int64_t>& ids, std::int64_t rows);

struct Conv2dGeometry {
  int stride = 1;
  int padding = 0;
};

/// x (B,C,H,W), w (O,C,kh,kw) -> (B,O,Ho,Wo). No bias.
Tensor conv2d(const Tensor& x, const Tensor& w, Conv2dGeometry geom);
/// Gradient of <g, conv2d(x, w)> with respect to x, for x of spatial size (height, width).
Tensor conv2d_input_grad(const Tensor& g, const Tensor& w, Conv2dGeometry geom, std::int64_t height,
                         std::int64_t width);
/// Gradient of <g, conv2d(x, w)> with respect to w, for kernels of size (kh, kw).
Tensor conv2d_weight_grad(const Tensor& x, const Tensor& g, Conv2dGeometry geom, std::int64_t kh, std::int64_t kw);

/// Bilinear x2 upsampling of (B,C,H,W), half-pixel centers with edge clamping.
Tensor upsample_bilinear2x(const Tensor& x);
/// Adjoint of upsample_bilinear2x: (B,C,2H,2W) -> (B,C,H,W).
Tensor upsample_bilinear2x_adjoint(const Tensor& g);
/// 2x2 average pooling, stride 2.
Tensor avg_pool2x(const Tensor& x);
/// Adjoint of avg_pool2x.
Tensor avg_pool2x_adjoint(const Tensor& g);

}  // namespace ssagan::ops

namespace ssagan {

inline Tensor operator+(const Tensor& a, const Tensor& b) { return ops::add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return ops::sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return ops::mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return ops::div(a, b); }
inline Tensor operator-(const Tensor& x) { return ops::neg(x); }
inline Tensor operator+(const Tensor& x, Real c) { return ops::add_scalar(x, c); }
inline Tensor operator+(Real c, const Tensor& x) { return ops::add_scalar(x, c); }
inline Tensor operator-(const Tensor& x, Real c) { return ops::add_scalar(x, -c); }
inline Tensor operator-(Real c, const Tensor& x) { return ops::add_scalar(ops::neg(x), c); }
inline Tensor operator*(const Tensor& x, Real c) { return ops::mul_scalar(x, c); }
inline Tensor operator*(Real c, const Tensor& x) { return ops::mul_scalar(x, c); }
inline Tensor operator/(const Tensor& x, Real c) { return ops::mul_scalar(x, 1.0 / c); }

}  // namespace ssagan
