#include <algorithm>
#include <cmath>

#include "ssagan/error.hpp"
#include "ssagan/ops.hpp"

namespace ssagan::ops {

namespace {

/// Source taps for 2x bilinear upsampling along one axis (half-pixel
/// centers, clamped at the borders). Output o = w0*x[i0] + w1*x[i1].
struct Tap {
  std::int64_t i0, i1;
  Real w0, w1;
};

std::vector<Tap> upsample_taps(std::int64_t n) {
  std::vector<Tap> taps(static_cast<std::size_t>(2 * n));
  for (std::int64_t o = 0; o < 2 * n; ++o) {
    Real src = std::max((static_cast<Real>(o) + 0.5) / 2.0 - 0.5, 0.0);
    auto i0 = static_cast<std::int64_t>(std::floor(src));
    i0 = std::min(i0, n - 1);
    std::int64_t i1 = std::min(i0 + 1, n - 1);
    Real frac = src - static_cast<Real>(i0);
    taps[static_cast<std::size_t>(o)] = {i0, i1, 1.0 - frac, frac};
  }
  return taps;
}

void require_rank4(const Tensor& t, const char* what) {
  if (t.rank() != 4) throw InputError(std::string(what) + " expects (B,C,H,W), got " + shape_str(t.shape()));
}

}  // namespace

Tensor upsample_bilinear2x(const Tensor& x) {
  require_rank4(x, "upsample_bilinear2x");
  const std::int64_t planes = x.shape()[0] * x.shape()[1], h = x.shape()[2], w = x.shape()[3];
  const auto th = upsample_taps(h), tw = upsample_taps(w);
  std::vector<Real> out(static_cast<std::size_t>(planes * 4 * h * w));
  for (std::int64_t p = 0; p < planes; ++p) {
    const Real* src = x.ptr() + p * h * w;
    Real* dst = out.data() + p * 4 * h * w;
    for (std::int64_t oy = 0; oy < 2 * h; ++oy) {
      const Tap& ty = th[static_cast<std::size_t>(oy)];
      const Real* r0 = src + ty.i0 * w;
      const Real* r1 = src + ty.i1 * w;
      for (std::int64_t ox = 0; ox < 2 * w; ++ox) {
        const Tap& tx = tw[static_cast<std::size_t>(ox)];
        // Lerp form keeps constant maps exactly constant.
        const Real top = r0[tx.i0] + tx.w1 * (r0[tx.i1] - r0[tx.i0]);
        const Real bottom = r1[tx.i0] + tx.w1 * (r1[tx.i1] - r1[tx.i0]);
        dst[oy * 2 * w + ox] = top + ty.w1 * (bottom - top);
      }
    }
  }
  return Tensor::make(Shape{x.shape()[0], x.shape()[1], 2 * h, 2 * w}, std::move(out), "upsample_bilinear2x", {x},
                      [](const Tensor& g) -> std::vector<Tensor> { return {upsample_bilinear2x_adjoint(g)}; });
}

Tensor upsample_bilinear2x_adjoint(const Tensor& g) {
  require_rank4(g, "upsample_bilinear2x_adjoint");
  if (g.shape()[2] % 2 || g.shape()[3] % 2) throw ContractError("upsample adjoint needs even spatial dims");
  const std::int64_t planes = g.shape()[0] * g.shape()[1], h = g.shape()[2] / 2, w = g.shape()[3] / 2;
  const auto th = upsample_taps(h), tw = upsample_taps(w);
  std::vector<Real> out(static_cast<std::size_t>(planes * h * w), 0.0);
  for (std::int64_t p = 0; p < planes; ++p) {
    const Real* src = g.ptr() + p * 4 * h * w;
    Real* dst = out.data() + p * h * w;
    for (std::int64_t oy = 0; oy < 2 * h; ++oy) {
      const Tap& ty = th[static_cast<std::size_t>(oy)];
      Real* r0 = dst + ty.i0 * w;
      Real* r1 = dst + ty.i1 * w;
      for (std::int64_t ox = 0; ox < 2 * w; ++ox) {
        const Tap& tx = tw[static_cast<std::size_t>(ox)];
        const Real v = src[oy * 2 * w + ox];
        r0[tx.i0] += ty.w0 * tx.w0 * v;
        r0[tx.i1] += ty.w0 * tx.w1 * v;
        r1[tx.i0] += ty.w1 * tx.w0 * v;
        r1[tx.i1] += ty.w1 * tx.w1 * v;
      }
    }
  }
  return Tensor::make(Shape{g.shape()[0], g.shape()[1], h, w}, std::move(out), "upsample_bilinear2x_adjoint", {g},
                      [](const Tensor& u) -> std::vector<Tensor> { return {upsample_bilinear2x(u)}; });
}

Tensor avg_pool2x(const Tensor& x) {
  require_rank4(x, "avg_pool2x");
  if (x.shape()[2] % 2 || x.shape()[3] % 2) throw InputError("avg_pool2x needs even spatial dims");
  const std::int64_t planes = x.shape()[0] * x.shape()[1], h = x.shape()[2] / 2, w = x.shape()[3] / 2;
  std::vector<Real> out(static_cast<std::size_t>(planes * h * w));
  for (std::int64_t p = 0; p < planes; ++p) {
    const Real* src = x.ptr() + p * 4 * h * w;
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t xx = 0; xx < w; ++xx) {
        const Real* a = src + (2 * y) * 2 * w + 2 * xx;
        out[static_cast<std::size_t>((p * h + y) * w + xx)] = 0.25 * (a[0] + a[1] + a[2 * w] + a[2 * w + 1]);
      }
  }
  return Tensor::make(Shape{x.shape()[0], x.shape()[1], h, w}, std::move(out), "avg_pool2x", {x},
                      [](const Tensor& g) -> std::vector<Tensor> { return {avg_pool2x_adjoint(g)}; });
}

Tensor avg_pool2x_adjoint(const Tensor& g) {
  require_rank4(g, "avg_pool2x_adjoint");
  const std::int64_t planes = g.shape()[0] * g.shape()[1], h = g.shape()[2], w = g.shape()[3];
  std::vector<Real> out(static_cast<std::size_t>(planes * 4 * h * w));
  for (std::int64_t p = 0; p < planes; ++p)
    for (std::int64_t y = 0; y < 2 * h; ++y)
      for (std::int64_t xx = 0; xx < 2 * w; ++xx)
        out[static_cast<std::size_t>((p * 2 * h + y) * 2 * w + xx)] = 0.25 * g.ptr()[(p * h + y / 2) * w + xx / 2];
  return Tensor::make(Shape{g.shape()[0], g.shape()[1], 2 * h, 2 * w}, std::move(out), "avg_pool2x_adjoint", {g},
                      [](const Tensor& u) -> std::vector<Tensor> { return {avg_pool2x(u)}; });
}

}  // namespace ssagan::ops
