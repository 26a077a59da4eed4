#include <cblas.h>

#include <algorithm>

#include "ssagan/error.hpp"
#include "ssagan/ops.hpp"

namespace ssagan::ops {

namespace {

struct ConvShape {
  std::int64_t batch, in_ch, height, width;
  std::int64_t out_ch, kh, kw;
  std::int64_t out_h, out_w;
  int stride, pad;

  std::int64_t patch() const { return in_ch * kh * kw; }
  std::int64_t pixels() const { return out_h * out_w; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

ConvShape make_shape(std::int64_t batch, std::int64_t in_ch, std::int64_t height, std::int64_t width,
                     std::int64_t out_ch, std::int64_t kh, std::int64_t kw, Conv2dGeometry geom) {
  if (geom.stride < 1 || geom.padding < 0) throw ContractError("invalid conv geometry");
  ConvShape s{batch, in_ch, height, width, out_ch, kh, kw, 0, 0, geom.stride, geom.padding};
  s.out_h = (height + 2 * geom.padding - kh) / geom.stride + 1;
  s.out_w = (width + 2 * geom.padding - kw) / geom.stride + 1;
  if (s.out_h <= 0 || s.out_w <= 0) throw InputError("convolution kernel larger than padded input");
  return s;
}

// cols layout: (in_ch*kh*kw, out_h*out_w)
void im2col(const Real* x, const ConvShape& s, Real* cols) {
  for (std::int64_t c = 0; c < s.in_ch; ++c)
    for (std::int64_t ki = 0; ki < s.kh; ++ki)
      for (std::int64_t kj = 0; kj < s.kw; ++kj) {
        Real* row = cols + ((c * s.kh + ki) * s.kw + kj) * s.pixels();
        const Real* plane = x + c * s.height * s.width;
        for (std::int64_t oy = 0; oy < s.out_h; ++oy) {
          const std::int64_t iy = oy * s.stride - s.pad + ki;
          Real* dst = row + oy * s.out_w;
          if (iy < 0 || iy >= s.height) {
            std::fill_n(dst, s.out_w, 0.0);
            continue;
          }
          const Real* src = plane + iy * s.width;
          for (std::int64_t ox = 0; ox < s.out_w; ++ox) {
            const std::int64_t ix = ox * s.stride - s.pad + kj;
            dst[ox] = (ix >= 0 && ix < s.width) ? src[ix] : 0.0;
          }
        }
      }
}

void col2im(const Real* cols, const ConvShape& s, Real* x) {
  std::fill_n(x, s.in_ch * s.height * s.width, 0.0);
  for (std::int64_t c = 0; c < s.in_ch; ++c)
    for (std::int64_t ki = 0; ki < s.kh; ++ki)
      for (std::int64_t kj = 0; kj < s.kw; ++kj) {
        const Real* row = cols + ((c * s.kh + ki) * s.kw + kj) * s.pixels();
        Real* plane = x + c * s.height * s.width;
        for (std::int64_t oy = 0; oy < s.out_h; ++oy) {
          const std::int64_t iy = oy * s.stride - s.pad + ki;
          if (iy < 0 || iy >= s.height) continue;
          const Real* src = row + oy * s.out_w;
          Real* dst = plane + iy * s.width;
          for (std::int64_t ox = 0; ox < s.out_w; ++ox) {
            const std::int64_t ix = ox * s.stride - s.pad + kj;
            if (ix >= 0 && ix < s.width) dst[ix] += src[ox];
          }
        }
      }
}

int as_int(std::int64_t v) { return static_cast<int>(v); }

std::vector<Real> conv_forward(const Real* x, const Real* w, const ConvShape& s) {
  std::vector<Real> y(static_cast<std::size_t>(s.batch * s.out_ch * s.pixels()));
  std::vector<Real> cols(s.pointwise() ? 0 : static_cast<std::size_t>(s.patch() * s.pixels()));
  for (std::int64_t b = 0; b < s.batch; ++b) {
    const Real* xb = x + b * s.in_ch * s.height * s.width;
    const Real* src = xb;
    if (!s.pointwise()) {
      im2col(xb, s, cols.data());
      src = cols.data();
    }
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, as_int(s.out_ch), as_int(s.pixels()), as_int(s.patch()),
                1.0, w, as_int(s.patch()), src, as_int(s.pixels()), 0.0, y.data() + b * s.out_ch * s.pixels(),
                as_int(s.pixels()));
  }
  return y;
}

std::vector<Real> conv_input_grad_kernel(const Real* g, const Real* w, const ConvShape& s) {
  std::vector<Real> gx(static_cast<std::size_t>(s.batch * s.in_ch * s.height * s.width));
  std::vector<Real> cols(static_cast<std::size_t>(s.patch() * s.pixels()));
  for (std::int64_t b = 0; b < s.batch; ++b) {
    Real* target = s.pointwise() ? gx.data() + b * s.in_ch * s.height * s.width : cols.data();
    cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, as_int(s.patch()), as_int(s.pixels()), as_int(s.out_ch), 1.0,
                w, as_int(s.patch()), g + b * s.out_ch * s.pixels(), as_int(s.pixels()), 0.0, target,
                as_int(s.pixels()));
    if (!s.pointwise()) col2im(cols.data(), s, gx.data() + b * s.in_ch * s.height * s.width);
  }
  return gx;
}

std::vector<Real> conv_weight_grad_kernel(const Real* x, const Real* g, const ConvShape& s) {
  std::vector<Real> gw(static_cast<std::size_t>(s.out_ch * s.patch()), 0.0);
  std::vector<Real> cols(s.pointwise() ? 0 : static_cast<std::size_t>(s.patch() * s.pixels()));
  for (std::int64_t b = 0; b < s.batch; ++b) {
    const Real* xb = x + b * s.in_ch * s.height * s.width;
    const Real* src = xb;
    if (!s.pointwise()) {
      im2col(xb, s, cols.data());
      src = cols.data();
    }
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, as_int(s.out_ch), as_int(s.patch()), as_int(s.pixels()), 1.0,
                g + b * s.out_ch * s.pixels(), as_int(s.pixels()), src, as_int(s.pixels()), 1.0, gw.data(),
                as_int(s.patch()));
  }
  return gw;
}

void require_rank4(const Tensor& t, const char* what) {
  if (t.rank() != 4) throw InputError(std::string(what) + " must be rank 4, got " + shape_str(t.shape()));
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, Conv2dGeometry geom) {
  require_rank4(x, "conv2d input");
  require_rank4(w, "conv2d weight");
  if (x.shape()[1] != w.shape()[1])
    throw InputError("conv2d channel mismatch: input " + shape_str(x.shape()) + ", weight " + shape_str(w.shape()));
  ConvShape s = make_shape(x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3], w.shape()[0], w.shape()[2],
                           w.shape()[3], geom);
  auto y = conv_forward(x.ptr(), w.ptr(), s);
  return Tensor::make(Shape{s.batch, s.out_ch, s.out_h, s.out_w}, std::move(y), "conv2d", {x, w},
                      [x, w, geom, s](const Tensor& g) -> std::vector<Tensor> {
                        Tensor gx, gw;
                        if (x.requires_grad()) gx = conv2d_input_grad(g, w, geom, s.height, s.width);
                        if (w.requires_grad()) gw = conv2d_weight_grad(x, g, geom, s.kh, s.kw);
                        return {gx, gw};
                      });
}

Tensor conv2d_input_grad(const Tensor& g, const Tensor& w, Conv2dGeometry geom, std::int64_t height,
                         std::int64_t width) {
  require_rank4(g, "conv2d_input_grad gradient");
  require_rank4(w, "conv2d_input_grad weight");
  ConvShape s = make_shape(g.shape()[0], w.shape()[1], height, width, w.shape()[0], w.shape()[2], w.shape()[3], geom);
  if (g.shape()[1] != s.out_ch || g.shape()[2] != s.out_h || g.shape()[3] != s.out_w)
    throw ContractError("conv2d_input_grad: gradient shape " + shape_str(g.shape()) + " inconsistent");
  auto gx = conv_input_grad_kernel(g.ptr(), w.ptr(), s);
  return Tensor::make(Shape{s.batch, s.in_ch, height, width}, std::move(gx), "conv2d_input_grad", {g, w},
                      [g, w, geom, s](const Tensor& u) -> std::vector<Tensor> {
                        Tensor gg, gw;
                        if (g.requires_grad()) gg = conv2d(u, w, geom);
                        if (w.requires_grad()) gw = conv2d_weight_grad(u, g, geom, s.kh, s.kw);
                        return {gg, gw};
                      });
}

Tensor conv2d_weight_grad(const Tensor& x, const Tensor& g, Conv2dGeometry geom, std::int64_t kh, std::int64_t kw) {
  require_rank4(x, "conv2d_weight_grad input");
  require_rank4(g, "conv2d_weight_grad gradient");
  ConvShape s = make_shape(x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3], g.shape()[1], kh, kw, geom);
  if (g.shape()[0] != s.batch || g.shape()[2] != s.out_h || g.shape()[3] != s.out_w)
    throw ContractError("conv2d_weight_grad: gradient shape " + shape_str(g.shape()) + " inconsistent");
  auto gw = conv_weight_grad_kernel(x.ptr(), g.ptr(), s);
  return Tensor::make(Shape{s.out_ch, s.in_ch, kh, kw}, std::move(gw), "conv2d_weight_grad", {x, g},
                      [x, g, geom, s](const Tensor& u) -> std::vector<Tensor> {
                        Tensor gx, gg;
                        if (x.requires_grad()) gx = conv2d_input_grad(g, u, geom, s.height, s.width);
                        if (g.requires_grad()) gg = conv2d(x, u, geom);
                        return {gx, gg};
                      });
}

}  // namespace ssagan::ops
