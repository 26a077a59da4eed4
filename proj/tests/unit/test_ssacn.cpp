#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "ssagan/error.hpp"
#include "ssagan/ssacn.hpp"

using namespace ssagan;

namespace {

void randomize(const nn::TensorList& params, Rng& rng, Real scale) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    for (auto& v : t.mutable_data()) v = scale * rng.normal();
  }
}

SsacnConfig micro_config(std::int64_t in, std::int64_t out, bool up) {
  SsacnConfig c;
  c.in_channels = in;
  c.out_channels = out;
  c.upsample = up;
  c.cond_dim = 5;
  c.affine_hidden = 4;
  c.mask_hidden = 3;
  return c;
}

}  // namespace

TEST_CASE("batch statistics normalize each channel") {
  Rng rng(1);
  Tensor x = Tensor::randn({4, 2, 3, 3}, rng, 2.0) + 3.0;
  BatchNorm bn(2);
  Tensor y = bn.forward(x, Mode::train);
  for (std::int64_t c = 0; c < 2; ++c) {
    // Two-pass oracle on the input gives the target variance var / (var + eps).
    double mx = 0, my = 0;
    for (std::int64_t n = 0; n < 4; ++n)
      for (std::int64_t p = 0; p < 9; ++p) {
        mx += x.at({n, c, p / 3, p % 3}) / 36;
        my += y.at({n, c, p / 3, p % 3}) / 36;
      }
    double vx = 0, vy = 0;
    for (std::int64_t n = 0; n < 4; ++n)
      for (std::int64_t p = 0; p < 9; ++p) {
        vx += std::pow(x.at({n, c, p / 3, p % 3}) - mx, 2) / 36;
        vy += std::pow(y.at({n, c, p / 3, p % 3}) - my, 2) / 36;
      }
    CHECK(std::abs(my) < 1e-6);
    CHECK(std::abs(vy - vx / (vx + 1e-5)) < 1e-5);
    CHECK(bn.running_mean[c] == doctest::Approx(0.1 * mx).epsilon(1e-12));
    CHECK(bn.running_scale[c] == doctest::Approx(0.9 + 0.1 * std::sqrt(vx + 1e-5)).epsilon(1e-12));
  }
}

TEST_CASE("constant channels normalize to zero") {
  Rng rng(2);
  std::vector<Real> v(2 * 2 * 3 * 3);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (i / 9) % 2 == 0 ? 5.0 : rng.normal();
  BatchNorm bn(2);
  Tensor y = bn.forward(Tensor(Shape{2, 2, 3, 3}, v), Mode::train);
  for (std::int64_t n = 0; n < 2; ++n)
    for (std::int64_t p = 0; p < 9; ++p) {
      CHECK(std::isfinite(y.at({n, 0, p / 3, p % 3})));
      CHECK(std::abs(y.at({n, 0, p / 3, p % 3})) < 1e-12);
    }
}

TEST_CASE("eval mode with unit running statistics is the identity") {
  Rng rng(3);
  Tensor x = Tensor::randn({1, 3, 2, 2}, rng);
  BatchNorm bn(3);
  CHECK(testing::bitwise_equal(bn.forward(x, Mode::eval), x));
  CHECK_THROWS_AS(bn.forward(x, Mode::train), ConfigError);
  BatchNorm batchy(3, {1e-5, 0.1, true});
  CHECK_THROWS_AS(batchy.forward(x, Mode::eval), ConfigError);
  CHECK_THROWS_AS(bn.forward(Tensor::zeros({2, 4, 2, 2}), Mode::eval), InputError);
}

TEST_CASE("condition affine") {
  Rng rng(4);
  ConditionAffine aff(256, 256, 7, rng);
  Tensor e = Tensor::randn({3, 256}, rng);
  auto init = aff.forward(e);
  CHECK(init.gamma.shape() == Shape{3, 7});
  CHECK(init.beta.shape() == Shape{3, 7});
  for (Real g : init.gamma.data()) CHECK(g == 1.0);
  for (Real b : init.beta.data()) CHECK(b == 0.0);

  nn::TensorList params;
  aff.collect("", params);
  testing::fill_values(params, 0.0);
  auto zero = aff.forward(e);
  for (Real g : zero.gamma.data()) CHECK(g == 0.0);
  for (Real b : zero.beta.data()) CHECK(b == 0.0);

  ConditionAffine linear(4, 0, 3, rng);
  nn::TensorList lp;
  linear.collect("", lp);
  randomize(lp, rng, 1.0);
  Tensor s = Tensor::randn({2, 4}, rng);
  auto out = linear.forward(s);
  const Tensor& W = linear.gamma_mlp.first.weight;
  const Tensor& b = linear.gamma_mlp.first.bias;
  for (std::int64_t n = 0; n < 2; ++n)
    for (std::int64_t c = 0; c < 3; ++c) {
      double acc = b[c];
      for (std::int64_t k = 0; k < 4; ++k) acc += W.at({c, k}) * s.at({n, k});
      CHECK(std::abs(out.gamma.at({n, c}) - acc) < 1e-14);
    }
}

TEST_CASE("sscbn matches a scalar loop") {
  Rng rng(5);
  const std::int64_t B = 3, C = 2, H = 3;
  Tensor x = Tensor::randn({B, C, H, H}, rng);
  Tensor e = Tensor::randn({B, 5}, rng);
  Tensor m = Tensor::uniform({B, 1, H, H}, rng, 0, 1);
  ConditionAffine aff(5, 4, C, rng);
  nn::TensorList p;
  aff.collect("", p);
  randomize(p, rng, 0.7);
  BatchNorm bn(C);
  Tensor y = sscbn(x, e, m, bn, aff, Mode::train);
  auto a = aff.forward(e);
  double worst = 0;
  for (std::int64_t c = 0; c < C; ++c) {
    double mu = 0, var = 0;
    for (std::int64_t n = 0; n < B; ++n)
      for (std::int64_t q = 0; q < H * H; ++q) mu += x.at({n, c, q / H, q % H}) / (B * H * H);
    for (std::int64_t n = 0; n < B; ++n)
      for (std::int64_t q = 0; q < H * H; ++q) var += std::pow(x.at({n, c, q / H, q % H}) - mu, 2) / (B * H * H);
    for (std::int64_t n = 0; n < B; ++n)
      for (std::int64_t q = 0; q < H * H; ++q) {
        const double xh = (x.at({n, c, q / H, q % H}) - mu) / std::sqrt(var + 1e-5);
        const double ref = m.at({n, 0, q / H, q % H}) * (a.gamma.at({n, c}) * xh + a.beta.at({n, c}));
        worst = std::max(worst, std::abs(ref - y.at({n, c, q / H, q % H})) / std::max(1.0, std::abs(ref)));
      }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("sscbn degenerate gates") {
  Rng rng(6);
  Tensor x = Tensor::randn({2, 3, 4, 4}, rng);
  Tensor e = Tensor::randn({2, 256}, rng);
  ConditionAffine aff(256, 256, 3, rng);  // fresh: gamma 1, beta 0
  BatchNorm bn1(3), bn2(3), bn3(3);
  Tensor plain = bn1.forward(x, Mode::train);
  CHECK(testing::bitwise_equal(sscbn(x, e, Tensor::ones({2, 1, 4, 4}), bn2, aff, Mode::train), plain));
  Tensor zero = sscbn(x, e, Tensor::zeros({2, 1, 4, 4}), bn3, aff, Mode::train);
  for (Real v : zero.data()) CHECK(v == 0.0);
  CHECK_THROWS_AS(sscbn(x, e, Tensor::ones({2, 1, 2, 2}), bn3, aff, Mode::train), InputError);
}

TEST_CASE("gate scaling scales the modulated output") {
  Rng rng(7);
  Tensor xh = Tensor::randn({2, 3, 4, 4}, rng);
  AffineParams a{Tensor::randn({2, 3}, rng), Tensor::randn({2, 3}, rng)};
  Tensor m = Tensor::uniform({2, 1, 4, 4}, rng, 0, 1);
  Tensor base = modulate(xh, a, m);
  for (double lambda : {0.0, 0.25, 0.5, 1.0}) {
    Tensor scaled = modulate(xh, a, m * lambda);
    for (std::int64_t i = 0; i < base.numel(); ++i)
      CHECK(std::abs(scaled[i] - lambda * base[i]) <= 1e-15 * std::abs(base[i]));
  }
}

TEST_CASE("mask predictor") {
  Rng rng(8);
  MaskPredictor mp(4, 100, rng);
  Tensor h = Tensor::randn({2, 4, 5, 5}, rng, 10.0);
  Tensor m = mp.forward(h);
  CHECK(m.shape() == Shape{2, 1, 5, 5});
  for (Real v : m.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(testing::bitwise_equal(m, mp.forward(h)));
  nn::TensorList p;
  mp.collect("", p);
  testing::fill_values(p, 0.0);
  Tensor half = mp.forward(h);
  for (Real v : half.data()) CHECK(v == 0.5);
}

TEST_CASE("block doubles resolution and keeps contents with a zeroed branch") {
  Rng rng(9);
  SsacnConfig cfg;
  cfg.mask_hidden = 8;
  SsacnBlock block(cfg, rng);
  Tensor f = Tensor::randn({2, 512, 4, 4}, rng);
  Tensor e = Tensor::randn({2, 256}, rng);
  auto out = block.forward(f, e, Mode::train);
  CHECK(out.features.shape() == Shape{2, 512, 8, 8});
  CHECK(out.mask.shape() == Shape{2, 1, 8, 8});
  testing::fill_values({{"w", block.conv2.weight}, {"b", block.conv2.bias}}, 0.0);
  auto kept = block.forward(f, e, Mode::train);
  CHECK(testing::bitwise_equal(kept.features, ops::upsample_bilinear2x(f)));

  SsacnConfig first = micro_config(3, 3, false);
  SsacnBlock no_up(first, rng);
  CHECK(no_up.forward(Tensor::randn({2, 3, 4, 4}, rng), Tensor::randn({2, 5}, rng), Mode::train).features.shape() ==
        Shape{2, 3, 4, 4});
  CHECK_THROWS_AS(no_up.forward(Tensor::randn({2, 2, 4, 4}, rng), Tensor::randn({2, 5}, rng), Mode::train), InputError);
}

TEST_CASE("disabled gating equals running with an all-ones mask") {
  Rng rng(10);
  SsacnBlock block(micro_config(3, 4, true), rng);
  nn::TensorList p;
  block.collect("", p);
  randomize(p, rng, 0.5);
  Tensor f = Tensor::randn({2, 3, 2, 2}, rng), e = Tensor::randn({2, 5}, rng);
  auto off = block.forward(f, e, Mode::eval, false);
  auto ones = block.forward_with_gate(f, e, Mode::eval, Tensor::ones({2, 1, 4, 4}));
  CHECK(testing::bitwise_equal(off.features, ones.features));
  CHECK(testing::bitwise_equal(off.mask, block.forward(f, e, Mode::eval).mask));
  CHECK_FALSE(testing::bitwise_equal(off.features, block.forward(f, e, Mode::eval).features));
}

TEST_CASE("eval-mode block is equivariant to batch permutation") {
  Rng rng(11);
  SsacnBlock block(micro_config(3, 4, true), rng);
  nn::TensorList p;
  block.collect("", p);
  randomize(p, rng, 0.5);
  Tensor f = Tensor::randn({3, 3, 2, 2}, rng), e = Tensor::randn({3, 5}, rng);
  const std::vector<std::int64_t> perm{2, 0, 1};
  auto permute_rows = [&](const Tensor& t) {
    std::vector<Tensor> rows;
    for (auto i : perm) rows.push_back(ops::slice(t, 0, i, 1));
    return ops::concat(rows, 0);
  };
  auto a = block.forward(f, e, Mode::eval);
  auto b = block.forward(permute_rows(f), permute_rows(e), Mode::eval);
  CHECK(testing::bitwise_equal(permute_rows(a.features), b.features));
  CHECK(testing::bitwise_equal(permute_rows(a.mask), b.mask));
}

TEST_CASE("block gradients match finite differences") {
  Rng rng(12);
  for (Mode mode : {Mode::train, Mode::eval})
    for (auto cfg : {micro_config(3, 4, true), micro_config(3, 3, false)}) {
      SsacnBlock block(cfg, rng);
      nn::TensorList p;
      block.collect("", p);
      randomize(p, rng, 0.5);
      Tensor f = Tensor::randn({2, 3, 3, 3}, rng).set_requires_grad(true);
      Tensor e = Tensor::randn({2, 5}, rng).set_requires_grad(true);
      const std::int64_t s = cfg.upsample ? 6 : 3;
      Tensor w = Tensor::randn({2, cfg.out_channels, s, s}, rng);
      Tensor wm = Tensor::randn({2, 1, s, s}, rng);
      auto loss = [&] {
        auto out = block.forward(f, e, mode);
        return ops::sum(out.features * w) + ops::sum(out.mask * wm);
      };
      p.push_back({"f_prev", f});
      p.push_back({"sentence", e});
      nn::TensorList leaves;
      for (const auto& nt : p) {
        // With batch statistics the second normalization cancels conv1's bias,
        // so its gradient is identically zero and checked as such.
        if (mode == Mode::train && nt.path == "conv1/bias") {
          Tensor g = grad(loss(), {nt.tensor})[0];
          for (Real v : g.data()) CHECK(std::abs(v) < 1e-12);
          continue;
        }
        leaves.push_back(nt);
      }
      auto report = testing::check_gradients(loss, leaves);
      INFO(report.worst_path, " ", report.worst_rel_err);
      CHECK(report.worst_rel_err < 1e-4);
    }
}
