#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "ssagan/error.hpp"
#include "ssagan/generator.hpp"

using namespace ssagan;

namespace {

GeneratorConfig tiny(int stages) {
  GeneratorConfig c = configure_scale(stages, 1);
  c.mask_hidden = 2;
  c.affine_hidden = 4;
  return c;
}

void randomize_affine(Generator& g, Rng& rng) {
  for (const auto& p : g.parameters())
    if (p.path.find("affine") != std::string::npos) {
      Tensor t = p.tensor;
      for (auto& v : t.mutable_data()) v = 0.3 * rng.normal();
    }
}

}  // namespace

TEST_CASE("channel schedule and scale configuration") {
  CHECK(channel_schedule(7, 64) == std::vector<std::int64_t>{512, 512, 512, 512, 256, 128, 64});
  CHECK(channel_schedule(5, 64) == std::vector<std::int64_t>{512, 512, 512, 512, 256});
  CHECK_THROWS_AS(configure_scale(2, 64), ConfigError);
  CHECK_THROWS_AS(configure_scale(8, 64), ConfigError);

  Rng rng(1);
  GeneratorConfig full = configure_scale(7, 64);
  full.mask_hidden = 1;
  full.affine_hidden = 1;
  Generator g(full, rng);
  CHECK(g.image_size() == 256);
  CHECK(g.projection.out_features() == 4 * 4 * 512);
  std::vector<std::int64_t> outs;
  for (const auto& b : g.blocks) outs.push_back(b.config().out_channels);
  CHECK(outs == channel_schedule(7, 64));
  CHECK_FALSE(g.blocks[0].config().upsample);
  for (std::size_t k = 1; k < g.blocks.size(); ++k) CHECK(g.blocks[k].config().upsample);
  CHECK(g.head.in_channels() == 64);
}

TEST_CASE("shape walk: masks per stage and image size") {
  Rng rng(2);
  for (int stages : {3, 5, 7}) {
    Generator g(tiny(stages), rng);
    NoGradGuard guard;
    auto out = g.generate(Tensor::randn({2, 100}, rng), Tensor::randn({2, 256}, rng), Mode::train);
    const std::int64_t s = 4 << (stages - 1);
    CHECK(out.image.shape() == Shape{2, 3, s, s});
    REQUIRE(out.masks.size() == static_cast<std::size_t>(stages));
    for (int k = 0; k < stages; ++k) {
      const std::int64_t h = 4 << k;
      CHECK(out.masks[k].shape() == Shape{2, 1, h, h});
      for (Real v : out.masks[k].data()) REQUIRE((v >= 0.0 && v <= 1.0));
    }
    for (Real v : out.image.data()) REQUIRE((v >= -1.0 && v <= 1.0));
  }
}

TEST_CASE("generation is deterministic and checks batch sizes") {
  Rng rng(3);
  Generator g(tiny(4), rng);
  Tensor z = Tensor::randn({2, 100}, rng), e = Tensor::randn({2, 256}, rng);
  auto a = g.generate(z, e, Mode::eval);
  auto b = g.generate(z, e, Mode::eval);
  CHECK(testing::bitwise_equal(a.image, b.image));
  CHECK_THROWS_AS(g.generate(Tensor::randn({3, 100}, rng), e, Mode::eval), InputError);
  CHECK_THROWS_AS(g.generate(Tensor::randn({2, 99}, rng), e, Mode::eval), InputError);
}

TEST_CASE("the sentence vector reaches the image") {
  Rng rng(4);
  Generator g(tiny(3), rng);
  randomize_affine(g, rng);
  Tensor z = Tensor::randn({2, 100}, rng), e = Tensor::randn({2, 256}, rng);
  auto a = g.generate(z, e, Mode::eval);
  auto b = g.generate(z, e + 0.1, Mode::eval);
  double l2 = 0;
  for (std::int64_t i = 0; i < a.image.numel(); ++i) l2 += std::pow(a.image[i] - b.image[i], 2);
  CHECK(l2 > 0);
}

TEST_CASE("mean intensity gradient with respect to noise matches finite differences") {
  Rng rng(5);
  Generator g(tiny(3), rng);
  randomize_affine(g, rng);
  Tensor z = Tensor::randn({2, 100}, rng).set_requires_grad(true);
  Tensor e = Tensor::randn({2, 256}, rng).set_requires_grad(true);
  auto loss = [&] { return ops::mean(g.generate(z, e, Mode::train).image); };
  auto report = testing::check_gradients(loss, {{"z", z}, {"sentence", e}}, 1e-6, 60);
  INFO(report.worst_path, " ", report.worst_rel_err);
  CHECK(report.worst_rel_err < 1e-4);
}

TEST_CASE("disabled stage masks still report the predicted mask") {
  Rng rng(6);
  GeneratorConfig c = tiny(3);
  c.mask_enabled = {true, false, true};
  Generator g(c, rng);
  auto out = g.generate(Tensor::randn({2, 100}, rng), Tensor::randn({2, 256}, rng), Mode::eval);
  CHECK(out.masks.size() == 3);
  c.mask_enabled = {true, false};
  CHECK_THROWS_AS(Generator(c, rng), ConfigError);
}
