#include <doctest.h>

#include "ssagan/config.hpp"
#include "ssagan/error.hpp"

using namespace ssagan;

TEST_CASE("defaults carry the published optimizer and loss settings") {
  TrainConfig c;
  CHECK(c.batch_size == 24);
  CHECK(c.lr_g == 1e-4);
  CHECK(c.lr_d == 4e-4);
  CHECK(c.adam_beta1 == 0.0);
  CHECK(c.adam_beta2 == 0.9);
  CHECK(c.lambda_ma == 2.0);
  CHECK(c.p == 6.0);
  CHECK(c.lambda_da == 0.1);
  CHECK(c.gamma1 == 5.0);
  CHECK(c.gamma2 == 5.0);
  CHECK(c.gamma3 == 10.0);
  CHECK(c.d_steps_per_g == 1);
  CHECK(c.ema_decay == 0.0);
}

TEST_CASE("default_config masks every stage and fixes the image size") {
  for (int s = 3; s <= 7; ++s) {
    auto c = default_config(s);
    CHECK(c.image_size == (4 << (s - 1)));
    CHECK(c.masked_stages.size() == static_cast<std::size_t>(s));
    CHECK(c.mask_flags() == std::vector<bool>(static_cast<std::size_t>(s), true));
    CHECK_NOTHROW(c.validate());
  }
  auto c = default_config(5);
  c.masked_stages = {5};
  CHECK(c.mask_flags() == std::vector<bool>{false, false, false, false, true});
}

TEST_CASE("config text round-trips every field") {
  TrainConfig c = default_config(6);
  c.masked_stages = {2, 4};
  c.lr_g = 0.1 + 0.2;
  c.seed = 0xfffffffffffffULL;
  c.finetune_text_encoder = true;
  c.dataset_root = "/data/birds";
  TrainConfig back;
  apply_config_text(back, to_config_text(c));
  CHECK(config_entries(back) == config_entries(c));
  CHECK(back.lr_g == c.lr_g);
  CHECK(config_hash(back) == config_hash(c));

  TrainConfig none = default_config(5);
  none.masked_stages.clear();
  TrainConfig none_back = default_config(5);
  apply_config_text(none_back, to_config_text(none));
  CHECK(none_back.masked_stages.empty());
}

TEST_CASE("parser handles comments, blanks and reports bad lines") {
  TrainConfig c;
  apply_config_text(c, "# comment\n\n  stages = 4   # trailing\nmasked_stages = 1, 3\nfinetune_text_encoder = yes\n");
  CHECK(c.stages == 4);
  CHECK(c.masked_stages == std::set<int>{1, 3});
  CHECK(c.finetune_text_encoder);
  CHECK_THROWS_AS(apply_config_text(c, "colour = red\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(c, "stages 4\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(c, "stages = four\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(c, "lr_g = 1e-4x\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(c, "eval_batch_stats = maybe\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_file(c, "/nonexistent/config.txt"), IoError);
}

TEST_CASE("hash tracks training-relevant fields only") {
  const TrainConfig base = default_config(5);
  const auto h = config_hash(base);
  for (auto [key, value] : std::vector<std::pair<std::string, std::string>>{
           {"epochs", "99"}, {"max_steps", "5"}, {"out_dir", "elsewhere"}, {"dataset_root", "x"},
           {"encoder_ckpt", "e.tar"}, {"checkpoint_every", "10"}, {"sample_every", "3"}}) {
    TrainConfig c = base;
    set_config_value(c, key, value);
    CHECK_MESSAGE(config_hash(c) == h, key);
  }
  for (auto [key, value] : std::vector<std::pair<std::string, std::string>>{
           {"lr_g", "2e-4"}, {"masked_stages", "5"}, {"seed", "1"}, {"finetune_text_encoder", "true"},
           {"batch_size", "8"}, {"lambda_da", "0.2"}, {"g_base_channels", "8"}}) {
    TrainConfig c = base;
    set_config_value(c, key, value);
    CHECK_MESSAGE(config_hash(c) != h, key);
  }
}

TEST_CASE("validation rejects inconsistent configs") {
  auto bad = [](auto edit) {
    TrainConfig c = default_config(5);
    edit(c);
    return c;
  };
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.masked_stages = {6}; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.masked_stages = {0}; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.stages = 8; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.image_size = 128; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.lr_g = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.lr_d = -1; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.adam_beta2 = 1.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.batch_size = 1; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.d_steps_per_g = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.ema_decay = 1.0; }).validate(), ConfigError);
  CHECK_NOTHROW(bad([](TrainConfig& c) { c.pretrain_lr = 0; }).validate());
  CHECK_NOTHROW(bad([](TrainConfig& c) { c.masked_stages.clear(); }).validate());
}
