#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "gradcheck.hpp"
#include "ssagan/log.hpp"
#include "ssagan/trainer.hpp"
#include "tiny_run.hpp"

using namespace ssagan;
namespace fs = std::filesystem;

namespace {

struct QuietWarnings {
  WarningSink previous = set_warning_sink([](const std::string&) {});
  ~QuietWarnings() { set_warning_sink(previous); }
};

std::vector<std::vector<Real>> snapshot(const nn::TensorList& list) {
  std::vector<std::vector<Real>> out;
  for (const auto& nt : list) out.push_back(nt.tensor.to_vector());
  return out;
}

bool any_changed(const std::vector<std::vector<Real>>& before, const nn::TensorList& after) {
  for (std::size_t i = 0; i < before.size(); ++i)
    if (before[i] != after[i].tensor.to_vector()) return true;
  return false;
}

double hinge_pos(const std::vector<double>& v, double sign) {
  double s = 0;
  for (double x : v) s += std::max(0.0, 1 + sign * x);
  return s / static_cast<double>(v.size());
}

bool same_record(const StepRecord& a, const StepRecord& b) {
  return to_json_line(a) == to_json_line(b) && a.real_logits == b.real_logits && a.fake_logits == b.fake_logits &&
         a.g_fake_logits == b.g_fake_logits;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "ssagan_test_trainer" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("a step moves D and G and leaves a frozen encoder alone") {
  QuietWarnings quiet;
  Trainer t(testing::tiny_config(), testing::tiny_dataset());
  auto g0 = snapshot(t.models().gen.parameters());
  auto d0 = snapshot(t.models().disc.parameters());
  auto text0 = snapshot(t.models().text.parameters());
  auto image0 = snapshot(t.models().image.parameters());
  t.train_step();
  CHECK(any_changed(g0, t.models().gen.parameters()));
  CHECK(any_changed(d0, t.models().disc.parameters()));
  CHECK_FALSE(any_changed(text0, t.models().text.parameters()));
  CHECK_FALSE(any_changed(image0, t.models().image.parameters()));
  CHECK(t.step() == 1);
}

TEST_CASE("fine-tuning updates the text encoder but never the image encoder") {
  QuietWarnings quiet;
  auto c = testing::tiny_config();
  c.finetune_text_encoder = true;
  Trainer t(c, testing::tiny_dataset());
  auto text0 = snapshot(t.models().text.parameters());
  auto image0 = snapshot(t.models().image.parameters());
  t.train_step();
  CHECK(any_changed(text0, t.models().text.parameters()));
  CHECK_FALSE(any_changed(image0, t.models().image.parameters()));
}

TEST_CASE("records satisfy the loss identities recomputed from logits") {
  QuietWarnings quiet;
  auto c = testing::tiny_config();
  Trainer t(c, testing::tiny_dataset());
  for (int k = 0; k < 3; ++k) {
    auto r = t.train_step();
    REQUIRE(r.real_logits.size() == 4);
    CHECK(r.d_real == doctest::Approx(hinge_pos(r.real_logits, -1)).epsilon(1e-12));
    CHECK(r.d_fake == doctest::Approx(hinge_pos(r.fake_logits, +1)).epsilon(1e-12));
    CHECK(r.d_mismatch == doctest::Approx(hinge_pos(r.mismatch_logits, +1)).epsilon(1e-12));
    CHECK(r.d_total == doctest::Approx(r.d_real + 0.5 * r.d_fake + 0.5 * r.d_mismatch + r.gp).epsilon(1e-12));
    CHECK(r.gp >= 0);
    double mean_g = 0;
    for (double v : r.g_fake_logits) mean_g += v;
    mean_g /= static_cast<double>(r.g_fake_logits.size());
    CHECK(r.g_adv == doctest::Approx(-mean_g).epsilon(1e-12));
    CHECK(r.g_total == doctest::Approx(r.g_adv + c.lambda_da * r.g_damsm).epsilon(1e-12));
    CHECK(r.g_damsm > 0);
    // The G step scores the fakes with the D that was just updated.
    CHECK(r.g_fake_logits != r.fake_logits);
  }
}

TEST_CASE("two trainers with the same seed agree bitwise") {
  QuietWarnings quiet;
  Trainer a(testing::tiny_config(), testing::tiny_dataset());
  Trainer b(testing::tiny_config(), testing::tiny_dataset());
  for (int k = 0; k < 3; ++k) CHECK(same_record(a.train_step(), b.train_step()));
  auto c = testing::tiny_config();
  c.seed = 12;
  Trainer other(c, testing::tiny_dataset());
  Trainer fresh(testing::tiny_config(), testing::tiny_dataset());
  CHECK_FALSE(same_record(other.train_step(), fresh.train_step()));
}

TEST_CASE("resuming reproduces the next step bitwise") {
  QuietWarnings quiet;
  for (bool finetune : {false, true}) {
    auto c = testing::tiny_config();
    c.finetune_text_encoder = finetune;
    Trainer full(c, testing::tiny_dataset());
    full.train_step();
    full.train_step();
    auto path = scratch("resume") / "k2.tar";
    save_checkpoint(path, full.checkpoint());
    auto expected = full.train_step();

    Trainer resumed(c, testing::tiny_dataset());
    resumed.restore(load_checkpoint(path));
    CHECK(resumed.step() == 2);
    CHECK(same_record(resumed.train_step(), expected));
    CHECK(same_record(resumed.train_step(), full.train_step()));
  }
}

TEST_CASE("resume refuses a different config or vocabulary") {
  QuietWarnings quiet;
  Trainer t(testing::tiny_config(), testing::tiny_dataset());
  t.train_step();
  Checkpoint ck = t.checkpoint();

  auto c = testing::tiny_config();
  c.lr_g = 2e-4;
  Trainer other(c, testing::tiny_dataset());
  CHECK_THROWS_AS(other.restore(ck), ConfigError);

  auto run_only = testing::tiny_config();
  run_only.epochs = 7;
  run_only.out_dir = "elsewhere";
  Trainer longer(run_only, testing::tiny_dataset());
  CHECK_NOTHROW(longer.restore(ck));

  Trainer different_words(testing::tiny_config(), testing::tiny_dataset(8, 32, 99));
  CHECK_THROWS_AS(different_words.restore(ck), ConfigError);

  Checkpoint encoders = ck;
  encoders.kind = "damsm";
  Trainer again(testing::tiny_config(), testing::tiny_dataset());
  CHECK_THROWS_AS(again.restore(encoders), ConfigError);
}

TEST_CASE("zero epochs write the initialization") {
  QuietWarnings quiet;
  auto c = testing::tiny_config();
  c.epochs = 0;
  c.out_dir = scratch("epochs0").string();
  auto result = run_training(c, testing::tiny_dataset(), nullptr);
  CHECK(result.records.empty());
  auto saved = load_checkpoint(result.final_checkpoint);
  Trainer init(c, testing::tiny_dataset());
  auto expected = init.checkpoint();
  CHECK(saved.step == 0);
  REQUIRE(saved.blobs.size() == expected.blobs.size());
  for (const auto& [path, blob] : expected.blobs) {
    REQUIRE(saved.has(path));
    CHECK_MESSAGE(saved.blobs.at(path).values == blob.values, path);
  }
  CHECK(fs::exists(fs::path(c.out_dir) / "samples" / "final.png"));
}

TEST_CASE("run_training logs every step and resumes from a periodic checkpoint") {
  QuietWarnings quiet;
  auto c = testing::tiny_config();
  c.epochs = 2;  // 8 pairs at batch 4: 4 steps
  c.checkpoint_every = 2;
  c.sample_every = 2;
  c.out_dir = scratch("full").string();
  auto full = run_training(c, testing::tiny_dataset(), nullptr);
  REQUIRE(full.records.size() == 4);
  std::vector<std::string> lines;
  {
    std::ifstream in(full.log_path);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
  }
  REQUIRE(lines.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(lines[i] == to_json_line(full.records[i]));
  CHECK(lines[0].find("\"step\":0,\"d_total\":") == 1);
  CHECK(fs::exists(fs::path(c.out_dir) / "ckpt_step2.tar"));
  CHECK(fs::exists(fs::path(c.out_dir) / "samples" / "step2.png"));

  // Resume into a copy of the run directory: the log is truncated at the
  // checkpoint step and the rest is reproduced exactly.
  auto c2 = c;
  c2.out_dir = scratch("resumed").string();
  fs::copy_file(full.log_path, fs::path(c2.out_dir) / "train_log.jsonl");
  auto ck = load_checkpoint(fs::path(c.out_dir) / "ckpt_step2.tar");
  auto resumed = run_training(c2, testing::tiny_dataset(), nullptr, &ck);
  REQUIRE(resumed.records.size() == 2);
  std::vector<std::string> lines2;
  {
    std::ifstream in(resumed.log_path);
    for (std::string l; std::getline(in, l);) lines2.push_back(l);
  }
  CHECK(lines2 == lines);
  auto a = load_checkpoint(full.final_checkpoint), b = load_checkpoint(resumed.final_checkpoint);
  for (const auto& [path, blob] : a.blobs) CHECK_MESSAGE(b.blobs.at(path).values == blob.values, path);
}

TEST_CASE("mask ablation changes training") {
  QuietWarnings quiet;
  auto all = testing::tiny_config();
  auto last = testing::tiny_config();
  last.masked_stages = {4};
  Trainer a(all, testing::tiny_dataset()), b(last, testing::tiny_dataset());
  // Same init, different gating.
  CHECK(a.checkpoint().blobs.at("gen/head/weight").values == b.checkpoint().blobs.at("gen/head/weight").values);
  CHECK(to_json_line(a.train_step()) != to_json_line(b.train_step()));
}

TEST_CASE("extra discriminator steps and the averaged generator") {
  QuietWarnings quiet;
  auto c = testing::tiny_config();
  c.d_steps_per_g = 2;
  c.ema_decay = 0.5;
  c.epochs = 2;
  Trainer t(c, testing::tiny_dataset());
  CHECK(t.total_steps() == 2);
  REQUIRE(t.models().gen_ema.has_value());
  auto live0 = t.models().gen.parameters();
  auto avg0 = snapshot(t.models().gen_ema->parameters());
  CHECK(avg0 == snapshot(live0));
  auto before = snapshot(t.models().gen.parameters());
  t.train_step();
  auto ck = t.checkpoint();
  CHECK(ck.counters.at("adam_d_steps") == 2);
  CHECK(ck.counters.at("adam_g_steps") == 1);
  // One update with decay 1/2 lands halfway between the old and new weights.
  auto live = t.models().gen.parameters();
  auto avg = t.models().gen_ema->parameters();
  for (std::size_t i = 0; i < live.size(); ++i)
    for (std::int64_t k = 0; k < live[i].tensor.numel(); ++k)
      REQUIRE(avg[i].tensor[k] == doctest::Approx(0.5 * before[i][static_cast<std::size_t>(k)] + 0.5 * live[i].tensor[k]).epsilon(1e-14));
}

TEST_CASE("a non-finite loss aborts with a diagnostic record") {
  QuietWarnings quiet;
  auto dir = scratch("nan");
  Trainer t(testing::tiny_config(), testing::tiny_dataset());
  t.set_diagnostic_path(dir / "diag.jsonl");
  t.models().disc.logit_conv.weight.mutable_data()[0] = std::nan("");
  CHECK_THROWS_AS(t.train_step(), DivergenceError);
  std::ifstream in(dir / "diag.jsonl");
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line.find("\"error\":\"non-finite loss\"") != std::string::npos);
  CHECK(line.find("d_total") != std::string::npos);
}

TEST_CASE("trainer rejects mismatched data") {
  QuietWarnings quiet;
  CHECK_THROWS_AS(Trainer(testing::tiny_config(), testing::tiny_dataset(8, 64)), ConfigError);
  CHECK_THROWS_AS(Trainer(testing::tiny_config(), testing::tiny_dataset(3)), ConfigError);
  CHECK_THROWS_AS(Trainer(testing::tiny_config(), data::Dataset{}), IoError);
}

TEST_CASE("pretraining lowers the DAMSM loss deterministically") {
  auto c = testing::tiny_config();
  c.pretrain_steps = 200;
  c.batch_size = 8;
  auto ds = testing::tiny_dataset(16);
  auto a = pretrain_damsm(c, ds);
  REQUIRE(a.losses.size() == 200);
  CHECK(a.losses.back() < a.losses.front());
  c.pretrain_steps = 20;
  auto b = pretrain_damsm(c, ds);
  auto b2 = pretrain_damsm(c, ds);
  CHECK(b.losses == b2.losses);
  CHECK(std::equal(b.losses.begin(), b.losses.end(), a.losses.begin()));
  CHECK(a.checkpoint.kind == "damsm");

  // With a zero rate and the whole set in every batch, only the order of
  // rows changes between steps, which the loss does not see.
  c.pretrain_lr = 0;
  c.pretrain_steps = 6;
  c.batch_size = 16;
  auto frozen = pretrain_damsm(c, ds);
  for (double l : frozen.losses) CHECK(l == doctest::Approx(frozen.losses.front()).epsilon(1e-12));
  Models init(c, data::build_vocabulary(data::all_captions(ds), 1));
  Checkpoint ck;
  ck.put(init.encoder_state());
  for (const auto& [path, blob] : ck.blobs) CHECK(frozen.checkpoint.blobs.at(path).values == blob.values);
}
