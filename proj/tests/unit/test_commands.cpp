#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gradcheck.hpp"
#include "ssagan/commands.hpp"
#include "ssagan/image_io.hpp"
#include "ssagan/log.hpp"
#include "tiny_run.hpp"

using namespace ssagan;
namespace fs = std::filesystem;

namespace {

struct QuietWarnings {
  WarningSink previous = set_warning_sink([](const std::string&) {});
  ~QuietWarnings() { set_warning_sink(previous); }
};

fs::path root() { return fs::temp_directory_path() / "ssagan_test_commands"; }

// One trained 5-stage run shared by the cases below.
const fs::path& trained_checkpoint() {
  static const fs::path path = [] {
    QuietWarnings quiet;
    fs::remove_all(root());
    auto c = testing::tiny_config(5);
    c.dataset_root = (root() / "toy").string();
    c.out_dir = (root() / "run").string();
    c.epochs = 1;
    data::write_dataset(testing::tiny_dataset(8, 64), c.dataset_root);
    return run_training(c, data::read_dataset(c.dataset_root), nullptr).final_checkpoint;
  }();
  return path;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kCaption = "a large red circle on gray background";

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SSAGAN_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("generate writes one tile per sample") {
  auto out = root() / "gen";
  auto path = commands::generate({trained_checkpoint(), kCaption, {}, 7, 3, out});
  auto img = image_io::read_png(path);
  CHECK(img.width == 64);
  CHECK(img.height == 3 * 64 + 2 * 2);
  CHECK(img.channels == 3);
}

TEST_CASE("edit with no swaps reproduces generate and a color swap changes the image") {
  QuietWarnings quiet;
  auto gen = commands::generate({trained_checkpoint(), kCaption, {}, 7, 2, root() / "g"});
  auto same = commands::edit({trained_checkpoint(), kCaption, {}, 7, 2, root() / "e0"});
  CHECK(slurp(gen) == slurp(same));

  auto run = commands::load_run(trained_checkpoint());
  Tensor z = commands::sampling_noise(7, 2);
  auto v = commands::sample_variants(*run.models, {kCaption, commands::apply_swap(kCaption, "red", "blue")}, z);
  REQUIRE(v.size() == 2);
  double l2 = 0;
  for (std::int64_t k = 0; k < v[0].image.numel(); ++k) l2 += std::pow(v[0].image[k] - v[1].image[k], 2);
  CHECK(l2 > 0);

  auto grid = commands::edit({trained_checkpoint(), kCaption, {{"red", "blue"}, {"circle", "square"}}, 7, 2, root() / "e2"});
  auto img = image_io::read_png(grid);
  CHECK(img.width == 3 * 64 + 2 * 2);
  CHECK(img.height == 2 * 64 + 2);
}

TEST_CASE("masks at five stages are sized 4 to 64") {
  auto paths = commands::masks({trained_checkpoint(), kCaption, {}, 3, 1, root() / "masks"});
  REQUIRE(paths.size() == 5);
  for (int k = 0; k < 5; ++k) {
    CHECK(paths[static_cast<std::size_t>(k)].filename() == "0_stage" + std::to_string(k + 1) + "_mask.png");
    auto img = image_io::read_png(paths[static_cast<std::size_t>(k)]);
    CHECK(img.channels == 1);
    CHECK(img.width == (4 << k));
    CHECK(img.height == (4 << k));
  }
}

TEST_CASE("checkpoint round trip preserves generation bitwise") {
  QuietWarnings quiet;
  auto c = testing::tiny_config(5);
  auto ds = testing::tiny_dataset(8, 64);
  Trainer t(c, ds);
  t.train_step();
  auto path = root() / "roundtrip.tar";
  save_checkpoint(path, t.checkpoint());
  auto loaded = commands::load_run(path);
  Tensor z = commands::sampling_noise(5, 3);
  auto a = commands::sample_variants(t.models(), {kCaption}, z);
  auto b = commands::sample_variants(*loaded.models, {kCaption}, z);
  CHECK(testing::bitwise_equal(a[0].image, b[0].image));
  for (std::size_t k = 0; k < a[0].masks.size(); ++k) CHECK(testing::bitwise_equal(a[0].masks[k], b[0].masks[k]));
}

TEST_CASE("caption and swap errors") {
  auto run = commands::load_run(trained_checkpoint());
  CHECK_THROWS_AS(commands::tokenize_checked("zebra xylophone", run.models->vocab), InputError);
  CHECK_THROWS_AS(commands::tokenize_checked("", run.models->vocab), InputError);
  CHECK_NOTHROW(commands::tokenize_checked("zebra red", run.models->vocab));
  CHECK(commands::apply_swap("A red circle, red square", "red", "blue") == "a blue circle blue square");
  CHECK_THROWS_AS(commands::apply_swap(kCaption, "green", "blue"), InputError);
  CHECK_THROWS_AS(commands::apply_swap(kCaption, "red circle", "blue"), InputError);
  CHECK_THROWS_AS(commands::load_run(root() / "missing.tar"), IoError);
}

TEST_CASE("toy classifier learns the toy classes") {
  auto train = data::synthesize_toy_dataset(720, 32, 21);
  auto test = data::synthesize_toy_dataset(60, 32, 22);
  auto stack = [](const data::Dataset& ds) {
    std::vector<Real> v;
    for (const auto& item : ds) v.insert(v.end(), item.image.data().begin(), item.image.data().end());
    return Tensor(Shape{static_cast<std::int64_t>(ds.size()), 3, 32, 32}, std::move(v));
  };
  std::vector<int> labels;
  for (const auto& item : train) labels.push_back(*data::toy_class_label(item.captions[0]));
  Tensor probs = commands::toy_classifier_probs(stack(train), labels, stack(test), 1500, 1);
  int correct = 0;
  for (std::int64_t i = 0; i < 60; ++i) {
    int best = 0;
    for (int k = 1; k < data::kToyClasses; ++k)
      if (probs.at({i, k}) > probs.at({i, best})) best = k;
    correct += best == *data::toy_class_label(test[static_cast<std::size_t>(i)].captions[0]);
  }
  // Chance is 1/18; small triangles and circles at 32 px are only a few pixels wide.
  CHECK(correct >= 24);
}

TEST_CASE("eval writes a single record") {
  QuietWarnings quiet;
  commands::EvalOptions o;
  o.ckpt = trained_checkpoint();
  o.n = 12;
  o.out = root() / "eval";
  o.classifier_steps = 20;
  auto rec = commands::evaluate(o);
  CHECK(rec.n_samples == 12);
  CHECK(rec.is_mean >= 1.0);
  CHECK(rec.is_mean <= data::kToyClasses + 1e-9);
  CHECK(std::isfinite(rec.fid));
  std::ifstream in(o.out / "eval.json");
  std::string line, extra;
  REQUIRE(std::getline(in, line));
  CHECK_FALSE(std::getline(in, extra));
  auto j = nlohmann::json::parse(line);
  for (const char* key : {"is_mean", "is_std", "fid", "n_samples", "backend_id"}) CHECK(j.contains(key));
  CHECK(j["n_samples"] == 12);
}

TEST_CASE("command-line exit codes") {
  const std::string ck = trained_checkpoint().string();
  const std::string out = (root() / "cli").string();
  CHECK(run_cli("generate --ckpt " + ck + " --caption \"" + kCaption + "\" --seed 1 --out " + out) == 0);
  CHECK(fs::exists(fs::path(out) / "generated.png"));
  CHECK(run_cli("masks --ckpt " + ck + " --caption \"" + kCaption + "\" --seed 1 --out " + out) == 0);
  CHECK(run_cli("edit --ckpt " + ck + " --caption \"" + kCaption + "\" --swap red=blue --seed 1 --out " + out) == 0);
  CHECK(run_cli("generate --ckpt " + ck + " --caption \"qqq zzz\" --seed 1 --out " + out) == 1);
  CHECK(run_cli("edit --ckpt " + ck + " --caption \"" + kCaption + "\" --swap red --seed 1 --out " + out) == 1);
  CHECK(run_cli("generate --ckpt /nonexistent.tar --caption red --seed 1 --out " + out) == 2);
  CHECK(run_cli("frobnicate") == 1);
  CHECK(run_cli("make-toy --n 4 --size 32 --seed 2 --out " + (root() / "cli_toy").string()) == 0);
  CHECK(fs::exists(root() / "cli_toy" / "captions.tsv"));

  std::ofstream(root() / "bad.cfg") << "stages = 5\nmasked_stages = 9\n";
  CHECK(run_cli("train --config " + (root() / "bad.cfg").string()) == 1);
  std::ofstream(root() / "nodata.cfg") << "dataset_root = /nonexistent\n";
  CHECK(run_cli("pretrain-damsm --config " + (root() / "nodata.cfg").string()) == 2);
  CHECK(run_cli("train --config /nonexistent.cfg") == 2);

  // Resuming with a changed config is refused.
  auto run = commands::load_run(ck);
  std::ofstream(root() / "changed.cfg") << to_config_text(run.config) << "lr_d = 1e-3\n";
  CHECK(run_cli("train --config " + (root() / "changed.cfg").string() + " --resume " + ck) == 1);
}
