// Command-line front end: pretrain-damsm, train, generate, masks, edit, eval, make-toy.
#include <CLI11.hpp>

#include <iostream>

#include "ssagan/commands.hpp"

using namespace ssagan;

namespace {

int fail(int code, const std::string& what) {
  std::cerr << "error: " << what << "\n";
  return code;
}

TrainConfig load_config(const std::string& file, const std::vector<std::string>& overrides) {
  TrainConfig config = default_config(5);
  if (!file.empty()) apply_config_file(config, file);
  for (const auto& kv : overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return config;
}

std::pair<std::string, std::string> parse_swap(const std::string& s) {
  auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == s.size()) throw InputError("--swap expects OLD=NEW, got '" + s + "'");
  return {s.substr(0, eq), s.substr(eq + 1)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-to-image GAN with semantic-spatial aware convolution"};
  app.require_subcommand(1);

  std::string config_file, resume, ckpt, caption, out, dataset;
  std::vector<std::string> overrides, swaps;
  std::uint64_t seed = 0;
  int n = 4, size = 64;

  auto* pre = app.add_subcommand("pretrain-damsm", "fit the text and image encoders");
  pre->add_option("--config", config_file, "key = value config file")->required();
  pre->add_option("--set", overrides, "override a config key (key=value)");

  auto* train = app.add_subcommand("train", "train generator and discriminator");
  train->add_option("--config", config_file)->required();
  train->add_option("--set", overrides);
  train->add_option("--resume", resume, "continue from a training checkpoint");

  auto add_sampling = [&](CLI::App* sub, int default_n) {
    n = default_n;
    sub->add_option("--ckpt", ckpt)->required();
    sub->add_option("--caption", caption)->required();
    sub->add_option("--seed", seed)->required();
    sub->add_option("--out", out)->required();
    sub->add_option("--n", n, "samples (rows)");
  };
  auto* gen = app.add_subcommand("generate", "sample images for a caption");
  add_sampling(gen, 4);
  auto* msk = app.add_subcommand("masks", "write per-stage mask maps");
  add_sampling(msk, 1);
  auto* edt = app.add_subcommand("edit", "swap words and resample with the same noise");
  add_sampling(edt, 4);
  edt->add_option("--swap", swaps, "OLD=NEW");

  auto* ev = app.add_subcommand("eval", "IS and FID of generated samples");
  ev->add_option("--ckpt", ckpt)->required();
  ev->add_option("--n", n)->required();
  ev->add_option("--out", out)->required();
  ev->add_option("--dataset", dataset, "reference dataset (default: the run's own)");

  auto* toy = app.add_subcommand("make-toy", "write a synthetic shapes dataset");
  toy->add_option("--n", n)->required();
  toy->add_option("--size", size);
  toy->add_option("--seed", seed);
  toy->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*pre) {
      commands::pretrain(load_config(config_file, overrides));
    } else if (*train) {
      auto result = commands::train(load_config(config_file, overrides), resume);
      std::cout << result.final_checkpoint.string() << "\n";
    } else if (*gen || *msk || *edt) {
      commands::SampleOptions o{ckpt, caption, {}, seed, n, out};
      for (const auto& s : swaps) o.swaps.push_back(parse_swap(s));
      if (*gen) std::cout << commands::generate(o).string() << "\n";
      if (*msk)
        for (const auto& p : commands::masks(o)) std::cout << p.string() << "\n";
      if (*edt) std::cout << commands::edit(o).string() << "\n";
    } else if (*ev) {
      commands::EvalOptions o;
      o.ckpt = ckpt;
      o.n = n;
      o.out = out;
      o.dataset_root = dataset;
      commands::evaluate(o);
      std::cout << (std::filesystem::path(out) / "eval.json").string() << "\n";
    } else if (*toy) {
      commands::make_toy(n, size, seed, out);
    }
  } catch (const IoError& e) {
    return fail(2, e.what());
  } catch (const InputError& e) {
    return fail(1, e.what());
  } catch (const ConfigError& e) {
    return fail(1, e.what());
  } catch (const DivergenceError& e) {
    return fail(3, e.what());
  } catch (const std::exception& e) {
    return fail(3, e.what());
  }
  return 0;
}
