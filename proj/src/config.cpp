#include "ssagan/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "ssagan/error.hpp"

namespace ssagan {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string format_stages(const std::set<int>& s) {
  std::string out;
  for (int k : s) out += (out.empty() ? "" : ",") + std::to_string(k);
  return out.empty() ? "none" : out;
}

std::set<int> parse_stages(const std::string& key, const std::string& v) {
  std::set<int> out;
  if (v == "none" || v.empty()) return out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) out.insert(parse_number<int>(key, trim(item)));
  return out;
}

struct Field {
  const char* name;
  bool hashed;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

#define SSAGAN_INT(name, hashed)                                                                       \
  Field {                                                                                              \
    #name, hashed, [](const TrainConfig& c) { return std::to_string(c.name); },                       \
        [](TrainConfig& c, const std::string& v) { c.name = parse_number<decltype(c.name)>(#name, v); } \
  }
#define SSAGAN_REAL(name, hashed)                                                            \
  Field {                                                                                    \
    #name, hashed, [](const TrainConfig& c) { return format_double(c.name); },               \
        [](TrainConfig& c, const std::string& v) { c.name = parse_number<double>(#name, v); } \
  }
#define SSAGAN_BOOL(name, hashed)                                                            \
  Field {                                                                                    \
    #name, hashed, [](const TrainConfig& c) { return std::string(c.name ? "true" : "false"); }, \
        [](TrainConfig& c, const std::string& v) { c.name = parse_bool(#name, v); }          \
  }
#define SSAGAN_TEXT(name, hashed)                                       \
  Field {                                                               \
    #name, hashed, [](const TrainConfig& c) { return c.name; },         \
        [](TrainConfig& c, const std::string& v) { c.name = v; }        \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f{
      SSAGAN_INT(stages, true),
      Field{"masked_stages", true, [](const TrainConfig& c) { return format_stages(c.masked_stages); },
            [](TrainConfig& c, const std::string& v) { c.masked_stages = parse_stages("masked_stages", v); }},
      SSAGAN_INT(g_base_channels, true),
      SSAGAN_INT(d_base_channels, true),
      SSAGAN_INT(mask_hidden, true),
      SSAGAN_INT(affine_hidden, true),
      SSAGAN_INT(text_embedding_dim, true),
      SSAGAN_INT(text_hidden, true),
      SSAGAN_INT(damsm_base_channels, true),
      SSAGAN_BOOL(eval_batch_stats, true),
      SSAGAN_BOOL(finetune_text_encoder, true),
      SSAGAN_INT(batch_size, true),
      SSAGAN_REAL(lr_g, true),
      SSAGAN_REAL(lr_d, true),
      SSAGAN_REAL(adam_beta1, true),
      SSAGAN_REAL(adam_beta2, true),
      SSAGAN_REAL(lambda_ma, true),
      SSAGAN_REAL(p, true),
      SSAGAN_REAL(lambda_da, true),
      SSAGAN_REAL(gamma1, true),
      SSAGAN_REAL(gamma2, true),
      SSAGAN_REAL(gamma3, true),
      SSAGAN_INT(d_steps_per_g, true),
      SSAGAN_REAL(ema_decay, true),
      SSAGAN_INT(pretrain_steps, true),
      SSAGAN_REAL(pretrain_lr, true),
      SSAGAN_REAL(pretrain_beta1, true),
      SSAGAN_REAL(pretrain_beta2, true),
      SSAGAN_INT(seed, true),
      SSAGAN_INT(image_size, true),
      SSAGAN_INT(epochs, false),
      SSAGAN_INT(max_steps, false),
      SSAGAN_TEXT(dataset_root, false),
      SSAGAN_TEXT(encoder_ckpt, false),
      SSAGAN_TEXT(out_dir, false),
      SSAGAN_INT(checkpoint_every, false),
      SSAGAN_INT(sample_every, false),
  };
  return f;
}

}  // namespace

TrainConfig default_config(int stages) {
  TrainConfig c;
  c.stages = stages;
  for (int k = 1; k <= stages; ++k) c.masked_stages.insert(k);
  c.image_size = 4 << (stages - 1);
  return c;
}

void TrainConfig::validate() const {
  if (stages < 3 || stages > 7) throw ConfigError("stages must lie in [3, 7]");
  if (image_size != (4 << (stages - 1)))
    throw ConfigError("image_size " + std::to_string(image_size) + " does not match " + std::to_string(stages) +
                      " stages (expected " + std::to_string(4 << (stages - 1)) + ")");
  for (int k : masked_stages)
    if (k < 1 || k > stages) throw ConfigError("masked_stages entry " + std::to_string(k) + " outside 1.." + std::to_string(stages));
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (!(lr_g > 0) || !(lr_d > 0)) throw ConfigError("learning rates must be positive");
  if (pretrain_lr < 0) throw ConfigError("pretrain_lr must be non-negative");
  if (adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 || adam_beta2 >= 1) throw ConfigError("Adam betas must lie in [0, 1)");
  if (lambda_ma < 0 || lambda_da < 0) throw ConfigError("loss weights must be non-negative");
  if (!(p > 0)) throw ConfigError("penalty exponent p must be positive");
  if (!(gamma1 > 0) || !(gamma2 > 0) || !(gamma3 > 0)) throw ConfigError("DAMSM gammas must be positive");
  if (d_steps_per_g < 1) throw ConfigError("d_steps_per_g must be at least 1");
  if (ema_decay < 0 || ema_decay >= 1) throw ConfigError("ema_decay must lie in [0, 1)");
  if (epochs < 0 || max_steps < 0 || pretrain_steps < 0) throw ConfigError("run lengths must be non-negative");
  if (g_base_channels < 1 || d_base_channels < 1 || mask_hidden < 1 || affine_hidden < 0 || text_embedding_dim < 1 ||
      text_hidden < 1 || damsm_base_channels < 1)
    throw ConfigError("layer widths must be positive");
  if (2 * text_hidden != 256) throw ConfigError("text_hidden must be 128 so sentence vectors have 256 dimensions");
}

std::vector<bool> TrainConfig::mask_flags() const {
  std::vector<bool> out(static_cast<std::size_t>(stages));
  for (int k = 1; k <= stages; ++k) out[static_cast<std::size_t>(k - 1)] = masked_stages.count(k) > 0;
  return out;
}

void set_config_value(TrainConfig& config, const std::string& key, const std::string& value) {
  for (const auto& f : fields())
    if (key == f.name) {
      f.set(config, value);
      return;
    }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_text(TrainConfig& config, const std::string& text) {
  std::istringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    set_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void apply_config_file(TrainConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(config, ss.str());
}

std::map<std::string, std::string> config_entries(const TrainConfig& config) {
  std::map<std::string, std::string> out;
  for (const auto& f : fields()) out[f.name] = f.get(config);
  return out;
}

std::string to_config_text(const TrainConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.name) + " = " + f.get(config) + "\n";
  return out;
}

std::uint64_t config_hash(const TrainConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const std::string& s) {
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (const auto& f : fields())
    if (f.hashed) {
      mix(f.name);
      mix(f.get(config));
    }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace ssagan
