#include "ssagan/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_set>

#include "ssagan/error.hpp"
#include "ssagan/image_io.hpp"
#include "ssagan/rng.hpp"

namespace ssagan::data {

std::vector<std::string> normalize_words(std::string_view caption) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : caption) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>")
    throw InputError("vocabulary must start with <pad>, <unk>");
  Vocabulary v;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw InputError("duplicate vocabulary token '" + tokens[i] + "'");
    v.add(tokens[i]);
  }
  return v;
}

void Vocabulary::add(const std::string& word) {
  if (token_to_id_.count(word)) return;
  token_to_id_.emplace(word, size());
  id_to_token_.push_back(word);
}

std::int64_t Vocabulary::id(std::string_view word) const {
  auto it = token_to_id_.find(std::string(word));
  return it == token_to_id_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view word) const { return token_to_id_.count(std::string(word)) > 0; }

const std::string& Vocabulary::token(std::int64_t id) const {
  if (id < 0 || id >= size()) throw InputError("token id " + std::to_string(id) + " out of range");
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : id_to_token_) {
    for (char c : t) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    h ^= '\n';
    h *= 0x100000001b3ULL;
  }
  return h;
}

Vocabulary build_vocabulary(const std::vector<std::string>& captions, int min_freq) {
  if (captions.empty()) throw ConfigError("cannot build a vocabulary from zero captions");
  if (min_freq < 1) throw ConfigError("min_freq must be >= 1");
  std::vector<std::string> order;
  std::unordered_map<std::string, int> counts;
  for (const auto& caption : captions)
    for (auto& w : normalize_words(caption))
      if (counts[w]++ == 0) order.push_back(w);
  Vocabulary vocab;
  for (const auto& w : order)
    if (counts[w] >= min_freq) vocab.add(w);
  return vocab;
}

TokenSequence tokenize(std::string_view caption, const Vocabulary& vocab) {
  auto words = normalize_words(caption);
  if (words.empty()) throw InputError("caption has no tokens: '" + std::string(caption) + "'");
  TokenSequence seq;
  seq.ids.fill(Vocabulary::kPadId);
  seq.effective_length = static_cast<int>(std::min<std::size_t>(words.size(), kMaxWords));
  for (int i = 0; i < seq.effective_length; ++i) seq.ids[static_cast<std::size_t>(i)] = vocab.id(words[static_cast<std::size_t>(i)]);
  return seq;
}

// ---------------------------------------------------------------------------
// Toy shapes dataset

const std::vector<std::string>& toy_sizes() {
  static const std::vector<std::string> v{"small", "large"};
  return v;
}
const std::vector<std::string>& toy_colors() {
  static const std::vector<std::string> v{"red", "green", "blue", "yellow", "purple", "orange"};
  return v;
}
const std::vector<std::string>& toy_kinds() {
  static const std::vector<std::string> v{"circle", "square", "triangle"};
  return v;
}
const std::vector<std::string>& toy_relations() {
  static const std::vector<std::string> v{"above", "below", "left of", "right of"};
  return v;
}
const std::vector<std::string>& toy_backgrounds() {
  static const std::vector<std::string> v{"gray", "black", "white"};
  return v;
}

namespace {

struct Rgb {
  Real r, g, b;
};

Rgb color_rgb(const std::string& name) {
  static const std::unordered_map<std::string, Rgb> table{
      {"red", {220, 40, 40}},    {"green", {40, 180, 60}},    {"blue", {40, 80, 220}},
      {"yellow", {230, 210, 40}}, {"purple", {150, 60, 190}},  {"orange", {240, 140, 30}},
      {"gray", {128, 128, 128}},  {"black", {20, 20, 20}},     {"white", {235, 235, 235}},
  };
  auto it = table.find(name);
  if (it == table.end()) throw InputError("unknown toy color '" + name + "'");
  return it->second;
}

std::string describe(const ToyShape& s) { return s.size + " " + s.color + " " + s.kind; }

struct Placement {
  Real cx, cy, radius;  // fractions of the image side
};

std::vector<Placement> layout(const ToyScene& scene) {
  auto radius = [](const std::string& size, Real large, Real small) { return size == "large" ? large : small; };
  std::vector<Placement> out;
  const auto& sh = scene.shapes;
  if (sh.size() == 1) {
    out.push_back({0.5, 0.5, radius(sh[0].size, 0.32, 0.18)});
  } else if (sh.size() == 2) {
    Placement a{0.5, 0.5, radius(sh[0].size, 0.2, 0.11)};
    Placement b{0.5, 0.5, radius(sh[1].size, 0.2, 0.11)};
    if (scene.relation == "above") {
      a.cy = 0.25, b.cy = 0.75;
    } else if (scene.relation == "below") {
      a.cy = 0.75, b.cy = 0.25;
    } else if (scene.relation == "left of") {
      a.cx = 0.25, b.cx = 0.75;
    } else if (scene.relation == "right of") {
      a.cx = 0.75, b.cx = 0.25;
    } else {
      throw InputError("unknown relation '" + scene.relation + "'");
    }
    out = {a, b};
  } else if (sh.size() == 3) {
    for (int i = 0; i < 3; ++i) out.push_back({(2.0 * i + 1.0) / 6.0, 0.5, radius(sh[static_cast<std::size_t>(i)].size, 0.15, 0.08)});
  } else {
    throw InputError("toy scenes hold 1 to 3 shapes");
  }
  return out;
}

bool inside(const std::string& kind, Real dx, Real dy, Real r) {
  if (kind == "circle") return dx * dx + dy * dy <= r * r;
  if (kind == "square") return std::abs(dx) <= 0.85 * r && std::abs(dy) <= 0.85 * r;
  if (kind == "triangle") {
    // Upward triangle with apex at cy - r and base at cy + r.
    if (dy < -r || dy > r) return false;
    return std::abs(dx) <= (dy + r) * 0.5;
  }
  throw InputError("unknown toy shape '" + kind + "'");
}

template <class T>
const T& pick(const std::vector<T>& options, Rng& rng) {
  return options[static_cast<std::size_t>(rng.below(options.size()))];
}

}  // namespace

std::string toy_caption(const ToyScene& scene) {
  const auto& sh = scene.shapes;
  std::string body;
  if (sh.size() == 1)
    body = "a " + describe(sh[0]);
  else if (sh.size() == 2)
    body = "a " + describe(sh[0]) + " " + scene.relation + " a " + describe(sh[1]);
  else if (sh.size() == 3)
    body = describe(sh[0]) + " and " + describe(sh[1]) + " and " + describe(sh[2]) + " in a row";
  else
    throw InputError("toy scenes hold 1 to 3 shapes");
  return body + " on " + scene.background + " background";
}

Tensor render_toy_scene(const ToyScene& scene, int image_size) {
  if (image_size != 32 && image_size != 64 && image_size != 128 && image_size != 256)
    throw ConfigError("toy image_size must be one of 32, 64, 128, 256");
  const std::int64_t s = image_size;
  std::vector<Real> px(static_cast<std::size_t>(3 * s * s));
  auto put = [&](std::int64_t y, std::int64_t x, Rgb c) {
    px[static_cast<std::size_t>(0 * s * s + y * s + x)] = c.r / 255.0 * 2.0 - 1.0;
    px[static_cast<std::size_t>(1 * s * s + y * s + x)] = c.g / 255.0 * 2.0 - 1.0;
    px[static_cast<std::size_t>(2 * s * s + y * s + x)] = c.b / 255.0 * 2.0 - 1.0;
  };
  const Rgb bg = color_rgb(scene.background);
  for (std::int64_t y = 0; y < s; ++y)
    for (std::int64_t x = 0; x < s; ++x) put(y, x, bg);
  const auto places = layout(scene);
  for (std::size_t i = 0; i < scene.shapes.size(); ++i) {
    const Rgb c = color_rgb(scene.shapes[i].color);
    for (std::int64_t y = 0; y < s; ++y)
      for (std::int64_t x = 0; x < s; ++x) {
        const Real fx = (static_cast<Real>(x) + 0.5) / static_cast<Real>(s);
        const Real fy = (static_cast<Real>(y) + 0.5) / static_cast<Real>(s);
        if (inside(scene.shapes[i].kind, fx - places[i].cx, fy - places[i].cy, places[i].radius)) put(y, x, c);
      }
  }
  return Tensor(Shape{3, s, s}, std::move(px));
}

std::optional<int> toy_class_label(std::string_view caption) {
  auto words = normalize_words(caption);
  const auto& colors = toy_colors();
  const auto& kinds = toy_kinds();
  for (std::size_t i = 0; i + 1 < words.size(); ++i) {
    auto c = std::find(colors.begin(), colors.end(), words[i]);
    if (c == colors.end()) continue;
    auto k = std::find(kinds.begin(), kinds.end(), words[i + 1]);
    if (k == kinds.end()) return std::nullopt;
    return static_cast<int>((c - colors.begin()) * static_cast<std::ptrdiff_t>(kinds.size()) + (k - kinds.begin()));
  }
  return std::nullopt;
}

std::vector<ToyScene> toy_scenes(int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("toy dataset needs n >= 1");
  Rng rng = Rng::derive(seed, {0x70e5});
  std::vector<ToyScene> scenes;
  std::unordered_set<std::string> seen;
  int attempts = 0;
  while (static_cast<int>(scenes.size()) < n) {
    if (++attempts > 100 * n + 1000) throw ConfigError("could not draw enough distinct toy scenes");
    ToyScene scene;
    const auto count = 1 + rng.below(3);
    for (std::uint64_t i = 0; i < count; ++i)
      scene.shapes.push_back({pick(toy_sizes(), rng), pick(toy_colors(), rng), pick(toy_kinds(), rng)});
    if (count == 2) scene.relation = pick(toy_relations(), rng);
    scene.background = pick(toy_backgrounds(), rng);
    if (!seen.insert(toy_caption(scene)).second) continue;
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

Dataset synthesize_toy_dataset(int n, int image_size, std::uint64_t seed) {
  if (image_size != 32 && image_size != 64 && image_size != 128 && image_size != 256)
    throw ConfigError("toy image_size must be one of 32, 64, 128, 256");
  Dataset out;
  auto scenes = toy_scenes(n, seed);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    std::ostringstream id;
    id << "toy" << std::setw(5) << std::setfill('0') << i;
    out.push_back({id.str(), render_toy_scene(scenes[i], image_size), {toy_caption(scenes[i])}});
  }
  return out;
}

std::vector<std::string> all_captions(const Dataset& dataset) {
  std::vector<std::string> out;
  for (const auto& item : dataset) out.insert(out.end(), item.captions.begin(), item.captions.end());
  return out;
}

// ---------------------------------------------------------------------------
// Batching

std::vector<std::int64_t> flat_ids(const std::vector<TokenSequence>& seqs) {
  std::vector<std::int64_t> out;
  out.reserve(seqs.size() * kMaxWords);
  for (const auto& s : seqs) out.insert(out.end(), s.ids.begin(), s.ids.end());
  return out;
}

std::vector<int> lengths_of(const std::vector<TokenSequence>& seqs) {
  std::vector<int> out;
  for (const auto& s : seqs) out.push_back(s.effective_length);
  return out;
}

BatchStream::BatchStream(const Dataset& dataset, const Vocabulary& vocab, int batch_size, std::uint64_t seed)
    : dataset_(&dataset), batch_size_(batch_size), seed_(seed) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (static_cast<int>(dataset.size()) < batch_size)
    throw ConfigError("dataset of " + std::to_string(dataset.size()) + " images is smaller than batch_size " +
                      std::to_string(batch_size));
  for (const auto& item : dataset) {
    if (item.captions.empty()) throw InputError("image " + item.id + " has no captions");
    std::vector<TokenSequence> seqs;
    for (const auto& c : item.captions) seqs.push_back(tokenize(c, vocab));
    tokens_.push_back(std::move(seqs));
  }
  batches_per_epoch_ = static_cast<std::int64_t>(dataset.size()) / batch_size;
}

Batch BatchStream::batch_at(std::int64_t step) const {
  if (step < 0) throw ContractError("negative batch step");
  const std::int64_t epoch = step / batches_per_epoch_;
  const std::int64_t slot = step % batches_per_epoch_;
  std::vector<std::size_t> order(dataset_->size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffle = Rng::derive(seed_, {1, static_cast<std::uint64_t>(epoch)});
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

  Batch batch;
  const auto& first = (*dataset_)[order[0]].image;
  Shape shape{batch_size_, first.dim(0), first.dim(1), first.dim(2)};
  std::vector<Real> pixels;
  pixels.reserve(static_cast<std::size_t>(numel(shape)));
  for (int b = 0; b < batch_size_; ++b) {
    const std::size_t idx = order[static_cast<std::size_t>(slot * batch_size_ + b)];
    const auto& item = (*dataset_)[idx];
    if (item.image.shape() != first.shape()) throw InputError("dataset images differ in shape");
    Rng pick_caption = Rng::derive(seed_, {2, static_cast<std::uint64_t>(epoch), idx});
    const std::size_t cap = static_cast<std::size_t>(pick_caption.below(tokens_[idx].size()));
    batch.image_indices.push_back(idx);
    batch.caption_indices.push_back(cap);
    batch.tokens.push_back(tokens_[idx][cap]);
    auto values = item.image.data();
    pixels.insert(pixels.end(), values.begin(), values.end());
  }
  batch.images = Tensor(shape, std::move(pixels));
  for (int b = 0; b < batch_size_; ++b)
    batch.mismatched_tokens.push_back(batch.tokens[static_cast<std::size_t>((b + 1) % batch_size_)]);
  return batch;
}

// ---------------------------------------------------------------------------
// Disk layout

void write_dataset(const Dataset& dataset, const std::filesystem::path& root) {
  std::error_code ec;
  std::filesystem::create_directories(root / "images", ec);
  if (ec) throw IoError("cannot create " + (root / "images").string() + ": " + ec.message());
  std::ofstream tsv(root / "captions.tsv");
  if (!tsv) throw IoError("cannot write " + (root / "captions.tsv").string());
  for (const auto& item : dataset) {
    image_io::write_png(root / "images" / (item.id + ".png"), image_io::rgb_from_tensor(item.image));
    for (const auto& c : item.captions) {
      if (c.find('\t') != std::string::npos || c.find('\n') != std::string::npos)
        throw InputError("captions may not contain tabs or newlines");
      tsv << item.id << '\t' << c << '\n';
    }
  }
  if (!tsv) throw IoError("failed writing captions.tsv");
}

Dataset read_dataset(const std::filesystem::path& root) {
  const auto tsv_path = root / "captions.tsv";
  std::ifstream tsv(tsv_path);
  if (!tsv) throw IoError("dataset not found: " + tsv_path.string());
  Dataset out;
  std::unordered_map<std::string, std::size_t> index;
  std::string line;
  int line_no = 0;
  while (std::getline(tsv, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw InputError(tsv_path.string() + ":" + std::to_string(line_no) + ": missing tab");
    std::string id = line.substr(0, tab);
    auto [it, fresh] = index.emplace(id, out.size());
    if (fresh) out.push_back({id, Tensor(), {}});
    out[it->second].captions.push_back(line.substr(tab + 1));
  }
  if (out.empty()) throw InputError("dataset has no captions: " + tsv_path.string());
  for (auto& item : out) {
    auto img = image_io::read_png(root / "images" / (item.id + ".png"));
    if (img.channels != 3) throw InputError("image " + item.id + " is not RGB");
    if (img.width != img.height || img.width < 32 || (img.width & (img.width - 1)))
      throw InputError("image " + item.id + " must be square with a power-of-two side >= 32");
    item.image = image_io::tensor_from_rgb(img);
  }
  return out;
}

}  // namespace ssagan::data
