#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ssagan/tensor.hpp"

namespace ssagan::data {

/// Fixed caption length of the text encoder.
inline constexpr int kMaxWords = 18;

/// Lowercases, turns punctuation into separators and splits on whitespace.
std::vector<std::string> normalize_words(std::string_view caption);

class Vocabulary {
 public:
  static constexpr std::int64_t kPadId = 0;
  static constexpr std::int64_t kUnkId = 1;

  Vocabulary();
  /// Rebuilds from an id-ordered token list whose first two entries are the specials.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::int64_t size() const { return static_cast<std::int64_t>(id_to_token_.size()); }
  /// kUnkId for unknown words.
  std::int64_t id(std::string_view word) const;
  bool contains(std::string_view word) const;
  const std::string& token(std::int64_t id) const;
  const std::vector<std::string>& tokens() const { return id_to_token_; }
  /// FNV-1a over the id-ordered token list; changes whenever any id mapping does.
  std::uint64_t hash() const;

  void add(const std::string& word);

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, std::int64_t> token_to_id_;
};

/// Every token seen at least `min_freq` times, ordered by first occurrence.
Vocabulary build_vocabulary(const std::vector<std::string>& captions, int min_freq);

struct TokenSequence {
  std::array<std::int64_t, kMaxWords> ids{};
  int effective_length = 0;
};

TokenSequence tokenize(std::string_view caption, const Vocabulary& vocab);

struct CaptionedImage {
  std::string id;
  Tensor image;  // (3, S, S) in [-1, 1]
  std::vector<std::string> captions;
};

using Dataset = std::vector<CaptionedImage>;

/// Attributes of one synthetic shape.
struct ToyShape {
  std::string size;   // small | large
  std::string color;  // red | green | blue | yellow | purple | orange
  std::string kind;   // circle | square | triangle
  bool operator==(const ToyShape&) const = default;
};

/// Scene description that both renders the image and templates the caption.
struct ToyScene {
  std::vector<ToyShape> shapes;  // 1..3
  std::string relation;          // above | below | left of | right of (two shapes only)
  std::string background;        // gray | black | white
  bool operator==(const ToyScene&) const = default;
};

const std::vector<std::string>& toy_sizes();
const std::vector<std::string>& toy_colors();
const std::vector<std::string>& toy_kinds();
const std::vector<std::string>& toy_relations();
const std::vector<std::string>& toy_backgrounds();

std::string toy_caption(const ToyScene& scene);
Tensor render_toy_scene(const ToyScene& scene, int image_size);

/// Class of a toy caption for the desk-scale IS classifier: color x kind of
/// the first shape (18 classes). nullopt for captions outside the toy grammar.
std::optional<int> toy_class_label(std::string_view caption);
inline constexpr int kToyClasses = 18;

/// n distinct scenes (distinct captions), one caption each, deterministic in seed.
Dataset synthesize_toy_dataset(int n, int image_size, std::uint64_t seed);
/// Scenes used by synthesize_toy_dataset, in order.
std::vector<ToyScene> toy_scenes(int n, std::uint64_t seed);

/// All captions of a dataset, flattened in image order.
std::vector<std::string> all_captions(const Dataset& dataset);

struct Batch {
  Tensor images;  // (B, 3, S, S)
  std::vector<TokenSequence> tokens;
  std::vector<TokenSequence> mismatched_tokens;  // tokens rotated by one row
  std::vector<std::size_t> image_indices;
  std::vector<std::size_t> caption_indices;

  std::int64_t size() const { return static_cast<std::int64_t>(tokens.size()); }
};

/// Flattened (B*18) ids and (B) lengths of a token list.
std::vector<std::int64_t> flat_ids(const std::vector<TokenSequence>& seqs);
std::vector<int> lengths_of(const std::vector<TokenSequence>& seqs);

/// Deterministic batches: epoch e uses a shuffle seeded by (seed, e); each
/// image draws one caption uniformly. The trailing partial batch of an epoch
/// is dropped. batch_at(step) is a pure function, so resuming needs no state.
class BatchStream {
 public:
  BatchStream(const Dataset& dataset, const Vocabulary& vocab, int batch_size, std::uint64_t seed);

  Batch batch_at(std::int64_t step) const;
  std::int64_t batches_per_epoch() const { return batches_per_epoch_; }
  int batch_size() const { return batch_size_; }

 private:
  const Dataset* dataset_;
  std::vector<std::vector<TokenSequence>> tokens_;
  int batch_size_;
  std::uint64_t seed_;
  std::int64_t batches_per_epoch_;
};

// On-disk layout: <root>/images/<id>.png and <root>/captions.tsv (id TAB caption, one row per caption).
void write_dataset(const Dataset& dataset, const std::filesystem::path& root);
Dataset read_dataset(const std::filesystem::path& root);

}  // namespace ssagan::data
