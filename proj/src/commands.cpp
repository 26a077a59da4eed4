#include "ssagan/commands.hpp"

#include <fstream>

#include <json.hpp>

#include "ssagan/image_io.hpp"
#include "ssagan/log.hpp"
#include "ssagan/metrics.hpp"

namespace ssagan::commands {

namespace {

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

Tensor row(const Tensor& batch, std::int64_t i) {
  Shape s(batch.shape().begin() + 1, batch.shape().end());
  return ops::reshape(ops::slice(batch, 0, i, 1), s);
}

image_io::Image8 variant_grid(const std::vector<Generated>& variants) {
  const std::int64_t n = variants.front().image.dim(0);
  std::vector<image_io::Image8> tiles;
  for (std::int64_t i = 0; i < n; ++i)
    for (const auto& v : variants) tiles.push_back(image_io::rgb_from_tensor(row(v.image, i)));
  return image_io::grid(tiles, static_cast<int>(variants.size()));
}

struct Classifier {
  nn::Conv2d c1, c2, c3;
  nn::Linear fc;
  Tensor forward(const Tensor& x) const {
    Tensor h = ops::leaky_relu(c1.forward(x), 0.2);
    h = ops::leaky_relu(c2.forward(h), 0.2);
    h = ops::leaky_relu(c3.forward(h), 0.2);
    return fc.forward(ops::reshape(h, {h.dim(0), h.numel() / h.dim(0)}));
  }
  nn::TensorList parameters() const {
    nn::TensorList out;
    c1.collect("c1", out);
    c2.collect("c2", out);
    c3.collect("c3", out);
    fc.collect("fc", out);
    return out;
  }
};

Tensor gather_images(const Tensor& images, const std::vector<std::int64_t>& idx) {
  const std::int64_t per = images.numel() / images.dim(0);
  std::vector<Real> v;
  v.reserve(idx.size() * static_cast<std::size_t>(per));
  for (auto i : idx) v.insert(v.end(), images.data().begin() + i * per, images.data().begin() + (i + 1) * per);
  Shape s = images.shape();
  s[0] = static_cast<std::int64_t>(idx.size());
  return Tensor(s, std::move(v));
}

Tensor stack(const std::vector<Tensor>& items) {
  std::vector<Real> v;
  for (const auto& t : items) v.insert(v.end(), t.data().begin(), t.data().end());
  Shape s = items.front().shape();
  s.insert(s.begin(), static_cast<std::int64_t>(items.size()));
  return Tensor(s, std::move(v));
}

}  // namespace

LoadedRun load_run(const std::filesystem::path& ckpt) {
  Checkpoint ck = load_checkpoint(ckpt);
  if (ck.kind != "gan") throw InputError(ckpt.string() + " is a '" + ck.kind + "' checkpoint, not a trained generator");
  LoadedRun run;
  run.config = config_from_checkpoint(ck);
  auto vocab = data::Vocabulary::from_tokens(ck.vocab_tokens);
  if (vocab.hash() != ck.vocab_hash) throw IoError("checkpoint vocabulary does not match its hash");
  run.models = std::make_unique<Models>(run.config, std::move(vocab));
  ck.restore(run.models->state());
  return run;
}

data::TokenSequence tokenize_checked(const std::string& caption, const data::Vocabulary& vocab) {
  auto t = data::tokenize(caption, vocab);
  bool any = false;
  for (int k = 0; k < t.effective_length; ++k) any = any || t.ids[static_cast<std::size_t>(k)] != data::Vocabulary::kUnkId;
  if (!any) throw InputError("caption '" + caption + "' has no words in the vocabulary");
  return t;
}

std::string apply_swap(const std::string& caption, const std::string& old_word, const std::string& new_word) {
  auto words = data::normalize_words(caption);
  auto old_norm = data::normalize_words(old_word);
  auto new_norm = data::normalize_words(new_word);
  if (old_norm.size() != 1 || new_norm.size() != 1) throw InputError("swap words must be single words: " + old_word + "=" + new_word);
  bool found = false;
  std::string out;
  for (auto& w : words) {
    if (w == old_norm[0]) {
      w = new_norm[0];
      found = true;
    }
    out += (out.empty() ? "" : " ") + w;
  }
  if (!found) throw InputError("swap word '" + old_word + "' does not occur in the caption");
  return out;
}

Tensor sampling_noise(std::uint64_t seed, std::int64_t n) {
  Rng rng = Rng::derive(seed, {kSampleStream, 1});
  return Tensor::randn({n, kNoiseDim}, rng);
}

std::vector<Generated> sample_variants(Models& models, const std::vector<std::string>& captions, const Tensor& z) {
  NoGradGuard guard;
  std::vector<Generated> out;
  const std::int64_t n = z.dim(0);
  for (const auto& caption : captions) {
    auto tok = tokenize_checked(caption, models.vocab);
    std::vector<data::TokenSequence> tokens(static_cast<std::size_t>(n), tok);
    out.push_back(models.sampler().generate(z, models.text.encode(tokens).sentence, Mode::eval));
  }
  return out;
}

std::filesystem::path generate(const SampleOptions& o) {
  if (o.n < 1) throw InputError("--n must be at least 1");
  LoadedRun run = load_run(o.ckpt);
  auto variants = sample_variants(*run.models, {o.caption}, sampling_noise(o.seed, o.n));
  ensure_dir(o.out);
  auto path = o.out / "generated.png";
  image_io::write_png(path, variant_grid(variants));
  return path;
}

std::vector<std::filesystem::path> masks(const SampleOptions& o) {
  if (o.n < 1) throw InputError("--n must be at least 1");
  LoadedRun run = load_run(o.ckpt);
  auto g = sample_variants(*run.models, {o.caption}, sampling_noise(o.seed, o.n)).front();
  ensure_dir(o.out);
  std::vector<std::filesystem::path> paths;
  for (std::int64_t i = 0; i < o.n; ++i)
    for (std::size_t k = 0; k < g.masks.size(); ++k) {
      auto path = o.out / (std::to_string(i) + "_stage" + std::to_string(k + 1) + "_mask.png");
      image_io::write_png(path, image_io::gray_from_tensor(row(g.masks[k], i)));
      paths.push_back(path);
    }
  return paths;
}

std::filesystem::path edit(const SampleOptions& o) {
  if (o.n < 1) throw InputError("--n must be at least 1");
  LoadedRun run = load_run(o.ckpt);
  std::vector<std::string> captions{o.caption};
  for (const auto& [from, to] : o.swaps) {
    captions.push_back(apply_swap(o.caption, from, to));
    if (!run.models->vocab.contains(data::normalize_words(to).front())) warn("swap word '" + to + "' is not in the vocabulary");
  }
  auto variants = sample_variants(*run.models, captions, sampling_noise(o.seed, o.n));
  ensure_dir(o.out);
  auto path = o.out / (o.swaps.empty() ? "generated.png" : "edit.png");
  image_io::write_png(path, variant_grid(variants));
  return path;
}

Tensor toy_classifier_probs(const Tensor& train_images, const std::vector<int>& labels, const Tensor& images,
                            int steps, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, {0xc1a5});
  // Flattened (not pooled) features: the label depends on which shape comes first, i.e. on position.
  const std::int64_t cells = (train_images.dim(2) / 8) * (train_images.dim(3) / 8);
  Classifier net{nn::Conv2d(3, 16, 3, 2, 1, rng), nn::Conv2d(16, 32, 3, 2, 1, rng), nn::Conv2d(32, 32, 3, 2, 1, rng),
                 nn::Linear(32 * cells, data::kToyClasses, rng)};
  auto params = net.parameters();
  optim::AdamConfig ac;
  ac.lr = 1e-3;
  ac.beta1 = 0.9;
  ac.beta2 = 0.999;
  optim::Adam opt(params, ac);
  const std::int64_t n = train_images.dim(0);
  const std::int64_t b = std::min<std::int64_t>(16, n);
  for (int step = 0; step < steps; ++step) {
    std::vector<std::int64_t> idx;
    std::vector<Real> onehot(static_cast<std::size_t>(b * data::kToyClasses), 0.0);
    for (std::int64_t i = 0; i < b; ++i) {
      idx.push_back(static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n))));
      onehot[static_cast<std::size_t>(i * data::kToyClasses + labels[static_cast<std::size_t>(idx.back())])] = 1.0;
    }
    Tensor logits = net.forward(gather_images(train_images, idx));
    Tensor target(Shape{b, data::kToyClasses}, std::move(onehot));
    Tensor loss = ops::mean(ops::sub(ops::logsumexp(logits, 1, false), ops::sum(ops::mul(logits, target), {1}, false)));
    opt.step(grad(loss, nn::tensors_of(params)));
  }
  NoGradGuard guard;
  return ops::softmax(net.forward(images), 1);
}

EvalRecord evaluate(const EvalOptions& o) {
  if (o.n < 2) throw InputError("--n must be at least 2");
  LoadedRun run = load_run(o.ckpt);
  Models& m = *run.models;
  const std::string root = o.dataset_root.empty() ? run.config.dataset_root : o.dataset_root;
  data::Dataset ds = data::read_dataset(root);
  const int size = run.config.image_size;

  std::vector<std::string> captions = data::all_captions(ds);
  std::vector<Tensor> fakes;
  {
    NoGradGuard guard;
    Tensor z = sampling_noise(run.config.seed ^ 0xe7a1, o.n);
    std::vector<data::TokenSequence> tokens;
    for (int i = 0; i < o.n; ++i) tokens.push_back(tokenize_checked(captions[static_cast<std::size_t>(i) % captions.size()], m.vocab));
    Tensor images = m.sampler().generate(z, m.text.encode(tokens).sentence, Mode::eval).image;
    for (int i = 0; i < o.n; ++i) fakes.push_back(row(images, i));
  }
  Tensor fake_images = stack(fakes);
  std::vector<Tensor> reals;
  for (const auto& item : ds) reals.push_back(item.image);
  Tensor real_images = stack(reals);

  auto train_set = data::synthesize_toy_dataset(720, size, run.config.seed ^ 0x15c1);
  std::vector<Tensor> cls_images;
  std::vector<int> labels;
  for (const auto& item : train_set) {
    cls_images.push_back(item.image);
    labels.push_back(*data::toy_class_label(item.captions[0]));
  }
  Tensor probs = toy_classifier_probs(stack(cls_images), labels, fake_images, o.classifier_steps, run.config.seed);
  auto is = metrics::inception_score(probs, 1);

  double f = 0;
  {
    NoGradGuard guard;
    f = metrics::fid(m.image.encode(real_images).global, m.image.encode(fake_images).global);
  }

  EvalRecord rec{is.mean, is.std, f, o.n, "toy-cnn18-is+damsm-global256-fid"};
  ensure_dir(o.out);
  nlohmann::ordered_json j;
  j["is_mean"] = rec.is_mean;
  j["is_std"] = rec.is_std;
  j["fid"] = rec.fid;
  j["n_samples"] = rec.n_samples;
  j["backend_id"] = rec.backend_id;
  std::ofstream out(o.out / "eval.json");
  if (!out) throw IoError("cannot write " + (o.out / "eval.json").string());
  out << j.dump() << "\n";
  return rec;
}

void pretrain(const TrainConfig& config) {
  config.validate();
  data::Dataset ds = data::read_dataset(config.dataset_root);
  ensure_dir(config.out_dir);
  const std::filesystem::path out = config.out_dir;
  auto result = pretrain_damsm(config, ds, out / "pretrain_log.jsonl");
  save_checkpoint(out / "damsm.tar", result.checkpoint);
}

RunResult train(const TrainConfig& config, const std::filesystem::path& resume) {
  config.validate();
  data::Dataset ds = data::read_dataset(config.dataset_root);
  std::optional<Checkpoint> encoders, from;
  if (!config.encoder_ckpt.empty()) encoders = load_checkpoint(config.encoder_ckpt);
  if (!resume.empty()) from = load_checkpoint(resume);
  return run_training(config, ds, encoders ? &*encoders : nullptr, from ? &*from : nullptr);
}

void make_toy(int n, int image_size, std::uint64_t seed, const std::filesystem::path& out) {
  data::write_dataset(data::synthesize_toy_dataset(n, image_size, seed), out);
}

}  // namespace ssagan::commands
