#include "ssagan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "ssagan/image_io.hpp"
#include "ssagan/log.hpp"
#include "ssagan/objectives.hpp"

namespace ssagan {

namespace {

GeneratorConfig generator_config(const TrainConfig& c) {
  GeneratorConfig g = configure_scale(c.stages, c.g_base_channels);
  g.mask_hidden = c.mask_hidden;
  g.affine_hidden = c.affine_hidden;
  g.norm.eval_batch_stats = c.eval_batch_stats;
  g.mask_enabled = c.mask_flags();
  return g;
}

optim::AdamConfig adam(double lr, double b1, double b2) {
  optim::AdamConfig a;
  a.lr = lr;
  a.beta1 = b1;
  a.beta2 = b2;
  return a;
}

double value(const Tensor& t) { return t.item(); }

std::vector<double> values(const Tensor& t) { return t.to_vector(); }

Tensor noise(std::uint64_t seed, std::int64_t step, int sub, std::int64_t batch) {
  Rng rng = Rng::derive(seed, {kNoiseStream, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(sub)});
  return Tensor::randn({batch, kNoiseDim}, rng);
}

data::Vocabulary vocabulary_for(const data::Dataset& dataset, const Checkpoint* encoders) {
  if (encoders) return data::Vocabulary::from_tokens(encoders->vocab_tokens);
  return data::build_vocabulary(data::all_captions(dataset), 1);
}

}  // namespace

Models::Models(const TrainConfig& c, data::Vocabulary vocabulary) : vocab(std::move(vocabulary)) {
  Rng r_text = Rng::derive(c.seed, {kInitStream, 1});
  Rng r_image = Rng::derive(c.seed, {kInitStream, 2});
  Rng r_gen = Rng::derive(c.seed, {kInitStream, 3});
  Rng r_disc = Rng::derive(c.seed, {kInitStream, 4});
  text = TextEncoder(vocab.size(), r_text, TextEncoderConfig{c.text_embedding_dim, c.text_hidden});
  image = damsm::ImageEncoder(damsm::ImageEncoderConfig{c.image_size, c.damsm_base_channels, kSentenceDim}, r_image);
  gen = Generator(generator_config(c), r_gen);
  disc = Discriminator(DiscriminatorConfig{c.image_size, c.d_base_channels, kSentenceDim}, r_disc);
  if (c.ema_decay > 0) {
    // Rebuilt rather than copied so the averaged weights do not alias the live ones.
    Rng r_copy = Rng::derive(c.seed, {kInitStream, 3});
    gen_ema = Generator(generator_config(c), r_copy);
    nn::TensorList a, b;
    gen.collect("", a);
    gen.collect_state("", a);
    gen_ema->collect("", b);
    gen_ema->collect_state("", b);
    nn::copy_values(a, b);
    nn::set_requires_grad(gen_ema->parameters(), false);
  }
}

nn::TensorList Models::state() const {
  nn::TensorList out = encoder_state();
  gen.collect("gen", out);
  gen.collect_state("gen_state", out);
  disc.collect("disc", out);
  if (gen_ema) {
    gen_ema->collect("gen_ema", out);
    gen_ema->collect_state("gen_ema_state", out);
  }
  return out;
}

nn::TensorList Models::encoder_state() const {
  nn::TensorList out;
  text.collect("text", out);
  image.collect("image", out);
  return out;
}

damsm::Hyper damsm_hyper(const TrainConfig& c) { return damsm::Hyper{c.gamma1, c.gamma2, c.gamma3}; }

TrainConfig config_from_checkpoint(const Checkpoint& ck) {
  TrainConfig c = default_config(5);
  apply_config_text(c, ck.config_text);
  return c;
}

PretrainResult pretrain_damsm(const TrainConfig& config, const data::Dataset& dataset,
                              const std::filesystem::path& log_path) {
  config.validate();
  if (dataset.empty()) throw IoError("pretraining needs a dataset");
  Models models(config, data::build_vocabulary(data::all_captions(dataset), 1));
  models.text.set_trainable(true);
  const auto params_text = models.text.parameters();
  const auto params_image = models.image.parameters();
  nn::TensorList params = params_text;
  params.insert(params.end(), params_image.begin(), params_image.end());
  nn::set_requires_grad(params, true);
  optim::Adam opt(params, adam(config.pretrain_lr, config.pretrain_beta1, config.pretrain_beta2));
  data::BatchStream stream(dataset, models.vocab, config.batch_size, Rng::derive(config.seed, {kBatchStream}).next_u64());
  const auto hyper = damsm_hyper(config);

  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::trunc);
    if (!log) throw IoError("cannot write " + log_path.string());
  }
  PretrainResult result;
  for (int step = 0; step < config.pretrain_steps; ++step) {
    auto batch = stream.batch_at(step);
    auto loss = damsm::damsm_loss(models.image.encode(batch.images), models.text.encode(batch.tokens),
                                  data::lengths_of(batch.tokens), hyper);
    const double l = value(loss.total);
    if (!std::isfinite(l)) throw DivergenceError("pretraining loss is not finite at step " + std::to_string(step));
    opt.step(grad(loss.total, nn::tensors_of(params)));
    result.losses.push_back(l);
    if (log) log << nlohmann::json{{"step", step}, {"damsm", l}}.dump() << "\n";
  }

  Checkpoint& ck = result.checkpoint;
  ck.kind = "damsm";
  ck.step = config.pretrain_steps;
  ck.seed = config.seed;
  ck.vocab_hash = models.vocab.hash();
  ck.config_hash = config_hash(config);
  ck.config_text = to_config_text(config);
  ck.vocab_tokens = models.vocab.tokens();
  ck.put(models.encoder_state());
  return result;
}

std::string to_json_line(const StepRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["d_total"] = r.d_total;
  j["d_real"] = r.d_real;
  j["d_fake"] = r.d_fake;
  j["d_mismatch"] = r.d_mismatch;
  j["gp"] = r.gp;
  j["g_adv"] = r.g_adv;
  j["g_damsm"] = r.g_damsm;
  j["g_total"] = r.g_total;
  return j.dump();
}

Trainer::Trainer(TrainConfig config, data::Dataset dataset, const Checkpoint* encoders)
    : config_(std::move(config)), dataset_(std::move(dataset)) {
  config_.validate();
  if (dataset_.empty()) throw IoError("training needs a dataset");
  for (const auto& item : dataset_)
    if (item.image.dim(1) != config_.image_size)
      throw ConfigError("dataset images are " + std::to_string(item.image.dim(1)) + " px but the config expects " +
                        std::to_string(config_.image_size));
  if (encoders && encoders->kind != "damsm" && encoders->kind != "gan")
    throw IoError("encoder checkpoint has unknown kind '" + encoders->kind + "'");
  models_ = std::make_unique<Models>(config_, vocabulary_for(dataset_, encoders));
  if (encoders) {
    if (encoders->vocab_hash != models_->vocab.hash()) throw IoError("encoder checkpoint vocabulary is corrupt");
    encoders->restore(models_->encoder_state());
  } else {
    warn("training with randomly initialised text and image encoders");
  }
  stream_ = std::make_unique<data::BatchStream>(dataset_, models_->vocab, config_.batch_size,
                                                Rng::derive(config_.seed, {kBatchStream}).next_u64());
  if (total_steps() > 0 && stream_->batches_per_epoch() < 1) throw ConfigError("dataset has no full batch");

  Models& m = *models_;
  m.text.set_trainable(config_.finetune_text_encoder);
  nn::set_requires_grad(m.image.parameters(), false);
  nn::set_requires_grad(m.gen.parameters(), true);
  nn::set_requires_grad(m.disc.parameters(), true);
  adam_g_ = optim::Adam(m.gen.parameters(), adam(config_.lr_g, config_.adam_beta1, config_.adam_beta2));
  adam_d_ = optim::Adam(m.disc.parameters(), adam(config_.lr_d, config_.adam_beta1, config_.adam_beta2));
  if (config_.finetune_text_encoder)
    adam_t_ = optim::Adam(m.text.parameters(), adam(config_.lr_g, config_.adam_beta1, config_.adam_beta2));
}

std::int64_t Trainer::total_steps() const {
  const std::int64_t per_epoch = stream_->batches_per_epoch() / config_.d_steps_per_g;
  std::int64_t total = per_epoch * config_.epochs;
  if (config_.max_steps > 0) total = std::min(total, config_.max_steps);
  return total;
}

StepRecord Trainer::train_step() {
  Models& m = *models_;
  const auto hyper = damsm_hyper(config_);
  StepRecord rec;
  rec.step = step_;

  Generated fake;
  data::Batch batch;
  Tensor sentence;
  TextFeatures text;

  for (int sub = 0; sub < config_.d_steps_per_g; ++sub) {
    batch = stream_->batch_at(step_ * config_.d_steps_per_g + sub);
    const std::int64_t b = batch.size();
    TextFeatures mismatched;
    {
      std::optional<NoGradGuard> guard;
      if (!config_.finetune_text_encoder) guard.emplace();
      text = m.text.encode(batch.tokens);
    }
    {
      NoGradGuard guard;
      mismatched = m.text.encode(batch.mismatched_tokens);
    }
    sentence = text.sentence;
    fake = m.gen.generate(noise(config_.seed, step_, sub, b), sentence, Mode::train);

    Tensor x = batch.images;
    x.set_requires_grad(true);
    Tensor s = sentence.detach().clone();
    s.set_requires_grad(true);
    Tensor features = m.disc.features(x);
    Tensor real_logits = m.disc.head(features, s);
    Tensor mismatch_logits = m.disc.head(features, mismatched.sentence.detach());
    Tensor fake_logits = m.disc.discriminate(fake.image.detach(), sentence.detach());
    Tensor gp = ma_gp_from_logits(real_logits, x, s, config_.lambda_ma, config_.p);
    AdvLossTerms terms = with_penalty(d_hinge_loss(real_logits, fake_logits, mismatch_logits), gp);

    rec.d_total = value(terms.total);
    rec.d_real = value(terms.real_matched);
    rec.d_fake = value(terms.fake);
    rec.d_mismatch = value(terms.real_mismatched);
    rec.gp = value(terms.gradient_penalty);
    rec.real_logits = values(real_logits);
    rec.fake_logits = values(fake_logits);
    rec.mismatch_logits = values(mismatch_logits);
    if (!std::isfinite(rec.d_total)) check_finite(rec);
    adam_d_.step(grad(terms.total, nn::tensors_of(adam_d_.params())));
  }

  Tensor g_logits = m.disc.discriminate(fake.image, sentence.detach());
  Tensor adv = g_adv_loss(g_logits);
  auto da = damsm::damsm_loss(m.image.encode(fake.image), text, data::lengths_of(batch.tokens), hyper);
  GenLossTerms g = g_total_loss(adv, da.total, config_.lambda_da);
  rec.g_adv = value(g.adversarial);
  rec.g_damsm = value(g.damsm);
  rec.g_total = value(g.total);
  rec.g_fake_logits = values(g_logits);
  check_finite(rec);

  std::vector<Tensor> wrt = nn::tensors_of(adam_g_.params());
  const std::size_t n_gen = wrt.size();
  if (config_.finetune_text_encoder) {
    auto t = nn::tensors_of(adam_t_.params());
    wrt.insert(wrt.end(), t.begin(), t.end());
  }
  auto grads = grad(g.total, wrt);
  adam_g_.step(std::vector<Tensor>(grads.begin(), grads.begin() + static_cast<std::ptrdiff_t>(n_gen)));
  if (config_.finetune_text_encoder)
    adam_t_.step(std::vector<Tensor>(grads.begin() + static_cast<std::ptrdiff_t>(n_gen), grads.end()));
  update_ema();
  ++step_;
  return rec;
}

void Trainer::check_finite(const StepRecord& r) const {
  const double all[] = {r.d_total, r.d_real, r.d_fake, r.d_mismatch, r.gp, r.g_adv, r.g_damsm, r.g_total};
  bool ok = true;
  for (double v : all) ok = ok && std::isfinite(v);
  if (ok) return;
  // NaN does not survive JSON; record which terms went bad instead.
  const char* names[] = {"d_total", "d_real", "d_fake", "d_mismatch", "gp", "g_adv", "g_damsm", "g_total"};
  nlohmann::ordered_json diag;
  diag["step"] = r.step;
  diag["error"] = "non-finite loss";
  std::vector<std::string> bad;
  for (int i = 0; i < 8; ++i)
    if (!std::isfinite(all[i])) bad.push_back(names[i]);
  diag["terms"] = bad;
  if (!diagnostic_path_.empty()) {
    std::ofstream out(diagnostic_path_, std::ios::app);
    out << diag.dump() << "\n";
  }
  throw DivergenceError("non-finite loss at step " + std::to_string(r.step) + ": " + diag["terms"].dump());
}

void Trainer::update_ema() {
  Models& m = *models_;
  if (!m.gen_ema) return;
  const double d = config_.ema_decay;
  nn::TensorList live, avg, live_state, avg_state;
  m.gen.collect("", live);
  m.gen_ema->collect("", avg);
  for (std::size_t i = 0; i < live.size(); ++i) {
    auto src = live[i].tensor.data();
    auto dst = avg[i].tensor.mutable_data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = d * dst[k] + (1 - d) * src[k];
  }
  m.gen.collect_state("", live_state);
  m.gen_ema->collect_state("", avg_state);
  nn::copy_values(live_state, avg_state);
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ck;
  ck.kind = "gan";
  ck.step = step_;
  ck.seed = config_.seed;
  ck.vocab_hash = models_->vocab.hash();
  ck.config_hash = config_hash(config_);
  ck.config_text = to_config_text(config_);
  ck.vocab_tokens = models_->vocab.tokens();
  ck.put(models_->state());
  ck.put(adam_g_.state("adam_g"));
  ck.put(adam_d_.state("adam_d"));
  ck.counters["adam_g_steps"] = adam_g_.steps();
  ck.counters["adam_d_steps"] = adam_d_.steps();
  if (config_.finetune_text_encoder) {
    ck.put(adam_t_.state("adam_t"));
    ck.counters["adam_t_steps"] = adam_t_.steps();
  }
  return ck;
}

void Trainer::restore(const Checkpoint& ck) {
  if (ck.kind != "gan") throw ConfigError("resume needs a training checkpoint, got kind '" + ck.kind + "'");
  if (ck.config_hash != config_hash(config_))
    throw ConfigError("checkpoint config hash " + hex64(ck.config_hash) + " differs from this run's " +
                      hex64(config_hash(config_)) + "; refusing to resume");
  if (ck.vocab_hash != models_->vocab.hash()) throw ConfigError("checkpoint vocabulary differs from this run's; refusing to resume");
  ck.restore(models_->state());
  ck.restore(adam_g_.state("adam_g"));
  ck.restore(adam_d_.state("adam_d"));
  adam_g_.set_steps(ck.counters.at("adam_g_steps"));
  adam_d_.set_steps(ck.counters.at("adam_d_steps"));
  if (config_.finetune_text_encoder) {
    ck.restore(adam_t_.state("adam_t"));
    adam_t_.set_steps(ck.counters.at("adam_t_steps"));
  }
  step_ = ck.step;
}

namespace {

void write_samples(Trainer& trainer, const std::filesystem::path& path) {
  NoGradGuard guard;
  Models& m = trainer.models();
  const auto& ds = trainer.dataset();
  const std::int64_t n = std::min<std::int64_t>(8, static_cast<std::int64_t>(ds.size()));
  std::vector<data::TokenSequence> tokens;
  for (std::int64_t i = 0; i < n; ++i) tokens.push_back(data::tokenize(ds[static_cast<std::size_t>(i)].captions[0], m.vocab));
  Rng rng = Rng::derive(trainer.config().seed, {kSampleStream});
  Tensor z = Tensor::randn({n, kNoiseDim}, rng);
  Tensor images = m.sampler().generate(z, m.text.encode(tokens).sentence, Mode::eval).image;
  const std::int64_t per = images.numel() / n;
  std::vector<image_io::Image8> tiles;
  for (std::int64_t i = 0; i < n; ++i) {
    std::vector<Real> v(images.data().begin() + i * per, images.data().begin() + (i + 1) * per);
    tiles.push_back(image_io::rgb_from_tensor(Tensor({3, images.dim(2), images.dim(3)}, std::move(v))));
  }
  image_io::write_png(path, image_io::grid(tiles, 4));
}

}  // namespace

RunResult run_training(const TrainConfig& config, const data::Dataset& dataset, const Checkpoint* encoders,
                       const Checkpoint* resume) {
  const std::filesystem::path out = config.out_dir;
  std::error_code ec;
  std::filesystem::create_directories(out / "samples", ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());

  Trainer trainer(config, dataset, encoders);
  RunResult result;
  result.log_path = out / "train_log.jsonl";
  std::vector<std::string> kept;
  if (resume) {
    trainer.restore(*resume);
    std::ifstream old(result.log_path);
    for (std::string line; std::getline(old, line);) {
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (!j.is_discarded() && j.contains("step") && j["step"].get<std::int64_t>() < trainer.step()) kept.push_back(line);
    }
  }
  std::ofstream log(result.log_path, std::ios::trunc);
  if (!log) throw IoError("cannot write " + result.log_path.string());
  for (const auto& line : kept) log << line << "\n";
  trainer.set_diagnostic_path(result.log_path);

  const std::int64_t total = trainer.total_steps();
  while (trainer.step() < total) {
    StepRecord r = trainer.train_step();
    log << to_json_line(r) << "\n" << std::flush;
    result.records.push_back(std::move(r));
    const std::int64_t done = trainer.step();
    if (config.checkpoint_every > 0 && done % config.checkpoint_every == 0 && done < total)
      save_checkpoint(out / ("ckpt_step" + std::to_string(done) + ".tar"), trainer.checkpoint());
    if (config.sample_every > 0 && done % config.sample_every == 0)
      write_samples(trainer, out / "samples" / ("step" + std::to_string(done) + ".png"));
  }
  result.final_checkpoint = out / "final.tar";
  save_checkpoint(result.final_checkpoint, trainer.checkpoint());
  write_samples(trainer, out / "samples" / "final.png");
  return result;
}

}  // namespace ssagan
