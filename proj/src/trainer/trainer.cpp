#include "mmgan/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "mmgan/losses.hpp"
#include "mmgan/models.hpp"
#include "mmgan/ops.hpp"

namespace mmgan::train {

namespace {
std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_finite(double v, const char* term, std::uint64_t step) {
  if (!std::isfinite(v)) throw TrainingDiverged(term, step);
}
}  // namespace

bool TrainRecord::same_values(const TrainRecord& o) const {
  return step == o.step && d_loss == o.d_loss && g_loss == o.g_loss && eq1_value == o.eq1_value &&
         l_txt_img == o.l_txt_img && l_style == o.l_style && l_total == o.l_total;
}

std::string TrainLog::csv_row(const TrainRecord& r) {
  std::string s = std::to_string(r.step);
  for (double v : {r.d_loss, r.g_loss, r.eq1_value, r.l_txt_img, r.l_style, r.l_total, r.wall_ms}) s += "," + fmt17(v);
  return s;
}

std::string TrainLog::to_csv() const {
  std::string s = std::string(kHeader) + "\n";
  for (const auto& r : records) s += csv_row(r) + "\n";
  return s;
}

TrainLog TrainLog::parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw std::runtime_error("train log: missing or wrong header");
  TrainLog log;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw std::runtime_error("train log line " + std::to_string(lineno) + ": expected 8 fields");
    TrainRecord r;
    r.step = std::stoull(cells[0]);
    double* dst[] = {&r.d_loss, &r.g_loss, &r.eq1_value, &r.l_txt_img, &r.l_style, &r.l_total, &r.wall_ms};
    for (int i = 0; i < 7; ++i) *dst[i] = std::stod(cells[i + 1]);
    log.records.push_back(r);
  }
  return log;
}

bool TrainLog::same_values(const TrainLog& o) const {
  if (records.size() != o.records.size()) return false;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (!records[i].same_values(o.records[i])) return false;
  return true;
}

TrainingDiverged::TrainingDiverged(std::string term, std::uint64_t step)
    : std::runtime_error("training diverged: " + term + " is not finite at step " + std::to_string(step)),
      term_(std::move(term)),
      step_(step) {}

std::vector<data::Sample> load_dataset(const TrainConfig& config) {
  if (config.manifest.empty()) return data::synth_dataset(config.dataset_spec());
  return data::load_manifest(config.manifest);
}

enc::Vocabulary build_vocabulary(const TrainConfig& config, const std::vector<data::Sample>& samples) {
  if (config.manifest.empty()) return enc::Vocabulary(data::caption_vocabulary(config.dataset_spec()), config.arch.max_caption_len);
  std::vector<std::string> words;
  std::set<std::string> seen;
  for (const auto& s : samples)
    for (auto& w : enc::split_words(s.caption))
      if (seen.insert(w).second) words.push_back(w);
  return enc::Vocabulary(words, config.arch.max_caption_len);
}

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> rows) {
  if (rows.empty()) throw std::invalid_argument("gather_rows: no rows");
  const std::size_t per = t.size() / t.dim(0);
  Shape shape = t.shape();
  shape[0] = rows.size();
  std::vector<double> out;
  out.reserve(per * rows.size());
  for (auto r : rows) {
    if (r >= t.dim(0)) throw std::out_of_range("gather_rows: row " + std::to_string(r));
    out.insert(out.end(), t.data().begin() + static_cast<std::ptrdiff_t>(r * per),
               t.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * per));
  }
  return Tensor(shape, std::move(out));
}

TrainingData TrainingData::build(const ModelBundle& bundle, std::vector<data::Sample> samples) {
  const auto& cfg = bundle.config;
  const auto& arch = cfg.arch;
  if (samples.size() < 2) throw std::invalid_argument("dataset must contain at least 2 samples");
  TrainingData d;
  d.samples = std::move(samples);
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    const auto& s = d.samples[i];
    enc::check_image_shape(s.image.shape(), arch, false);
    if (s.class_id >= arch.num_classes)
      throw std::invalid_argument("sample " + std::to_string(i) + ": class_id " + std::to_string(s.class_id) +
                                  " >= num_classes " + std::to_string(arch.num_classes));
    d.tokens.push_back(enc::tokenize(s.caption, bundle.vocab));
  }
  d.split = data::split_indices(d.samples.size(), cfg.test_fraction, substream_seed(cfg.dataset_seed, "split"));
  if (d.split.train.size() < cfg.batch_size)
    throw std::invalid_argument("training split has " + std::to_string(d.split.train.size()) +
                                " samples, fewer than batch_size " + std::to_string(cfg.batch_size));
  for (auto i : d.split.train) d.train_by_style[d.samples[i].style_id].push_back(i);

  // Style statistics of every sample under the frozen style network.
  std::vector<Tensor> images;
  for (const auto& s : d.samples) images.push_back(s.image);
  Tape tape;
  nn::Bound sb(tape, bundle.at(net::kStyleNet), false);
  auto taps = enc::style_features(sb, tape.constant(metrics::stack_images(images)), arch);
  d.gram_diag = models::gram_diagonals(taps).value();
  for (Var t : taps) d.grams.push_back(enc::gram_matrix(t).value());
  return d;
}

std::size_t TrainingData::pick_style_reference(std::size_t style_id, std::size_t self, Rng& rng) const {
  auto it = train_by_style.find(style_id);
  if (it == train_by_style.end() || it->second.empty()) {
    // No training sample shares this style: fall back to any training sample.
    return split.train[rng.below(split.train.size())];
  }
  const auto& g = it->second;
  if (g.size() == 1) return g[0];
  const auto self_pos = std::find(g.begin(), g.end(), self);
  if (self_pos == g.end()) return g[rng.below(g.size())];
  std::size_t k = rng.below(g.size() - 1);
  if (k >= static_cast<std::size_t>(self_pos - g.begin())) ++k;
  return g[k];
}

Trainer::Trainer(ModelBundle bundle, std::vector<data::Sample> samples)
    : bundle_(std::move(bundle)), data_(TrainingData::build(bundle_, std::move(samples))) {}

Trainer Trainer::fresh(const TrainConfig& config) {
  config.validate();
  auto samples = load_dataset(config);
  auto vocab = build_vocabulary(config, samples);
  auto bundle = ModelBundle::create(config, std::move(vocab));
  Trainer t(std::move(bundle), std::move(samples));
  const auto& cfg = t.bundle_.config;
  if (cfg.classifier_steps > 0) {
    std::vector<Tensor> imgs;
    std::vector<std::size_t> labels;
    for (auto i : t.data_.split.train) {
      imgs.push_back(t.data_.samples[i].image);
      labels.push_back(t.data_.samples[i].class_id);
    }
    metrics::ClassifierTraining ct;
    ct.steps = cfg.classifier_steps;
    ct.seed = substream_seed(cfg.seed, "classifier");
    t.bundle_.at(net::kClassifier) = metrics::train_classifier(imgs, labels, cfg.arch, ct);
  }
  return t;
}

std::size_t Trainer::steps_per_epoch() const { return data_.split.train.size() / bundle_.config.batch_size; }

std::size_t Trainer::total_steps() const {
  const auto& c = bundle_.config;
  return c.max_steps > 0 ? c.max_steps : c.epochs * steps_per_epoch();
}

std::vector<std::size_t> Trainer::batch_indices(std::uint64_t step) const {
  const std::size_t spe = steps_per_epoch();
  const std::uint64_t epoch = step / spe;
  if (epoch != cached_epoch_) {
    epoch_batches_ = data::batches(data_.split.train.size(), bundle_.config.batch_size,
                                   substream_seed(bundle_.config.seed, "epochs"), epoch);
    cached_epoch_ = epoch;
  }
  std::vector<std::size_t> out;
  for (auto k : epoch_batches_.at(step % spe)) out.push_back(data_.split.train[k]);
  return out;
}

TrainRecord Trainer::step() {
  // A failed step restores every optimizable set, so no partial update survives.
  std::map<std::string, nn::ParamSet> params_before;
  for (const auto& n : optimizable_sets()) params_before.emplace(n, bundle_.at(n));
  const auto adam_before = bundle_.adam;
  auto restore = [&] {
    for (auto& [n, p] : params_before) bundle_.at(n) = std::move(p);
    bundle_.adam = adam_before;
  };
  try {
    return step_unguarded();
  } catch (const TrainingDiverged&) {
    restore();
    throw;
  } catch (const std::domain_error& e) {
    // adam_step rejects non-finite gradients, naming the parameter path.
    restore();
    throw TrainingDiverged(std::string("gradient (") + e.what() + ")", bundle_.step);
  }
}

TrainRecord Trainer::step_unguarded() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& cfg = bundle_.config;
  const auto& arch = cfg.arch;
  const std::uint64_t t = bundle_.step;
  const auto idx = batch_indices(t);
  const std::size_t bs = idx.size();
  Rng rng = substream(cfg.seed, "step", t);

  std::vector<std::size_t> refs(bs);
  std::vector<enc::TokenIds> tokens(bs);
  std::vector<Tensor> real_imgs(bs);
  for (std::size_t i = 0; i < bs; ++i) {
    refs[i] = data_.pick_style_reference(data_.samples[idx[i]].style_id, idx[i], rng);
    tokens[i] = data_.tokens[idx[i]];
    real_imgs[i] = data_.samples[idx[i]].image;
  }
  const Tensor real = metrics::stack_images(real_imgs);
  const Tensor ref_diag = gather_rows(data_.gram_diag, refs);
  std::vector<Tensor> ref_grams;
  for (const auto& g : data_.grams) ref_grams.push_back(gather_rows(g, refs));

  const Tensor text_frozen = [&] {
    Tape tape;
    nn::Bound tb(tape, bundle_.at(net::kText), false);
    return enc::encode_text(tb, tokens, arch).value();
  }();

  auto& P = bundle_.params;
  TrainRecord rec;
  rec.step = t;

  // (a) Discriminator update with G fixed.
  for (std::size_t k = 0; k < cfg.d_steps_per_g; ++k) {
    const Tensor z = models::sample_noise(bs, arch.d_z, rng);
    const Tensor fake = [&] {
      Tape tape;
      nn::Bound gb(tape, P.at(net::kGenerator), false), hb(tape, P.at(net::kStyleHead), false);
      Var s = models::style_vector(hb, tape.constant(ref_diag), arch);
      return models::generate(gb, tape.constant(z), tape.constant(text_frozen), s, arch).value();
    }();
    Tape tape;
    nn::Bound db(tape, P.at(net::kDiscriminator), true);
    Var text = tape.constant(text_frozen);
    Var d_real = models::discriminate(db, tape.constant(real), text, arch);
    Var d_fake = models::discriminate(db, tape.constant(fake), text, arch);
    Var d_loss = loss::discriminator_loss(d_real, d_fake);
    rec.d_loss = d_loss.item();
    rec.eq1_value = loss::adversarial_value(d_real, d_fake).item();
    check_finite(rec.d_loss, "d_loss", t);
    tape.backward(d_loss);
    nn::adam_step(P.at(net::kDiscriminator), db.grads(), bundle_.adam.at(net::kDiscriminator));
  }

  // (b) Generator update with D fixed.
  {
    const bool style_on = cfg.lambda_style > 0.0;
    const bool txt_on = cfg.lambda_txt_img > 0.0;
    const Tensor z = models::sample_noise(bs, arch.d_z, rng);
    Tape tape;
    nn::Bound gb(tape, P.at(net::kGenerator), true);
    nn::Bound ib(tape, P.at(net::kImage), txt_on);
    nn::Bound hb(tape, P.at(net::kStyleHead), style_on);
    nn::Bound tb(tape, P.at(net::kText), cfg.train_text_encoder);
    nn::Bound db(tape, P.at(net::kDiscriminator), false);
    nn::Bound sb(tape, P.at(net::kStyleNet), false);

    Var text = cfg.train_text_encoder ? enc::encode_text(tb, tokens, arch) : tape.constant(text_frozen);
    Var s = models::style_vector(hb, tape.constant(ref_diag), arch);
    Var fake = models::generate(gb, tape.constant(z), text, s, arch);
    Var g_loss = loss::generator_loss(models::discriminate(db, fake, text, arch), cfg.gan_objective);

    // A zero-weighted term is still evaluated for the log, off the gradient path.
    Var detached = tape.constant(fake.value());
    Var l_txt = loss::text_image_consistency_loss(enc::encode_image(ib, txt_on ? fake : detached, arch), text);
    std::vector<Var> target;
    for (const auto& g : ref_grams) target.push_back(tape.constant(g));
    std::vector<Var> grams;
    for (Var tap : enc::style_features(sb, style_on ? fake : detached, arch)) grams.push_back(enc::gram_matrix(tap));
    Var l_style = loss::style_matching_loss_from_grams(grams, target);

    rec.g_loss = g_loss.item();
    rec.l_txt_img = l_txt.item();
    rec.l_style = l_style.item();
    check_finite(rec.g_loss, "g_loss", t);
    check_finite(rec.l_txt_img, "l_txt_img", t);
    check_finite(rec.l_style, "l_style", t);

    Var objective = g_loss * cfg.lambda_gan;
    if (txt_on) objective = objective + l_txt * cfg.lambda_txt_img;
    if (style_on) objective = objective + l_style * cfg.lambda_style;
    tape.backward(objective);
    nn::adam_step(P.at(net::kGenerator), gb.grads(), bundle_.adam.at(net::kGenerator));
    if (txt_on) nn::adam_step(P.at(net::kImage), ib.grads(), bundle_.adam.at(net::kImage));
    if (style_on) nn::adam_step(P.at(net::kStyleHead), hb.grads(), bundle_.adam.at(net::kStyleHead));
    if (cfg.train_text_encoder) nn::adam_step(P.at(net::kText), tb.grads(), bundle_.adam.at(net::kText));
  }

  rec.l_total = loss::LossBreakdown(rec.eq1_value, rec.l_txt_img, rec.l_style, cfg.weights(), rec.d_loss, rec.g_loss)
                    .l_total;
  ++bundle_.step;
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

loss::LossBreakdown probe_losses(const ModelBundle& bundle, const TrainingData& data,
                                 std::span<const std::size_t> batch, const loss::LossWeights& weights,
                                 std::uint64_t seed) {
  const auto& arch = bundle.config.arch;
  const std::size_t bs = batch.size();
  if (bs == 0) throw std::invalid_argument("probe_losses: empty batch");
  Rng rng = substream(seed, "probe");
  std::vector<std::size_t> refs(bs);
  std::vector<enc::TokenIds> tokens(bs);
  std::vector<Tensor> real_imgs(bs);
  for (std::size_t i = 0; i < bs; ++i) {
    refs[i] = data.pick_style_reference(data.samples.at(batch[i]).style_id, batch[i], rng);
    tokens[i] = data.tokens[batch[i]];
    real_imgs[i] = data.samples[batch[i]].image;
  }
  Tape tape;
  nn::Bound gb(tape, bundle.at(net::kGenerator), false), db(tape, bundle.at(net::kDiscriminator), false),
      tb(tape, bundle.at(net::kText), false), ib(tape, bundle.at(net::kImage), false),
      hb(tape, bundle.at(net::kStyleHead), false), sb(tape, bundle.at(net::kStyleNet), false);
  Var text = enc::encode_text(tb, tokens, arch);
  Var s = models::style_vector(hb, tape.constant(gather_rows(data.gram_diag, refs)), arch);
  Var fake = models::generate(gb, tape.constant(models::sample_noise(bs, arch.d_z, rng)), text, s, arch);
  Var d_real = models::discriminate(db, tape.constant(metrics::stack_images(real_imgs)), text, arch);
  Var d_fake = models::discriminate(db, fake, text, arch);
  std::vector<Var> grams, target;
  for (Var tap : enc::style_features(sb, fake, arch)) grams.push_back(enc::gram_matrix(tap));
  for (const auto& g : data.grams) target.push_back(tape.constant(gather_rows(g, refs)));
  return loss::LossBreakdown(loss::adversarial_value(d_real, d_fake).item(),
                             loss::text_image_consistency_loss(enc::encode_image(ib, fake, arch), text).item(),
                             loss::style_matching_loss_from_grams(grams, target).item(), weights,
                             loss::discriminator_loss(d_real, d_fake).item(),
                             loss::generator_loss(d_fake, bundle.config.gan_objective).item());
}

}  // namespace mmgan::train
