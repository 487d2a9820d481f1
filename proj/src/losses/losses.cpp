#include "mmgan/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "mmgan/encoders.hpp"
#include "mmgan/ops.hpp"

namespace mmgan::loss {

namespace {
Var flat_probs(Var p, const char* what) {
  const auto& s = p.shape();
  const bool ok = (s.size() == 1) || (s.size() == 2 && s[1] == 1);
  if (!ok) throw ShapeError(std::string(what) + ": expected [N] or [N,1] probabilities, got " + shape_str(s));
  return s.size() == 1 ? p : reshape(p, {s[0]});
}

// The guarded log floors both p and 1 - p at kProbFloor.
Var log_p(Var p) { return log(p); }
Var log_1mp(Var p) { return log(add_scalar(-p, 1.0)); }

Var from_values(Tape& tape, std::span<const double> v, const char* what) {
  if (v.empty()) throw std::invalid_argument(std::string(what) + ": empty batch");
  return tape.constant(Tensor({v.size()}, std::vector<double>(v.begin(), v.end())));
}
}  // namespace

std::string to_string(GanObjective o) { return o == GanObjective::kMinimax ? "minimax" : "non_saturating"; }

GanObjective gan_objective_from_string(const std::string& s) {
  if (s == "minimax") return GanObjective::kMinimax;
  if (s == "non_saturating") return GanObjective::kNonSaturating;
  throw std::invalid_argument("gan_objective must be minimax or non_saturating, got '" + s + "'");
}

Var adversarial_value(Var d_real, Var d_fake) {
  return mean(log_p(flat_probs(d_real, "adversarial_value"))) + mean(log_1mp(flat_probs(d_fake, "adversarial_value")));
}

Var discriminator_loss(Var d_real, Var d_fake) { return -adversarial_value(d_real, d_fake); }

Var generator_loss(Var d_fake, GanObjective objective) {
  Var p = flat_probs(d_fake, "generator_loss");
  return objective == GanObjective::kMinimax ? mean(log_1mp(p)) : -mean(log_p(p));
}

Var text_image_consistency_loss(Var image_features, Var text_embeddings) {
  const auto& a = image_features.shape();
  const auto& b = text_embeddings.shape();
  if (a.size() != 2 || a != b)
    throw ShapeError("text_image_consistency_loss: image features " + shape_str(a) + " vs text embeddings " +
                     shape_str(b));
  return sum(square(image_features - text_embeddings)) * (1.0 / static_cast<double>(a[0]));
}

Var style_matching_loss_from_grams(const std::vector<Var>& grams_a, const std::vector<Var>& grams_b) {
  if (grams_a.empty() || grams_a.size() != grams_b.size())
    throw ShapeError("style_matching_loss: layer counts differ or are zero");
  const std::size_t n = grams_a[0].shape()[0];
  const double w = 1.0 / (static_cast<double>(grams_a.size()) * static_cast<double>(n));
  Var total = mul_scalar(sum(square(grams_a[0] - grams_b[0])), w);
  for (std::size_t l = 1; l < grams_a.size(); ++l) {
    if (grams_a[l].shape() != grams_b[l].shape() || grams_a[l].shape()[0] != n)
      throw ShapeError("style_matching_loss: layer " + std::to_string(l) + " shapes differ");
    total = total + mul_scalar(sum(square(grams_a[l] - grams_b[l])), w);
  }
  return total;
}

Var style_matching_loss(const std::vector<Var>& taps_a, const std::vector<Var>& taps_b) {
  std::vector<Var> ga, gb;
  for (Var t : taps_a) ga.push_back(enc::gram_matrix(t));
  for (Var t : taps_b) gb.push_back(enc::gram_matrix(t));
  return style_matching_loss_from_grams(ga, gb);
}

double adversarial_value(std::span<const double> d_real, std::span<const double> d_fake) {
  Tape t;
  return adversarial_value(from_values(t, d_real, "adversarial_value"), from_values(t, d_fake, "adversarial_value"))
      .item();
}

double discriminator_loss(std::span<const double> d_real, std::span<const double> d_fake) {
  Tape t;
  return discriminator_loss(from_values(t, d_real, "discriminator_loss"), from_values(t, d_fake, "discriminator_loss"))
      .item();
}

double generator_loss(std::span<const double> d_fake, GanObjective objective) {
  Tape t;
  return generator_loss(from_values(t, d_fake, "generator_loss"), objective).item();
}

double text_image_consistency_loss(const Tensor& image, const Tensor& text_embedding, const nn::ParamSet& image_encoder,
                                   const ArchConfig& arch) {
  const Tensor f = enc::encode_image(image, image_encoder, arch);
  if (f.size() != text_embedding.size())
    throw ShapeError("text_image_consistency_loss: image feature dim " + std::to_string(f.size()) +
                     " != text embedding dim " + std::to_string(text_embedding.size()));
  double s = 0;
  for (std::size_t i = 0; i < f.size(); ++i) s += (f[i] - text_embedding[i]) * (f[i] - text_embedding[i]);
  return s;
}

double style_matching_loss(const Tensor& image, const Tensor& style_image, const nn::ParamSet& style_net,
                           const ArchConfig& arch) {
  const auto a = enc::style_features(image, style_net, arch);
  const auto b = enc::style_features(style_image, style_net, arch);
  double total = 0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    const Tensor ga = enc::gram_matrix(a[l]), gb = enc::gram_matrix(b[l]);
    double s = 0;
    for (std::size_t i = 0; i < ga.size(); ++i) s += (ga[i] - gb[i]) * (ga[i] - gb[i]);
    total += s / static_cast<double>(a.size());
  }
  return total;
}

void LossWeights::validate() const {
  for (double w : {gan, txt_img, style})
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("loss weights must be finite and >= 0");
  if (gan == 0.0 && txt_img == 0.0 && style == 0.0) throw std::invalid_argument("at least one loss weight must be > 0");
}

double total_loss(double l_gan, double l_txt_img, double l_style, const LossWeights& w) {
  w.validate();
  return w.gan * l_gan + w.txt_img * l_txt_img + w.style * l_style;
}

LossBreakdown::LossBreakdown(double gan, double txt, double sty, const LossWeights& w, double d, double g)
    : l_gan(gan), l_txt_img(txt), l_style(sty), l_total(total_loss(gan, txt, sty, w)), d_loss(d), g_loss(g) {
  for (double v : {gan, txt, sty})
    if (!std::isfinite(v)) throw std::domain_error("loss components must be finite");
  const double check = w.gan * gan + w.txt_img * txt + w.style * sty;
  if (std::abs(check - l_total) > 1e-9 * std::max(1.0, std::abs(check)))
    throw std::logic_error("l_total does not match the weighted component sum");
}

}  // namespace mmgan::loss
