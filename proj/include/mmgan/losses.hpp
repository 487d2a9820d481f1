#pragma once

#include <span>
#include <string>
#include <vector>

#include "mmgan/arch.hpp"
#include "mmgan/nn.hpp"

namespace mmgan::loss {

/// Probabilities are clamped to [kProbFloor, 1 - kProbFloor] before logs.
inline constexpr double kProbFloor = 1e-12;

enum class GanObjective { kNonSaturating, kMinimax };
std::string to_string(GanObjective o);
GanObjective gan_objective_from_string(const std::string& s);

// Batch losses over D outputs of shape [N] or [N,1]; all return scalars.

/// mean log d_real + mean log(1 - d_fake).
Var adversarial_value(Var d_real, Var d_fake);
/// -mean log d_real - mean log(1 - d_fake).
Var discriminator_loss(Var d_real, Var d_fake);
/// Non-saturating: -mean log d_fake. Minimax: mean log(1 - d_fake).
Var generator_loss(Var d_fake, GanObjective objective = GanObjective::kNonSaturating);

/// Squared Euclidean distance between rows of [N,d] features, averaged over N.
Var text_image_consistency_loss(Var image_features, Var text_embeddings);

/// Per-layer Gram matrices [N,C_l,C_l] of both sides:
/// mean over N of sum_l (1/L) ||A_l - B_l||_F^2.
Var style_matching_loss_from_grams(const std::vector<Var>& grams_a, const std::vector<Var>& grams_b);
/// Same, starting from style-network taps [N,C_l,H_l,W_l].
Var style_matching_loss(const std::vector<Var>& taps_a, const std::vector<Var>& taps_b);

// Plain-value forms.
double adversarial_value(std::span<const double> d_real, std::span<const double> d_fake);
double discriminator_loss(std::span<const double> d_real, std::span<const double> d_fake);
double generator_loss(std::span<const double> d_fake, GanObjective objective = GanObjective::kNonSaturating);
double text_image_consistency_loss(const Tensor& image, const Tensor& text_embedding, const nn::ParamSet& image_encoder,
                                   const ArchConfig& arch);
double style_matching_loss(const Tensor& image, const Tensor& style_image, const nn::ParamSet& style_net,
                           const ArchConfig& arch);

struct LossWeights {
  double gan = 1.0;
  double txt_img = 10.0;
  double style = 10.0;

  /// All >= 0 and finite, at least one > 0.
  void validate() const;
  LossWeights scaled(double c) const { return {gan * c, txt_img * c, style * c}; }
};

double total_loss(double l_gan, double l_txt_img, double l_style, const LossWeights& w);

struct LossBreakdown {
  double l_gan = 0, l_txt_img = 0, l_style = 0, l_total = 0;
  double d_loss = 0, g_loss = 0;

  LossBreakdown() = default;
  /// l_total is computed here and re-checked against the weighted sum.
  LossBreakdown(double l_gan, double l_txt_img, double l_style, const LossWeights& w, double d_loss = 0,
                double g_loss = 0);
};

}  // namespace mmgan::loss
