#pragma once

#include <vector>

#include "mmgan/arch.hpp"
#include "mmgan/nn.hpp"
#include "mmgan/random.hpp"

namespace mmgan::models {

nn::LayerSpec generator_spec(const ArchConfig& arch);
nn::LayerSpec discriminator_spec(const ArchConfig& arch);
nn::LayerSpec style_head_spec(const ArchConfig& arch);

/// Standard-normal [n, d_z].
Tensor sample_noise(std::size_t n, std::size_t d_z, Rng& rng);

/// G(z, text, style): dense projection of [z, text] to a base_size^2 map,
/// then three stride-2 transposed convolutions up to image_size and tanh.
/// In modulation mode every hidden block applies instance norm followed by a
/// per-channel scale (1 + gamma) and shift beta, both dense maps of the style
/// vector. In concat mode the style vector joins [z, text] instead.
/// z [N,d_z], text [N,d_text], style [N,d_style] -> [N,3,S,S] in (-1,1).
Var generate(const nn::Bound& params, Var z, Var text, Var style, const ArchConfig& arch);

/// D(x, text): three stride-2 conv blocks with leaky ReLU(0.2), text embedding
/// tiled over the base_size^2 map and concatenated, a 1x1 conv, a dense
/// layer, sigmoid. Returns realness probabilities [N,1].
Var discriminate(const nn::Bound& params, Var images, Var text, const ArchConfig& arch);

/// Per-channel mean-square activation of each style tap (the Gram diagonal
/// scaled by C), concatenated: [N, style_feature_dim].
Var gram_diagonals(const std::vector<Var>& taps);

/// Style encoder head: two-layer MLP over Gram diagonals -> [N, d_style].
Var style_vector(const nn::Bound& params, Var gram_diag, const ArchConfig& arch);

// Single-sample conveniences over frozen parameters.
Tensor generate(const Tensor& z, const Tensor& text, const Tensor& style, const nn::ParamSet& params,
                const ArchConfig& arch);
double discriminate(const Tensor& image, const Tensor& text, const nn::ParamSet& params,
                    const ArchConfig& arch);

}  // namespace mmgan::models
