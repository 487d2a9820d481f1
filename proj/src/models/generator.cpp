#include "mmgan/encoders.hpp"
#include "mmgan/models.hpp"

namespace mmgan::models {

namespace {
constexpr double kSlope = 0.2;

void require_2d(const char* what, Var v, std::size_t n, std::size_t d) {
  if (v.shape() != Shape{n, d})
    throw ShapeError(std::string(what) + ": expected [" + std::to_string(n) + "," + std::to_string(d) + "], got " +
                     shape_str(v.shape()));
}

std::string mod(std::size_t i, const char* which) { return "G.mod" + std::to_string(i) + "." + which; }

// x [N,C,H,W]; per-sample scale (1 + gamma) and shift beta from the style vector.
Var modulate(const nn::Bound& p, std::size_t block, Var x, Var style) {
  const Shape s = x.shape();
  const Shape per_channel{s[0], s[1], 1, 1};
  Var gamma = reshape(nn::dense(p, mod(block, "gamma"), style) + 1.0, per_channel);
  Var beta = reshape(nn::dense(p, mod(block, "beta"), style), per_channel);
  return broadcast_to(gamma, s) * x + broadcast_to(beta, s);
}
}  // namespace

nn::LayerSpec generator_spec(const ArchConfig& arch) {
  arch.validate();
  const auto& c = arch.g_channels;
  const std::size_t b = arch.base_size();
  std::size_t in = arch.d_z + arch.d_text;
  if (arch.style_injection == StyleInjection::kConcat) in += arch.d_style;
  nn::LayerSpec spec = nn::dense_spec("G.fc", in, c[0] * b * b);
  nn::append(spec, nn::conv_transpose_spec("G.up1", c[0], c[1], 4, 2));
  nn::append(spec, nn::conv_transpose_spec("G.up2", c[1], c[2], 4, 2));
  nn::append(spec, nn::conv_transpose_spec("G.out", c[2], 3, 4, 2));
  if (arch.style_injection == StyleInjection::kModulation)
    for (std::size_t i = 0; i < 3; ++i) {
      nn::append(spec, nn::dense_spec(mod(i, "gamma"), arch.d_style, c[i]));
      nn::append(spec, nn::dense_spec(mod(i, "beta"), arch.d_style, c[i]));
    }
  return spec;
}

nn::LayerSpec style_head_spec(const ArchConfig& arch) {
  arch.validate();
  nn::LayerSpec spec = nn::dense_spec("H.fc1", arch.style_feature_dim(), arch.style_head_hidden);
  nn::append(spec, nn::dense_spec("H.fc2", arch.style_head_hidden, arch.d_style));
  return spec;
}

Tensor sample_noise(std::size_t n, std::size_t d_z, Rng& rng) {
  Tensor z({n, d_z});
  for (auto& v : z.values()) v = rng.normal();
  return z;
}

Var generate(const nn::Bound& p, Var z, Var text, Var style, const ArchConfig& arch) {
  if (z.shape().size() != 2) throw ShapeError("generate: noise must be [N,d_z], got " + shape_str(z.shape()));
  const std::size_t n = z.shape()[0];
  require_2d("generate: noise", z, n, arch.d_z);
  require_2d("generate: text embedding", text, n, arch.d_text);
  require_2d("generate: style vector", style, n, arch.d_style);
  const auto& c = arch.g_channels;
  const std::size_t b = arch.base_size();
  const bool modulated = arch.style_injection == StyleInjection::kModulation;

  Var h = modulated ? concat({z, text}, 1) : concat({z, text, style}, 1);
  h = reshape(nn::dense(p, "G.fc", h), {n, c[0], b, b});
  const char* ups[] = {"G.up1", "G.up2"};
  for (std::size_t i = 0; i < 3; ++i) {
    if (i > 0) h = nn::conv_transpose(p, ups[i - 1], h, 2, 1);
    h = instance_norm(h);
    if (modulated) h = modulate(p, i, h, style);
    h = leaky_relu(h, kSlope);
  }
  return tanh(nn::conv_transpose(p, "G.out", h, 2, 1));
}

Var gram_diagonals(const std::vector<Var>& taps) {
  if (taps.empty()) throw ShapeError("gram_diagonals: no style taps");
  std::vector<Var> parts;
  for (Var t : taps) {
    const auto& s = t.shape();
    if (s.size() != 4) throw ShapeError("gram_diagonals: expected [N,C,H,W], got " + shape_str(s));
    // C * G[c][c] = mean_hw f^2, free of the 1/C that shrinks wide layers.
    parts.push_back(mean_axis(square(reshape(t, {s[0], s[1], s[2] * s[3]})), 2));
  }
  return parts.size() == 1 ? parts[0] : concat(parts, 1);
}

Var style_vector(const nn::Bound& p, Var gram_diag, const ArchConfig& arch) {
  if (gram_diag.shape().size() != 2 || gram_diag.shape()[1] != arch.style_feature_dim())
    throw ShapeError("style_vector: expected [N," + std::to_string(arch.style_feature_dim()) + "], got " +
                     shape_str(gram_diag.shape()));
  return nn::dense(p, "H.fc2", leaky_relu(nn::dense(p, "H.fc1", gram_diag), kSlope));
}

Tensor generate(const Tensor& z, const Tensor& text, const Tensor& style, const nn::ParamSet& params,
                const ArchConfig& arch) {
  Tape tape;
  nn::Bound b(tape, params, false);
  auto row = [&](const Tensor& t) { return tape.constant(t.reshaped({1, t.size()})); };
  const Tensor& img = generate(b, row(z), row(text), row(style), arch).value();
  return img.reshaped({3, arch.image_size, arch.image_size});
}

}  // namespace mmgan::models
