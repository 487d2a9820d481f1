#include <algorithm>

#include "mmgan/encoders.hpp"

namespace mmgan::enc {

namespace {
constexpr double kSlope = 0.2;

std::string layer(const char* net, const char* kind, std::size_t i) {
  return std::string(net) + "." + kind + std::to_string(i);
}

// [N,C,H,W] -> [N,C]
Var global_average_pool(Var x) {
  const auto& s = x.shape();
  return mean_axis(reshape(x, {s[0], s[1], s[2] * s[3]}), 2);
}

Tensor batch_of_one(const Tensor& image) {
  Shape s{1};
  s.insert(s.end(), image.shape().begin(), image.shape().end());
  return image.reshaped(s);
}
}  // namespace

void check_image_shape(const Shape& shape, const ArchConfig& arch, bool batched) {
  const std::size_t off = batched ? 1 : 0;
  if (shape.size() != 3 + off || shape[off] != 3 || shape[off + 1] != arch.image_size ||
      shape[off + 2] != arch.image_size)
    throw ShapeError("expected " + std::string(batched ? "[N,3," : "[3,") + std::to_string(arch.image_size) +
                     "," + std::to_string(arch.image_size) + "] image, got " + shape_str(shape));
}

nn::LayerSpec text_encoder_spec(const ArchConfig& arch) {
  if (arch.vocab_size < 2) throw std::invalid_argument("text encoder needs a vocabulary");
  // The encoder is frozen during training, so its table sets the embedding
  // scale for good: unit bounds keep captions distinguishable after pooling.
  nn::LayerSpec spec{{"T.embed", {arch.vocab_size, arch.d_word}, nn::Init::kUniformEmbedding, 0, kTextEmbedBound}};
  nn::append(spec, nn::dense_spec("T.fc1", arch.d_word, arch.text_hidden));
  nn::append(spec, nn::dense_spec("T.fc2", arch.text_hidden, arch.d_text));
  return spec;
}

nn::LayerSpec image_encoder_spec(const ArchConfig& arch) {
  nn::LayerSpec spec;
  std::size_t in = 3;
  for (std::size_t i = 0; i < arch.enc_channels.size(); ++i) {
    nn::append(spec, nn::conv_spec(layer("I", "conv", i), in, arch.enc_channels[i], 4));
    in = arch.enc_channels[i];
  }
  nn::append(spec, nn::dense_spec("I.fc", in, arch.d_text));
  return spec;
}

nn::LayerSpec style_net_spec(const ArchConfig& arch) {
  nn::LayerSpec spec;
  std::size_t in = 3;
  const std::size_t depth = arch.style_layers.back() + 1;
  for (std::size_t i = 0; i < depth; ++i) {
    nn::append(spec, nn::conv_spec(layer("S", "conv", i), in, arch.style_channels[i], 3));
    in = arch.style_channels[i];
  }
  return spec;
}

Var encode_text(const nn::Bound& params, const std::vector<TokenIds>& tokens, const ArchConfig& arch) {
  for (const auto& seq : tokens)
    if (seq.size() != arch.max_caption_len)
      throw ShapeError("token sequence of length " + std::to_string(seq.size()) + ", expected " +
                       std::to_string(arch.max_caption_len));
  Var pooled = embedding_mean(params["T.embed"], tokens);
  Var h = leaky_relu(nn::dense(params, "T.fc1", pooled), kSlope);
  return tanh(nn::dense(params, "T.fc2", h));
}

Var encode_image(const nn::Bound& params, Var images, const ArchConfig& arch) {
  check_image_shape(images.shape(), arch, true);
  Var h = images;
  for (std::size_t i = 0; i < arch.enc_channels.size(); ++i)
    h = leaky_relu(nn::conv(params, layer("I", "conv", i), h, 2, 1), kSlope);
  return nn::dense(params, "I.fc", global_average_pool(h));
}

std::vector<Var> style_features(const nn::Bound& params, Var images, const ArchConfig& arch) {
  check_image_shape(images.shape(), arch, true);
  std::vector<Var> taps;
  Var h = images;
  const std::size_t depth = arch.style_layers.back() + 1;
  for (std::size_t i = 0; i < depth; ++i) {
    h = leaky_relu(nn::conv(params, layer("S", "conv", i), h, i == 0 ? 1 : 2, 1), kSlope);
    if (std::find(arch.style_layers.begin(), arch.style_layers.end(), i) != arch.style_layers.end())
      taps.push_back(h);
  }
  return taps;
}

Var gram_matrix(Var fmap) {
  const auto& s = fmap.shape();
  if (s.size() != 4) throw ShapeError("gram_matrix expects [N,C,H,W], got " + shape_str(s));
  return gram(reshape(fmap, {s[0], s[1], s[2] * s[3]}));
}

Tensor encode_text(const TokenIds& tokens, const nn::ParamSet& params, const ArchConfig& arch) {
  Tape tape;
  nn::Bound b(tape, params, false);
  const Tensor& out = encode_text(b, {tokens}, arch).value();
  return out.reshaped({out.size()});
}

Tensor encode_image(const Tensor& image, const nn::ParamSet& params, const ArchConfig& arch) {
  check_image_shape(image.shape(), arch, false);
  Tape tape;
  nn::Bound b(tape, params, false);
  const Tensor& out = encode_image(b, tape.constant(batch_of_one(image)), arch).value();
  return out.reshaped({out.size()});
}

std::vector<Tensor> style_features(const Tensor& image, const nn::ParamSet& params, const ArchConfig& arch) {
  check_image_shape(image.shape(), arch, false);
  Tape tape;
  nn::Bound b(tape, params, false);
  std::vector<Tensor> out;
  for (Var v : style_features(b, tape.constant(batch_of_one(image)), arch)) {
    const auto& s = v.shape();
    out.push_back(v.value().reshaped({s[1], s[2], s[3]}));
  }
  return out;
}

Tensor gram_matrix(const Tensor& fmap) {
  if (fmap.rank() != 3) throw ShapeError("gram_matrix expects [C,H,W], got " + shape_str(fmap.shape()));
  Tape tape;
  const auto& s = fmap.shape();
  const Tensor& g = gram_matrix(tape.constant(fmap.reshaped({1, s[0], s[1], s[2]}))).value();
  return g.reshaped({s[0], s[0]});
}

}  // namespace mmgan::enc
