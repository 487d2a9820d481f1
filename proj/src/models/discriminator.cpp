#include "mmgan/encoders.hpp"
#include "mmgan/models.hpp"

namespace mmgan::models {

nn::LayerSpec discriminator_spec(const ArchConfig& arch) {
  arch.validate();
  const auto& c = arch.d_channels;
  const std::size_t b = arch.base_size();
  nn::LayerSpec spec = nn::conv_spec("D.conv0", 3, c[0], 4);
  nn::append(spec, nn::conv_spec("D.conv1", c[0], c[1], 4));
  nn::append(spec, nn::conv_spec("D.conv2", c[1], c[2], 4));
  nn::append(spec, nn::conv_spec("D.joint", c[2] + arch.d_text, c[2], 1));
  nn::append(spec, nn::dense_spec("D.fc", c[2] * b * b, 1));
  return spec;
}

Var discriminate(const nn::Bound& p, Var images, Var text, const ArchConfig& arch) {
  enc::check_image_shape(images.shape(), arch, true);
  const std::size_t n = images.shape()[0];
  if (text.shape() != Shape{n, arch.d_text})
    throw ShapeError("discriminate: text embedding " + shape_str(text.shape()) + " does not match batch of " +
                     std::to_string(n));
  const std::size_t b = arch.base_size();
  Var h = images;
  for (const char* name : {"D.conv0", "D.conv1", "D.conv2"}) h = leaky_relu(nn::conv(p, name, h, 2, 1), 0.2);
  Var tiled = broadcast_to(reshape(text, {n, arch.d_text, 1, 1}), {n, arch.d_text, b, b});
  h = leaky_relu(nn::conv(p, "D.joint", concat({h, tiled}, 1), 1, 0), 0.2);
  h = reshape(h, {n, arch.d_channels[2] * b * b});
  return sigmoid(nn::dense(p, "D.fc", h));
}

double discriminate(const Tensor& image, const Tensor& text, const nn::ParamSet& params, const ArchConfig& arch) {
  enc::check_image_shape(image.shape(), arch, false);
  Tape tape;
  nn::Bound b(tape, params, false);
  return discriminate(b, tape.constant(image.reshaped({1, 3, arch.image_size, arch.image_size})),
                      tape.constant(text.reshaped({1, text.size()})), arch)
      .item();
}

}  // namespace mmgan::models
