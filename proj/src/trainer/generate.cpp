#include <cmath>

#include "mmgan/models.hpp"
#include "mmgan/trainer.hpp"

namespace mmgan::train {

std::vector<Tensor> generate_images(const ModelBundle& bundle, const std::string& caption, const Tensor& style_ref,
                                    std::size_t count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("generate: count must be >= 1");
  const auto& arch = bundle.config.arch;
  enc::check_image_shape(style_ref.shape(), arch, false);
  const auto tokens = enc::tokenize(caption, bundle.vocab);
  const Tensor style = style_vectors_for(bundle, style_ref.reshaped({1, 3, arch.image_size, arch.image_size}));
  Rng rng = substream(seed, "generate");
  const Tensor z = models::sample_noise(count, arch.d_z, rng);
  Tensor styles({count, arch.d_style});
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j < arch.d_style; ++j) styles[i * arch.d_style + j] = style[j];

  Tape tape;
  nn::Bound gb(tape, bundle.at(net::kGenerator), false), tb(tape, bundle.at(net::kText), false);
  Var text = enc::encode_text(tb, std::vector<enc::TokenIds>(count, tokens), arch);
  const Tensor imgs = models::generate(gb, tape.constant(z), text, tape.constant(styles), arch).value();
  const std::size_t per = imgs.size() / count;
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < count; ++i)
    out.emplace_back(Shape{3, arch.image_size, arch.image_size},
                     std::vector<double>(imgs.data().begin() + static_cast<std::ptrdiff_t>(i * per),
                                         imgs.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * per)));
  return out;
}

Tensor tile_grid(const std::vector<Tensor>& images) {
  if (images.empty()) throw std::invalid_argument("tile_grid: no images");
  const std::size_t h = images[0].dim(1), w = images[0].dim(2), n = images.size();
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const std::size_t rows = (n + cols - 1) / cols;
  Tensor grid({3, rows * h, cols * w}, -1.0);
  const std::size_t gw = cols * w;
  for (std::size_t k = 0; k < n; ++k) {
    if (images[k].shape() != images[0].shape()) throw ShapeError("tile_grid: mixed image shapes");
    const std::size_t oy = (k / cols) * h, ox = (k % cols) * w;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) grid[(c * rows * h + oy + y) * gw + ox + x] = images[k][(c * h + y) * w + x];
  }
  return grid;
}

}  // namespace mmgan::train
