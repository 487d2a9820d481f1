#include <png.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mmgan/data.hpp"

namespace mmgan::data {

std::uint8_t to_u8(double v) {
  const double c = std::clamp(v, -1.0, 1.0);
  return static_cast<std::uint8_t>(std::lround((c + 1.0) * 0.5 * 255.0));
}

double from_u8(std::uint8_t b) { return static_cast<double>(b) / 255.0 * 2.0 - 1.0; }

void write_png(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("write_png: expected [3,H,W], got " + shape_str(image.shape()));
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::vector<std::uint8_t> rgb(h * w * 3);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t p = 0; p < h * w; ++p) rgb[p * 3 + c] = to_u8(image[c * h * w + p]);
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, rgb.data(), 0, nullptr))
    throw std::runtime_error("write_png " + path.string() + ": " + img.message);
}

Tensor read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw std::runtime_error("read_png " + path.string() + ": " + img.message);
  const bool color = img.format & PNG_FORMAT_FLAG_COLOR;
  const bool alpha = img.format & PNG_FORMAT_FLAG_ALPHA;
  if (!color || alpha) {
    png_image_free(&img);
    throw std::runtime_error("read_png " + path.string() + ": image is not 3-channel RGB");
  }
  img.format = PNG_FORMAT_RGB;
  const std::size_t h = img.height, w = img.width;
  std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, rgb.data(), 0, nullptr))
    throw std::runtime_error("read_png " + path.string() + ": " + img.message);
  Tensor out({3, h, w});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t p = 0; p < h * w; ++p) out[c * h * w + p] = from_u8(rgb[p * 3 + c]);
  return out;
}

}  // namespace mmgan::data
