#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmgan/random.hpp"
#include "mmgan/tensor.hpp"

namespace mmgan::data {

struct Sample {
  Tensor image;  // [3,S,S] in [-1,1]
  std::string caption;
  std::size_t style_id = 0;
  std::size_t class_id = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

enum Style : std::size_t { kIdentity = 0, kWarm = 1, kCool = 2, kNoise = 3, kNumStyles = 4 };
std::string style_name(std::size_t style_id);

struct DatasetSpec {
  std::size_t n_samples = 256;
  std::vector<std::string> shapes{"circle", "square", "triangle"};
  std::vector<std::string> colors{"red", "green", "blue", "yellow", "purple", "orange", "white", "cyan"};
  std::size_t n_styles = kNumStyles;
  std::size_t image_size = 32;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Geometry and color of one unstyled sample.
struct Figure {
  std::size_t shape = 0;  // index into DatasetSpec::shapes
  std::size_t color = 0;  // index into DatasetSpec::colors
  double cx = 0.5, cy = 0.5, radius = 0.3;  // unit-square coordinates
};

/// RGB in [-1,1] for a known color name.
std::array<double, 3> color_rgb(const std::string& name);

/// Shape on a plain background, rasterized at 2x and box-downsampled.
Tensor render(const Figure& f, const DatasetSpec& spec);
/// Palette shift or texture for style_id; the identity style returns the input.
Tensor apply_style(const Tensor& image, std::size_t style_id, Rng& rng);

/// Sample i has class i % shapes; color, geometry, style and caption wording
/// are drawn from the per-sample substream of spec.seed.
std::vector<Sample> synth_dataset(const DatasetSpec& spec);

/// Every token the caption templates can emit for this spec.
std::vector<std::string> caption_vocabulary(const DatasetSpec& spec);

/// Deterministic split; the first ceil(n * test_fraction) shuffled indices go to test.
struct Split {
  std::vector<std::size_t> train, test;
};
Split split_indices(std::size_t n, double test_fraction, std::uint64_t seed);

/// Seeded per-epoch shuffle; the trailing partial batch is dropped.
std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                              std::uint64_t epoch);

// PNG: pixel u8 = round((v + 1) / 2 * 255); reading maps back to [-1,1].
void write_png(const std::filesystem::path& path, const Tensor& image);
Tensor read_png(const std::filesystem::path& path);
std::uint8_t to_u8(double v);
double from_u8(std::uint8_t b);

/// Tab-separated `relative_png_path caption style_id class_id`, `#` comments.
/// Saving writes images under images/ next to the manifest.
void save_manifest(const std::vector<Sample>& samples, const std::filesystem::path& path);
std::vector<Sample> load_manifest(const std::filesystem::path& path);

}  // namespace mmgan::data
