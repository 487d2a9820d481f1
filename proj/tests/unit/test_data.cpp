#include <png.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "mmgan/data.hpp"
#include "mmgan/encoders.hpp"
#include "oracles.hpp"

using namespace mmgan;
using namespace mmgan::data;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("mmgan_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}
}  // namespace

TEST_CASE("synth_dataset is reproducible and well-formed") {
  DatasetSpec spec;
  spec.n_samples = 50;
  const auto a = synth_dataset(spec), b = synth_dataset(spec);
  CHECK(a == b);
  spec.seed = 2;
  CHECK(synth_dataset(spec) != a);

  const enc::Vocabulary vocab(caption_vocabulary(spec), 8);
  std::vector<std::size_t> per_class(3, 0);
  std::set<std::size_t> styles;
  for (const auto& s : a) {
    CHECK(s.image.shape() == Shape{3, 32, 32});
    for (double v : s.image.values()) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
    CHECK(!s.caption.empty());
    for (auto id : enc::tokenize(s.caption, vocab)) CHECK(id != enc::kUnk);
    CHECK(s.class_id < 3);
    ++per_class[s.class_id];
    styles.insert(s.style_id);
  }
  for (auto c : per_class) CHECK(std::abs(static_cast<double>(c) - 50.0 / 3) <= 1.0);
  CHECK(styles.size() == kNumStyles);
}

TEST_CASE("style transforms") {
  DatasetSpec spec;
  const Figure f{1, 3, 0.4, 0.6, 0.25};
  const auto plain = render(f, spec);
  Rng rng(1);
  CHECK(apply_style(plain, kIdentity, rng) == plain);
  for (std::size_t s = 1; s < kNumStyles; ++s) CHECK(apply_style(plain, s, rng) != plain);
  CHECK_THROWS(apply_style(plain, 9, rng));

  // Identity-style samples hold only background/foreground blends at 2x2 coverage levels.
  DatasetSpec small;
  small.n_samples = 30;
  for (const auto& s : synth_dataset(small)) {
    if (s.style_id != kIdentity) continue;
    std::set<double> reds;
    for (std::size_t p = 0; p < 32 * 32; ++p) reds.insert(s.image[p]);
    CHECK(reds.size() <= 5);
  }
}

TEST_CASE("dataset spec validation") {
  DatasetSpec spec;
  spec.shapes.clear();
  CHECK_THROWS_AS(synth_dataset(spec), std::invalid_argument);
  spec = DatasetSpec{};
  spec.colors.clear();
  CHECK_THROWS_AS(synth_dataset(spec), std::invalid_argument);
  spec = DatasetSpec{};
  spec.n_samples = 0;
  CHECK_THROWS_AS(synth_dataset(spec), std::invalid_argument);
}

TEST_CASE("png round trip within quantization") {
  const auto dir = scratch("png");
  const auto img = oracle::random_tensor({3, 5, 7}, 3);
  write_png(dir / "x.png", img);
  const auto back = read_png(dir / "x.png");
  CHECK(back.shape() == img.shape());
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::abs(back[i] - img[i]) <= 1.0 / 255 + 1e-12);
  CHECK(to_u8(-1.0) == 0);
  CHECK(to_u8(1.0) == 255);

  // Grayscale is rejected.
  png_image g{};
  g.version = PNG_IMAGE_VERSION;
  g.width = g.height = 2;
  g.format = PNG_FORMAT_GRAY;
  std::uint8_t px[4] = {0, 50, 100, 200};
  REQUIRE(png_image_write_to_file(&g, (dir / "gray.png").c_str(), 0, px, 0, nullptr));
  CHECK_THROWS(read_png(dir / "gray.png"));
  fs::remove_all(dir);
}

TEST_CASE("manifest round trip and errors") {
  const auto dir = scratch("manifest");
  {
    std::ofstream(dir / "empty.tsv") << "# nothing here\n";
    CHECK(load_manifest(dir / "empty.tsv").empty());
  }
  DatasetSpec spec;
  spec.n_samples = 10;
  const auto samples = synth_dataset(spec);
  save_manifest(samples, dir / "m.tsv");
  const auto loaded = load_manifest(dir / "m.tsv");
  REQUIRE(loaded.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(loaded[i].caption == samples[i].caption);
    CHECK(loaded[i].style_id == samples[i].style_id);
    CHECK(loaded[i].class_id == samples[i].class_id);
    for (std::size_t j = 0; j < samples[i].image.size(); ++j)
      CHECK(std::abs(loaded[i].image[j] - samples[i].image[j]) <= 1.0 / 255 + 1e-12);
  }

  std::ofstream(dir / "missing.tsv") << "# header\nimages/000000.png\ta red circle\t0\t0\nnope.png\tx\t0\t0\n";
  try {
    load_manifest(dir / "missing.tsv");
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::ofstream(dir / "bad.tsv") << "images/000000.png\tonly two\n";
  CHECK_THROWS_WITH_AS(load_manifest(dir / "bad.tsv"), doctest::Contains("line 1"), std::runtime_error);
  std::ofstream(dir / "badnum.tsv") << "images/000000.png\tcap\tx\t0\n";
  CHECK_THROWS_AS(load_manifest(dir / "badnum.tsv"), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("batches") {
  CHECK(batches(5, 6, 1, 0).empty());
  CHECK(batches(23, 4, 9, 3) == batches(23, 4, 9, 3));
  CHECK(batches(23, 4, 9, 3) != batches(23, 4, 9, 4));
  const auto bs = batches(23, 4, 9, 3);
  CHECK(bs.size() == 5);
  std::set<std::size_t> seen;
  for (const auto& b : bs) {
    CHECK(b.size() == 4);
    for (auto i : b) {
      CHECK(i < 23);
      seen.insert(i);
    }
  }
  CHECK(seen.size() == 20);
  // The emitted order is a prefix of the epoch's shuffled permutation.
  std::vector<std::size_t> perm(23);
  for (std::size_t i = 0; i < 23; ++i) perm[i] = i;
  Rng rng = substream(9, "batches", 3);
  rng.shuffle(perm);
  std::vector<std::size_t> flat;
  for (const auto& b : bs) flat.insert(flat.end(), b.begin(), b.end());
  CHECK(std::equal(flat.begin(), flat.end(), perm.begin()));
  CHECK_THROWS(batches(3, 0, 1, 0));
}

TEST_CASE("split_indices") {
  const auto s = split_indices(40, 0.25, 3);
  CHECK(s.test.size() == 10);
  CHECK(s.train.size() == 30);
  std::set<std::size_t> all(s.test.begin(), s.test.end());
  all.insert(s.train.begin(), s.train.end());
  CHECK(all.size() == 40);
  CHECK(split_indices(40, 0.0, 3).test.empty());
  CHECK_THROWS(split_indices(4, 1.0, 3));
}
