#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "mmgan/data.hpp"

namespace mmgan::data {

namespace {
const std::array<double, 3> kBackground{-0.7, -0.7, -0.7};

const std::map<std::string, std::vector<std::string>> kShapeWords{
    {"circle", {"circle", "disc"}}, {"square", {"square", "box"}}, {"triangle", {"triangle"}}};

std::vector<std::string> shape_words(const std::string& shape) {
  auto it = kShapeWords.find(shape);
  return it == kShapeWords.end() ? std::vector<std::string>{shape} : it->second;
}

// Templates over {c} = color, {s} = shape word.
const std::vector<std::vector<std::string>> kTemplates{
    {"a", "{c}", "{s}"}, {"one", "{c}", "{s}"}, {"a", "{c}", "{s}", "shape"}, {"the", "{s}", "is", "{c}"}};

bool inside(const std::string& shape, double x, double y, double cx, double cy, double r) {
  const double dx = x - cx, dy = y - cy;
  if (shape == "circle") return dx * dx + dy * dy <= r * r;
  if (shape == "square") return std::abs(dx) <= 0.85 * r && std::abs(dy) <= 0.85 * r;
  if (shape == "triangle") {
    // Apex up; base at cy + 0.8 r.
    const double top = cy - r, base = cy + 0.8 * r;
    if (y < top || y > base) return false;
    return std::abs(dx) <= (y - top) / (base - top) * r;
  }
  throw std::invalid_argument("unknown shape '" + shape + "'");
}
}  // namespace

std::string style_name(std::size_t id) {
  static const char* names[] = {"identity", "warm", "cool", "noise"};
  return id < kNumStyles ? names[id] : "style" + std::to_string(id);
}

void DatasetSpec::validate() const {
  if (n_samples < 1) throw std::invalid_argument("dataset: n_samples must be >= 1");
  if (shapes.empty()) throw std::invalid_argument("dataset: empty shape set");
  if (colors.empty()) throw std::invalid_argument("dataset: empty color set");
  if (n_styles < 1 || n_styles > kNumStyles)
    throw std::invalid_argument("dataset: n_styles must be in [1, " + std::to_string(kNumStyles) + "]");
  if (image_size < 4) throw std::invalid_argument("dataset: image_size must be >= 4");
  for (const auto& s : shapes) inside(s, 0, 0, 0, 0, 1);
  for (const auto& c : colors) color_rgb(c);
}

std::array<double, 3> color_rgb(const std::string& name) {
  static const std::map<std::string, std::array<double, 3>> table{
      {"red", {0.9, -0.8, -0.8}},    {"green", {-0.8, 0.8, -0.8}}, {"blue", {-0.8, -0.6, 0.9}},
      {"yellow", {0.9, 0.8, -0.8}},  {"purple", {0.4, -0.8, 0.7}}, {"orange", {0.9, 0.2, -0.9}},
      {"white", {0.95, 0.95, 0.95}}, {"cyan", {-0.8, 0.8, 0.8}}};
  auto it = table.find(name);
  if (it == table.end()) throw std::invalid_argument("unknown color '" + name + "'");
  return it->second;
}

Tensor render(const Figure& f, const DatasetSpec& spec) {
  const std::size_t s = spec.image_size, hi = 2 * s;
  const std::string& shape = spec.shapes.at(f.shape);
  const auto fg = color_rgb(spec.colors.at(f.color));
  Tensor out({3, s, s});
  for (std::size_t y = 0; y < s; ++y)
    for (std::size_t x = 0; x < s; ++x) {
      // 2x2 supersampling at sub-pixel centers.
      int hits = 0;
      for (std::size_t sy = 0; sy < 2; ++sy)
        for (std::size_t sx = 0; sx < 2; ++sx) {
          const double px = (static_cast<double>(2 * x + sx) + 0.5) / static_cast<double>(hi);
          const double py = (static_cast<double>(2 * y + sy) + 0.5) / static_cast<double>(hi);
          hits += inside(shape, px, py, f.cx, f.cy, f.radius);
        }
      const double a = hits / 4.0;
      for (std::size_t c = 0; c < 3; ++c) out[(c * s + y) * s + x] = a * fg[c] + (1 - a) * kBackground[c];
    }
  return out;
}

Tensor apply_style(const Tensor& image, std::size_t style_id, Rng& rng) {
  if (style_id == kIdentity) return image;
  Tensor out = image;
  const std::size_t hw = image.dim(1) * image.dim(2);
  auto shift = [&](double r, double g, double b) {
    const double d[3] = {r, g, b};
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < hw; ++p) out[c * hw + p] = std::clamp(out[c * hw + p] + d[c], -1.0, 1.0);
  };
  switch (style_id) {
    case kWarm: shift(0.35, 0.05, -0.35); break;
    case kCool: shift(-0.35, 0.05, 0.35); break;
    case kNoise:
      for (std::size_t p = 0; p < hw; ++p) {
        const double n = rng.uniform(-0.4, 0.4);
        for (std::size_t c = 0; c < 3; ++c) out[c * hw + p] = std::clamp(out[c * hw + p] + n, -1.0, 1.0);
      }
      break;
    default: throw std::invalid_argument("unknown style id " + std::to_string(style_id));
  }
  return out;
}

std::vector<Sample> synth_dataset(const DatasetSpec& spec) {
  spec.validate();
  std::vector<Sample> out;
  out.reserve(spec.n_samples);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    Rng rng = substream(spec.seed, "sample", i);
    Figure f;
    f.shape = i % spec.shapes.size();
    f.color = static_cast<std::size_t>(rng.below(spec.colors.size()));
    f.radius = rng.uniform(0.22, 0.34);
    f.cx = rng.uniform(f.radius + 0.04, 1 - f.radius - 0.04);
    f.cy = rng.uniform(f.radius + 0.04, 1 - f.radius - 0.04);
    Sample s;
    s.class_id = f.shape;
    s.style_id = static_cast<std::size_t>(rng.below(spec.n_styles));
    const auto& tmpl = kTemplates[rng.below(kTemplates.size())];
    const auto words = shape_words(spec.shapes[f.shape]);
    const std::string& shape_word = words[rng.below(words.size())];
    for (const auto& w : tmpl) {
      if (!s.caption.empty()) s.caption += ' ';
      s.caption += w == "{c}" ? spec.colors[f.color] : w == "{s}" ? shape_word : w;
    }
    s.image = apply_style(render(f, spec), s.style_id, rng);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> caption_vocabulary(const DatasetSpec& spec) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  auto add = [&](const std::string& w) {
    if (seen.insert(w).second) out.push_back(w);
  };
  for (const auto& t : kTemplates)
    for (const auto& w : t)
      if (w[0] != '{') add(w);
  for (const auto& c : spec.colors) add(c);
  for (const auto& s : spec.shapes)
    for (const auto& w : shape_words(s)) add(w);
  return out;
}

Split split_indices(std::size_t n, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw std::invalid_argument("test_fraction must be in [0,1)");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng = substream(seed, "split");
  rng.shuffle(idx);
  const auto n_test = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * test_fraction));
  Split s;
  s.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                              std::uint64_t epoch) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng = substream(seed, "batches", epoch);
  rng.shuffle(perm);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b + batch_size <= n; b += batch_size)
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(b), perm.begin() + static_cast<std::ptrdiff_t>(b + batch_size));
  return out;
}

}  // namespace mmgan::data
