#include <cmath>
#include <cstring>

#include "mmgan/nn.hpp"
#include "mmgan/random.hpp"

namespace mmgan::nn {

LayerSpec dense_spec(const std::string& prefix, std::size_t in, std::size_t out) {
  return {{prefix + ".kernel", {in, out}, Init::kHeNormal, in}, {prefix + ".bias", {out}, Init::kZeros, 0}};
}

LayerSpec conv_spec(const std::string& prefix, std::size_t in_c, std::size_t out_c, std::size_t k) {
  return {{prefix + ".kernel", {out_c, in_c, k, k}, Init::kHeNormal, in_c * k * k},
          {prefix + ".bias", {out_c}, Init::kZeros, 0}};
}

LayerSpec conv_transpose_spec(const std::string& prefix, std::size_t in_c, std::size_t out_c,
                              std::size_t k, std::size_t stride) {
  const std::size_t fan_in = std::max<std::size_t>(1, in_c * k * k / (stride * stride));
  return {{prefix + ".kernel", {in_c, out_c, k, k}, Init::kHeNormal, fan_in},
          {prefix + ".bias", {out_c}, Init::kZeros, 0}};
}

void append(LayerSpec& to, const LayerSpec& from) { to.insert(to.end(), from.begin(), from.end()); }

void ParamSet::add(const std::string& path, Tensor t) {
  if (!params_.emplace(path, std::move(t)).second)
    throw std::invalid_argument("duplicate parameter path '" + path + "'");
}

const Tensor& ParamSet::at(const std::string& path) const {
  auto it = params_.find(path);
  if (it == params_.end()) throw std::out_of_range("no parameter '" + path + "'");
  return it->second;
}

Tensor& ParamSet::at(const std::string& path) {
  auto it = params_.find(path);
  if (it == params_.end()) throw std::out_of_range("no parameter '" + path + "'");
  return it->second;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

std::vector<std::string> ParamSet::paths() const {
  std::vector<std::string> out;
  for (const auto& [p, _] : params_) out.push_back(p);
  return out;
}

std::uint64_t ParamSet::digest() const {
  std::uint64_t h = fnv1a("");
  for (const auto& [path, t] : params_) {
    h = fnv1a(path, h);
    h = fnv1a(shape_str(t.shape()), h);
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(t.data().data()), t.size() * sizeof(double)), h);
  }
  return h;
}

ParamSet init_params(const LayerSpec& spec, std::uint64_t seed) {
  ParamSet out;
  for (const auto& p : spec) {
    for (auto e : p.shape)
      if (e == 0) throw std::invalid_argument("parameter '" + p.path + "' has a zero extent");
    if (p.shape.empty()) throw std::invalid_argument("parameter '" + p.path + "' has no shape");
    Tensor t(p.shape, 0.0);
    Rng rng = substream(seed, p.path);
    switch (p.init) {
      case Init::kHeNormal: {
        if (p.fan_in == 0) throw std::invalid_argument("parameter '" + p.path + "' needs a fan-in");
        const double std = std::sqrt(2.0 / static_cast<double>(p.fan_in));
        for (auto& v : t.values()) v = std * rng.normal();
        break;
      }
      case Init::kUniformEmbedding:
        if (!(p.bound > 0.0)) throw std::invalid_argument("parameter '" + p.path + "' needs a positive bound");
        for (auto& v : t.values()) v = rng.uniform(-p.bound, p.bound);
        break;
      case Init::kZeros:
        break;
    }
    out.add(p.path, std::move(t));
  }
  return out;
}

Bound::Bound(Tape& tape, const ParamSet& params, bool trainable) : tape_(&tape), trainable_(trainable) {
  for (const auto& [path, t] : params) {
    Tensor copy = t;
    copy.set_requires_grad(trainable);
    vars_.emplace(path, tape.leaf(std::move(copy)));
  }
}

Var Bound::operator[](const std::string& path) const {
  auto it = vars_.find(path);
  if (it == vars_.end()) throw std::out_of_range("no bound parameter '" + path + "'");
  return it->second;
}

void Bound::rebind(const std::string& path, Var v) {
  auto it = vars_.find(path);
  if (it == vars_.end()) throw std::out_of_range("no bound parameter '" + path + "'");
  if (it->second.shape() != v.shape())
    throw ShapeError("rebind '" + path + "': " + shape_str(v.shape()) + " vs " + shape_str(it->second.shape()));
  it->second = v;
}

GradMap Bound::grads() const {
  if (!trainable_) throw std::logic_error("grads() on a frozen parameter binding");
  GradMap out;
  for (const auto& [path, v] : vars_) {
    auto g = tape_->grad(v);
    out.emplace(path, std::vector<double>(g.begin(), g.end()));
  }
  return out;
}

Var dense(const Bound& p, const std::string& prefix, Var x) {
  return bias_add(matmul(x, p[prefix + ".kernel"]), p[prefix + ".bias"], 1);
}

Var conv(const Bound& p, const std::string& prefix, Var x, std::size_t stride, std::size_t padding) {
  return bias_add(conv2d(x, p[prefix + ".kernel"], stride, padding), p[prefix + ".bias"], 1);
}

Var conv_transpose(const Bound& p, const std::string& prefix, Var x, std::size_t stride,
                   std::size_t padding) {
  return bias_add(conv_transpose2d(x, p[prefix + ".kernel"], stride, padding), p[prefix + ".bias"], 1);
}

}  // namespace mmgan::nn
