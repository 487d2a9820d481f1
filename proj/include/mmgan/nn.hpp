#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mmgan/ops.hpp"
#include "mmgan/tensor.hpp"

namespace mmgan::nn {

enum class Init {
  kHeNormal,  ///< N(0, 2 / fan_in)
  kZeros,
  kUniformEmbedding,  ///< U[-bound, bound]
};

struct ParamSpec {
  std::string path;
  Shape shape;
  Init init = Init::kHeNormal;
  std::size_t fan_in = 0;
  double bound = 0.05;  // kUniformEmbedding only
};

using LayerSpec = std::vector<ParamSpec>;

// Building blocks for layer descriptions. Kernels are He-initialized; biases
// start at zero.
LayerSpec dense_spec(const std::string& prefix, std::size_t in, std::size_t out);
LayerSpec conv_spec(const std::string& prefix, std::size_t in_c, std::size_t out_c, std::size_t k);
/// Kernel [in_c, out_c, k, k]. fan_in counts the taps that reach one output
/// pixel, in_c * k * k / stride^2.
LayerSpec conv_transpose_spec(const std::string& prefix, std::size_t in_c, std::size_t out_c,
                              std::size_t k, std::size_t stride);
void append(LayerSpec& to, const LayerSpec& from);

/// Named parameters, iterated in sorted path order.
class ParamSet {
 public:
  using Map = std::map<std::string, Tensor>;

  void add(const std::string& path, Tensor t);
  bool contains(const std::string& path) const { return params_.count(path) != 0; }
  const Tensor& at(const std::string& path) const;
  Tensor& at(const std::string& path);
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  std::vector<std::string> paths() const;

  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }

  /// FNV-1a over paths, shapes and value bytes.
  std::uint64_t digest() const;

  friend bool operator==(const ParamSet& a, const ParamSet& b) { return a.params_ == b.params_; }

 private:
  Map params_;
};

/// Deterministic in (spec, seed): each parameter draws from its own
/// substream keyed by path.
ParamSet init_params(const LayerSpec& spec, std::uint64_t seed);

using GradMap = std::map<std::string, std::vector<double>>;

/// Places every parameter of a set on a tape, as trainable leaves or as
/// constants.
class Bound {
 public:
  Bound(Tape& tape, const ParamSet& params, bool trainable);

  Var operator[](const std::string& path) const;
  /// Replaces the variable bound at an existing path; shapes must agree.
  void rebind(const std::string& path, Var v);
  bool trainable() const { return trainable_; }
  Tape& tape() const { return *tape_; }

  /// Leaf gradients after tape.backward(); one entry per parameter.
  GradMap grads() const;

 private:
  Tape* tape_;
  std::map<std::string, Var> vars_;
  bool trainable_;
};

// x[N,in] -> x W + b
Var dense(const Bound& p, const std::string& prefix, Var x);
Var conv(const Bound& p, const std::string& prefix, Var x, std::size_t stride, std::size_t padding);
Var conv_transpose(const Bound& p, const std::string& prefix, Var x, std::size_t stride,
                   std::size_t padding);

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig hyper;
  std::uint64_t t = 0;
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;

  friend bool operator==(const AdamState& a, const AdamState& b) {
    return a.hyper.lr == b.hyper.lr && a.hyper.beta1 == b.hyper.beta1 &&
           a.hyper.beta2 == b.hyper.beta2 && a.hyper.eps == b.hyper.eps && a.t == b.t &&
           a.m == b.m && a.v == b.v;
  }
};

AdamState make_adam_state(const ParamSet& params, AdamConfig hyper);

/// Bias-corrected Adam update of every parameter. grads must name exactly the
/// paths of params; a non-finite gradient is rejected with its path and
/// leaves params and state untouched.
void adam_step(ParamSet& params, const GradMap& grads, AdamState& state);

}  // namespace mmgan::nn
