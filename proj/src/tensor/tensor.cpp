#include "mmgan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <sstream>

namespace mmgan {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {
void check_extents(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one axis");
  for (auto e : shape)
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
}
}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  values_.assign(numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  check_extents(shape_);
  if (numel(shape_) != values_.size())
    throw ShapeError("shape " + shape_str(shape_) + " needs " + std::to_string(numel(shape_)) +
                     " values, got " + std::to_string(values_.size()));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape_));
  return shape_[axis];
}

double Tensor::item() const {
  if (values_.size() != 1)
    throw ShapeError("item() needs a single-element tensor, got " + shape_str(shape_));
  return values_[0];
}

std::span<const double> Tensor::grad() const {
  if (!grad_) throw std::logic_error("tensor has no gradient");
  return *grad_;
}

void Tensor::set_grad(std::vector<double> g) {
  if (g.size() != values_.size())
    throw ShapeError("gradient size " + std::to_string(g.size()) + " does not match " +
                     shape_str(shape_));
  grad_ = std::move(g);
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor out(std::move(shape), values_);
  return out;
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Tape& Var::tape() const {
  if (!tape_) throw std::logic_error("use of an unbound Var");
  return *tape_;
}

const Tensor& Var::value() const { return tape().value(id_); }

bool Var::requires_grad() const { return tape().requires_grad(id_); }

bool any_requires_grad(std::initializer_list<Var> vars) {
  return std::any_of(vars.begin(), vars.end(), [](const Var& v) { return v.requires_grad(); });
}

namespace debug {
namespace {
std::mutex g_corrupt_mutex;
std::string g_corrupt_op;
}  // namespace

void corrupt_backward(std::string op) {
  std::lock_guard lock(g_corrupt_mutex);
  g_corrupt_op = std::move(op);
}

const std::string& corrupted_backward() {
  std::lock_guard lock(g_corrupt_mutex);
  return g_corrupt_op;
}
}  // namespace debug

Var Tape::leaf(Tensor t) {
  if (consumed_) throw std::logic_error("cannot record on a consumed tape");
  Node n;
  n.requires_grad = t.requires_grad();
  n.is_leaf = true;
  n.op = "leaf";
  t.clear_grad();
  n.value = std::move(t);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor t) {
  t.set_requires_grad(false);
  return leaf(std::move(t));
}

Var Tape::record(Tensor out, std::vector<Var> inputs, BackwardFn fn, std::string_view op) {
  if (consumed_) throw std::logic_error("cannot record on a consumed tape");
  Node n;
  n.inputs.reserve(inputs.size());
  for (const auto& v : inputs) {
    if (&v.tape() != this) throw std::logic_error("op '" + std::string(op) + "' mixes tapes");
    n.inputs.push_back(v.id());
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (n.requires_grad && fn) n.backward = std::move(fn);
  n.requires_grad = n.requires_grad && static_cast<bool>(n.backward);
  out.set_requires_grad(n.requires_grad);
  n.value = std::move(out);
  n.op = op;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var root) {
  if (nodes_.empty()) throw std::logic_error("backward on an empty tape");
  if (consumed_) throw std::logic_error("backward on a consumed tape; rebuild the graph");
  if (&root.tape() != this) throw std::logic_error("backward root belongs to another tape");
  if (nodes_[root.id()].value.size() != 1)
    throw ShapeError("backward root must be a single element, got " +
                     shape_str(nodes_[root.id()].value.shape()));
  consumed_ = true;

  const std::string corrupt = debug::corrupted_backward();
  std::vector<std::vector<double>> grads(nodes_.size());
  auto buffer = [&](std::size_t id) -> double* {
    auto& g = grads[id];
    if (g.empty()) g.assign(nodes_[id].value.size(), 0.0);
    return g.data();
  };
  if (nodes_[root.id()].requires_grad) buffer(root.id())[0] = 1.0;

  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.is_leaf || !n.backward || grads[i].empty()) continue;
    BackwardArgs args;
    args.grad_out = grads[i];
    args.inputs.reserve(n.inputs.size());
    for (auto in : n.inputs) args.inputs.push_back(nodes_[in].requires_grad ? buffer(in) : nullptr);
    if (!corrupt.empty() && corrupt == n.op) {
      // Apply the rule into scratch buffers, then inflate them.
      std::vector<std::vector<double>> scratch(n.inputs.size());
      BackwardArgs tmp;
      tmp.grad_out = args.grad_out;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        if (args.inputs[k]) {
          scratch[k].assign(nodes_[n.inputs[k]].value.size(), 0.0);
          tmp.inputs.push_back(scratch[k].data());
        } else {
          tmp.inputs.push_back(nullptr);
        }
      }
      n.backward(tmp);
      for (std::size_t k = 0; k < n.inputs.size(); ++k)
        if (args.inputs[k])
          for (std::size_t e = 0; e < scratch[k].size(); ++e) args.inputs[k][e] += 1.1 * scratch[k][e];
    } else {
      n.backward(args);
    }
    // Intermediate gradients are no longer needed once propagated.
    std::vector<double>().swap(grads[i]);
  }

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (!n.is_leaf || !n.requires_grad) continue;
    if (grads[i].empty()) grads[i].assign(n.value.size(), 0.0);
    n.value.set_grad(std::move(grads[i]));
  }
}

std::span<const double> Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  if (!n.is_leaf) throw std::logic_error("gradients are kept for leaves only");
  if (!consumed_) throw std::logic_error("grad() before backward()");
  if (!n.requires_grad) throw std::logic_error("leaf does not require a gradient");
  return n.value.grad();
}

}  // namespace mmgan
