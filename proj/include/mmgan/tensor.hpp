#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mmgan {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Raised for any shape or rank violation. The message always carries the
/// offending shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major (NCHW for images) array of doubles with an optional
/// gradient slot.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  const std::vector<double>& data() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double item() const;

  bool requires_grad() const { return requires_grad_; }
  Tensor& set_requires_grad(bool on) {
    requires_grad_ = on;
    return *this;
  }

  bool has_grad() const { return grad_.has_value(); }
  std::span<const double> grad() const;
  void set_grad(std::vector<double> g);
  void clear_grad() { grad_.reset(); }

  /// Same shape, different extents product is an error.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  std::vector<double> values_;
  bool requires_grad_ = false;
  std::optional<std::vector<double>> grad_;
};

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
/// lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const;
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  double item() const { return value().item(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradient buffers handed to a backward rule. `inputs[i]` is null when the
/// i-th input does not need a gradient; otherwise it points at an accumulator
/// of the input's size. Rules must add into it, never overwrite.
struct BackwardArgs {
  std::span<const double> grad_out;
  std::vector<double*> inputs;
};

using BackwardFn = std::function<void(const BackwardArgs&)>;

/// Records a computation in topological order and runs reverse-mode
/// differentiation over it exactly once.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor t);
  Var constant(Tensor t);

  /// Appends an operation. `fn` may be empty when no input requires a
  /// gradient; the output then carries no gradient either.
  Var record(Tensor out, std::vector<Var> inputs, BackwardFn fn, std::string_view op);

  /// Fills the gradient slot of every requires-grad leaf with d(root)/d(leaf).
  /// Throws if root is not a single element, the tape is empty, or the tape
  /// has already been consumed by a previous call.
  void backward(Var root);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  /// Gradient of a leaf after backward(). Unreachable leaves get zeros.
  std::span<const double> grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }
  std::string_view op_name(std::size_t id) const { return nodes_.at(id).op; }
  const std::vector<std::size_t>& op_inputs(std::size_t id) const { return nodes_.at(id).inputs; }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    std::string op;
    bool requires_grad = false;
    bool is_leaf = false;
  };

  std::deque<Node> nodes_;  // stable addresses: Var::shape() references survive appends
  bool consumed_ = false;
};

bool any_requires_grad(std::initializer_list<Var> vars);

namespace debug {
/// Test-only fault injection: when set, the backward rule of every op with
/// this name has its input gradients scaled by 1.1. Empty string disables.
void corrupt_backward(std::string op);
const std::string& corrupted_backward();
}  // namespace debug

}  // namespace mmgan
