#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "mmgan/ops.hpp"

namespace mmgan {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

void require_rank(const char* op, Var a, std::size_t rank) {
  if (a.shape().size() != rank)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(a.shape()));
}

template <class F, class DF>
Var unary(Var a, const char* op, F f, DF df) {
  const auto& x = a.value().data();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  BackwardFn fn;
  if (a.requires_grad()) {
    fn = [a, df](const BackwardArgs& args) {
      const auto& xv = a.value().data();
      double* gx = args.inputs[0];
      for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += args.grad_out[i] * df(xv[i]);
    };
  }
  return a.tape().record(Tensor(a.shape(), std::move(y)), {a}, std::move(fn), op);
}

struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.n = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  const auto& x = a.value().data();
  const auto& y = b.value().data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  BackwardFn fn = [](const BackwardArgs& args) {
    for (double* g : args.inputs)
      if (g)
        for (std::size_t i = 0; i < args.grad_out.size(); ++i) g[i] += args.grad_out[i];
  };
  return a.tape().record(Tensor(a.shape(), std::move(out)), {a, b}, std::move(fn), "add");
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  const auto& x = a.value().data();
  const auto& y = b.value().data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  BackwardFn fn = [](const BackwardArgs& args) {
    if (double* g = args.inputs[0])
      for (std::size_t i = 0; i < args.grad_out.size(); ++i) g[i] += args.grad_out[i];
    if (double* g = args.inputs[1])
      for (std::size_t i = 0; i < args.grad_out.size(); ++i) g[i] -= args.grad_out[i];
  };
  return a.tape().record(Tensor(a.shape(), std::move(out)), {a, b}, std::move(fn), "sub");
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  const auto& x = a.value().data();
  const auto& y = b.value().data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  BackwardFn fn;
  if (any_requires_grad({a, b})) {
    fn = [a, b](const BackwardArgs& args) {
      const auto& xv = a.value().data();
      const auto& yv = b.value().data();
      if (double* g = args.inputs[0])
        for (std::size_t i = 0; i < xv.size(); ++i) g[i] += args.grad_out[i] * yv[i];
      if (double* g = args.inputs[1])
        for (std::size_t i = 0; i < xv.size(); ++i) g[i] += args.grad_out[i] * xv[i];
    };
  }
  return a.tape().record(Tensor(a.shape(), std::move(out)), {a, b}, std::move(fn), "mul");
}

Var add_scalar(Var a, double s) {
  return unary(a, "add_scalar", [s](double x) { return x + s; }, [](double) { return 1.0; });
}

Var mul_scalar(Var a, double s) {
  return unary(a, "mul_scalar", [s](double x) { return x * s; }, [s](double) { return s; });
}

Var leaky_relu(Var a, double alpha) {
  return unary(
      a, "leaky_relu", [alpha](double x) { return x > 0 ? x : alpha * x; },
      [alpha](double x) { return x > 0 ? 1.0 : alpha; });
}

Var tanh(Var a) {
  return unary(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double x) {
        const double t = std::tanh(x);
        return 1.0 - t * t;
      });
}

namespace {
double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Var sigmoid(Var a) {
  return unary(a, "sigmoid", stable_sigmoid, [](double x) {
    const double s = stable_sigmoid(x);
    return s * (1.0 - s);
  });
}

Var square(Var a) {
  return unary(a, "square", [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Var sqrt(Var a) {
  return unary(
      a, "sqrt", [](double x) { return std::sqrt(std::max(x, kLogFloor)); },
      [](double x) { return x > kLogFloor ? 0.5 / std::sqrt(x) : 0.0; });
}

Var log(Var a) {
  return unary(
      a, "log", [](double x) { return std::log(std::max(x, kLogFloor)); },
      [](double x) { return x > kLogFloor ? 1.0 / x : 0.0; });
}

Var sum(Var a) {
  const auto& x = a.value().data();
  double s = 0.0;
  for (double v : x) s += v;
  const std::size_t n = x.size();
  BackwardFn fn = [n](const BackwardArgs& args) {
    const double g0 = args.grad_out[0];
    double* g = args.inputs[0];
    for (std::size_t i = 0; i < n; ++i) g[i] += g0;
  };
  return a.tape().record(Tensor::scalar(s), {a}, std::move(fn), "sum");
}

Var mean(Var a) { return mul_scalar(sum(a), 1.0 / static_cast<double>(a.size())); }

Var sum_axis(Var a, std::size_t axis) {
  const Shape& s = a.shape();
  if (axis >= s.size()) throw ShapeError("sum_axis: axis out of range for " + shape_str(s));
  const AxisSplit sp = split_at(s, axis);
  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) out_shape.push_back(s[i]);
  if (out_shape.empty()) out_shape.push_back(1);
  const auto& x = a.value().data();
  std::vector<double> out(sp.outer * sp.inner, 0.0);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t k = 0; k < sp.n; ++k)
      for (std::size_t i = 0; i < sp.inner; ++i)
        out[o * sp.inner + i] += x[(o * sp.n + k) * sp.inner + i];
  BackwardFn fn = [sp](const BackwardArgs& args) {
    double* g = args.inputs[0];
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t k = 0; k < sp.n; ++k)
        for (std::size_t i = 0; i < sp.inner; ++i)
          g[(o * sp.n + k) * sp.inner + i] += args.grad_out[o * sp.inner + i];
  };
  return a.tape().record(Tensor(out_shape, std::move(out)), {a}, std::move(fn), "sum_axis");
}

Var mean_axis(Var a, std::size_t axis) {
  if (axis >= a.shape().size()) throw ShapeError("mean_axis: axis out of range");
  return mul_scalar(sum_axis(a, axis), 1.0 / static_cast<double>(a.shape()[axis]));
}

Var matmul(Var a, Var b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k)
    throw ShapeError("matmul: inner extents differ " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  std::vector<double> out(m * n);
  MatMap(out.data(), m, n).noalias() =
      ConstMatMap(a.value().data().data(), m, k) * ConstMatMap(b.value().data().data(), k, n);
  BackwardFn fn;
  if (any_requires_grad({a, b})) {
    fn = [a, b, m, k, n](const BackwardArgs& args) {
      ConstMatMap g(args.grad_out.data(), m, n);
      if (args.inputs[0])
        MatMap(args.inputs[0], m, k).noalias() +=
            g * ConstMatMap(b.value().data().data(), k, n).transpose();
      if (args.inputs[1])
        MatMap(args.inputs[1], k, n).noalias() +=
            ConstMatMap(a.value().data().data(), m, k).transpose() * g;
    };
  }
  return a.tape().record(Tensor({m, n}, std::move(out)), {a, b}, std::move(fn), "matmul");
}

Var bias_add(Var x, Var b, std::size_t channel_axis) {
  const Shape& s = x.shape();
  if (channel_axis >= s.size()) throw ShapeError("bias_add: channel axis out of range");
  require_rank("bias_add", b, 1);
  if (b.shape()[0] != s[channel_axis])
    throw ShapeError("bias_add: bias " + shape_str(b.shape()) + " does not match channels of " +
                     shape_str(s));
  const AxisSplit sp = split_at(s, channel_axis);
  const auto& xv = x.value().data();
  const auto& bv = b.value().data();
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t c = 0; c < sp.n; ++c) {
      const std::size_t base = (o * sp.n + c) * sp.inner;
      for (std::size_t i = 0; i < sp.inner; ++i) out[base + i] = xv[base + i] + bv[c];
    }
  BackwardFn fn = [sp](const BackwardArgs& args) {
    if (double* g = args.inputs[0])
      for (std::size_t i = 0; i < args.grad_out.size(); ++i) g[i] += args.grad_out[i];
    if (double* g = args.inputs[1])
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t c = 0; c < sp.n; ++c) {
          const std::size_t base = (o * sp.n + c) * sp.inner;
          double acc = 0.0;
          for (std::size_t i = 0; i < sp.inner; ++i) acc += args.grad_out[base + i];
          g[c] += acc;
        }
  };
  return x.tape().record(Tensor(s, std::move(out)), {x, b}, std::move(fn), "bias_add");
}

Var reshape(Var a, Shape shape) {
  if (numel(shape) != a.size())
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  BackwardFn fn = [](const BackwardArgs& args) {
    for (std::size_t i = 0; i < args.grad_out.size(); ++i) args.inputs[0][i] += args.grad_out[i];
  };
  return a.tape().record(a.value().reshaped(std::move(shape)), {a}, std::move(fn), "reshape");
}

Var broadcast_to(Var a, Shape shape) {
  const Shape& src = a.shape();
  if (src.size() > shape.size())
    throw ShapeError("broadcast_to: cannot broadcast " + shape_str(src) + " to " + shape_str(shape));
  const std::size_t lead = shape.size() - src.size();
  // Source stride for each target axis; zero on broadcast axes.
  std::vector<std::size_t> stride(shape.size(), 0);
  std::size_t st = 1;
  for (std::size_t i = src.size(); i-- > 0;) {
    const std::size_t t = shape[lead + i];
    if (src[i] != t && src[i] != 1)
      throw ShapeError("broadcast_to: cannot broadcast " + shape_str(src) + " to " +
                       shape_str(shape));
    stride[lead + i] = src[i] == 1 ? 0 : st;
    st *= src[i];
  }
  const std::size_t total = numel(shape);
  std::vector<std::size_t> index_map(total);
  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t off = 0;
    for (std::size_t d = 0; d < shape.size(); ++d) off += idx[d] * stride[d];
    index_map[flat] = off;
    for (std::size_t d = shape.size(); d-- > 0;) {
      if (++idx[d] < shape[d]) break;
      idx[d] = 0;
    }
  }
  const auto& x = a.value().data();
  std::vector<double> out(total);
  for (std::size_t i = 0; i < total; ++i) out[i] = x[index_map[i]];
  BackwardFn fn;
  if (a.requires_grad()) {
    fn = [map = std::move(index_map)](const BackwardArgs& args) {
      double* g = args.inputs[0];
      for (std::size_t i = 0; i < map.size(); ++i) g[map[i]] += args.grad_out[i];
    };
  }
  return a.tape().record(Tensor(std::move(shape), std::move(out)), {a}, std::move(fn),
                         "broadcast_to");
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d)
      if (d != axis && s[d] != first[d]) ok = false;
    if (!ok)
      throw ShapeError("concat: incompatible " + shape_str(first) + " and " + shape_str(s) +
                       " along axis " + std::to_string(axis));
    out_shape[axis] += s[axis];
  }
  const AxisSplit sp = split_at(out_shape, axis);
  std::vector<std::size_t> widths;
  for (const auto& p : parts) widths.push_back(p.shape()[axis] * sp.inner);
  const std::size_t row = sp.n * sp.inner;
  std::vector<double> out(numel(out_shape));
  std::size_t col = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& v = parts[k].value().data();
    for (std::size_t o = 0; o < sp.outer; ++o)
      std::copy_n(v.begin() + o * widths[k], widths[k], out.begin() + o * row + col);
    col += widths[k];
  }
  BackwardFn fn = [widths, row, outer = sp.outer](const BackwardArgs& args) {
    std::size_t c = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (double* g = args.inputs[k])
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < widths[k]; ++i)
            g[o * widths[k] + i] += args.grad_out[o * row + c + i];
      c += widths[k];
    }
  };
  return parts[0].tape().record(Tensor(out_shape, std::move(out)), parts, std::move(fn), "concat");
}

Var instance_norm(Var x, double eps) {
  require_rank("instance_norm", x, 4);
  const Shape& s = x.shape();
  const std::size_t planes = s[0] * s[1], len = s[2] * s[3];
  const auto& xv = x.value().data();
  std::vector<double> out(xv.size());
  std::vector<double> inv_std(planes);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = xv.data() + p * len;
    double mu = 0.0;
    for (std::size_t i = 0; i < len; ++i) mu += src[i];
    mu /= static_cast<double>(len);
    double var = 0.0;
    for (std::size_t i = 0; i < len; ++i) var += (src[i] - mu) * (src[i] - mu);
    var /= static_cast<double>(len);
    inv_std[p] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < len; ++i) out[p * len + i] = (src[i] - mu) * inv_std[p];
  }
  BackwardFn fn;
  if (x.requires_grad()) {
    fn = [xhat = out, inv_std, planes, len](const BackwardArgs& args) {
      double* g = args.inputs[0];
      const double n = static_cast<double>(len);
      for (std::size_t p = 0; p < planes; ++p) {
        const double* go = args.grad_out.data() + p * len;
        const double* xh = xhat.data() + p * len;
        double mg = 0.0, mgx = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
          mg += go[i];
          mgx += go[i] * xh[i];
        }
        mg /= n;
        mgx /= n;
        for (std::size_t i = 0; i < len; ++i) g[p * len + i] += inv_std[p] * (go[i] - mg - xh[i] * mgx);
      }
    };
  }
  return x.tape().record(Tensor(s, std::move(out)), {x}, std::move(fn), "instance_norm");
}

Var gram(Var x) {
  require_rank("gram", x, 3);
  const std::size_t n = x.shape()[0], c = x.shape()[1], l = x.shape()[2];
  const double scale = 1.0 / static_cast<double>(c * l);
  const auto& xv = x.value().data();
  std::vector<double> out(n * c * c);
  for (std::size_t b = 0; b < n; ++b) {
    ConstMatMap xm(xv.data() + b * c * l, c, l);
    MatMap(out.data() + b * c * c, c, c).noalias() = scale * (xm * xm.transpose());
  }
  BackwardFn fn;
  if (x.requires_grad()) {
    fn = [x, n, c, l, scale](const BackwardArgs& args) {
      const auto& xd = x.value().data();
      for (std::size_t b = 0; b < n; ++b) {
        ConstMatMap g(args.grad_out.data() + b * c * c, c, c);
        ConstMatMap xm(xd.data() + b * c * l, c, l);
        MatMap(args.inputs[0] + b * c * l, c, l).noalias() += scale * ((g + g.transpose()) * xm);
      }
    };
  }
  return x.tape().record(Tensor({n, c, c}, std::move(out)), {x}, std::move(fn), "gram");
}

Var log_softmax(Var x) {
  require_rank("log_softmax", x, 2);
  const std::size_t n = x.shape()[0], k = x.shape()[1];
  const auto& xv = x.value().data();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < n; ++r) {
    const double* src = xv.data() + r * k;
    const double mx = *std::max_element(src, src + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(src[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < k; ++j) out[r * k + j] = src[j] - lse;
  }
  BackwardFn fn;
  if (x.requires_grad()) {
    fn = [y = out, n, k](const BackwardArgs& args) {
      double* g = args.inputs[0];
      for (std::size_t r = 0; r < n; ++r) {
        double gs = 0.0;
        for (std::size_t j = 0; j < k; ++j) gs += args.grad_out[r * k + j];
        for (std::size_t j = 0; j < k; ++j)
          g[r * k + j] += args.grad_out[r * k + j] - std::exp(y[r * k + j]) * gs;
      }
    };
  }
  return x.tape().record(Tensor({n, k}, std::move(out)), {x}, std::move(fn), "log_softmax");
}

Var embedding_mean(Var table, const std::vector<std::vector<std::int64_t>>& ids) {
  require_rank("embedding_mean", table, 2);
  if (ids.empty()) throw ShapeError("embedding_mean: empty batch");
  const std::size_t vocab = table.shape()[0], d = table.shape()[1];
  for (const auto& seq : ids)
    for (auto id : seq)
      if (id < 0 || static_cast<std::size_t>(id) >= vocab)
        throw std::out_of_range("embedding_mean: token id " + std::to_string(id) +
                                " outside vocabulary of size " + std::to_string(vocab));
  const auto& tv = table.value().data();
  std::vector<double> out(ids.size() * d, 0.0);
  for (std::size_t n = 0; n < ids.size(); ++n) {
    std::size_t count = 0;
    for (auto id : ids[n]) {
      if (id == 0) continue;
      ++count;
      for (std::size_t j = 0; j < d; ++j) out[n * d + j] += tv[static_cast<std::size_t>(id) * d + j];
    }
    if (count)
      for (std::size_t j = 0; j < d; ++j) out[n * d + j] /= static_cast<double>(count);
  }
  BackwardFn fn;
  if (table.requires_grad()) {
    fn = [ids, d](const BackwardArgs& args) {
      double* g = args.inputs[0];
      for (std::size_t n = 0; n < ids.size(); ++n) {
        const auto count = std::count_if(ids[n].begin(), ids[n].end(), [](auto id) { return id != 0; });
        if (!count) continue;
        const double w = 1.0 / static_cast<double>(count);
        for (auto id : ids[n]) {
          if (id == 0) continue;
          for (std::size_t j = 0; j < d; ++j)
            g[static_cast<std::size_t>(id) * d + j] += w * args.grad_out[n * d + j];
        }
      }
    };
  }
  return table.tape().record(Tensor({ids.size(), d}, std::move(out)), {table}, std::move(fn),
                             "embedding_mean");
}

}  // namespace mmgan
