#include "mmgan/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace mmgan {

namespace {
double evaluate(const ScalarFn& f, const Tensor& x) {
  Tape tape;
  Tensor probe = x;
  probe.set_requires_grad(false);
  Var out = f(tape.constant(std::move(probe)));
  if (out.size() != 1) throw ShapeError("grad_check: f must return a scalar, got " + shape_str(out.shape()));
  return out.item();
}
}  // namespace

double grad_check(const ScalarFn& f, const Tensor& x, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");
  Tape tape;
  Tensor leaf = x;
  leaf.set_requires_grad(true);
  Var xv = tape.leaf(std::move(leaf));
  Var out = f(xv);
  if (out.size() != 1) throw ShapeError("grad_check: f must return a scalar, got " + shape_str(out.shape()));
  tape.backward(out);
  const auto analytic = tape.grad(xv);

  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = evaluate(f, probe);
    probe[i] = orig - eps;
    const double down = evaluate(f, probe);
    probe[i] = orig;
    const double numeric = (up - down) / (2.0 * eps);
    const double err = std::abs(analytic[i] - numeric) /
                       std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace mmgan
