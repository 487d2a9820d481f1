#pragma once

#include <functional>

#include "mmgan/tensor.hpp"

namespace mmgan {

/// Builds a single-element result from `x` on x's tape.
using ScalarFn = std::function<Var(Var x)>;

/// Largest |analytic - central difference| / max(1, |analytic|, |numeric|)
/// over all coordinates of x. Throws ShapeError if f is not scalar-valued.
double grad_check(const ScalarFn& f, const Tensor& x, double eps = 1e-6);

}  // namespace mmgan
