#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the library code paths being checked.

#include <cmath>
#include <cstddef>
#include <vector>

#include "mmgan/random.hpp"
#include "mmgan/tensor.hpp"

namespace oracle {

inline mmgan::Tensor random_tensor(mmgan::Shape shape, std::uint64_t seed, double lo = -1.0,
                                   double hi = 1.0) {
  mmgan::Rng rng(seed);
  mmgan::Tensor t(shape);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Direct quadruple loop over output positions and kernel taps.
inline std::vector<double> conv2d(const mmgan::Tensor& x, const mmgan::Tensor& k, std::size_t s,
                                  std::size_t p, std::size_t& oh, std::size_t& ow) {
  const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto f = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  oh = (h + 2 * p - kh) / s + 1;
  ow = (w + 2 * p - kw) / s + 1;
  std::vector<double> out(n * f * oh * ow, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < f; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          double acc = 0.0;
          for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                const long iy = long(y * s + i) - long(p);
                const long ix = long(xx * s + j) - long(p);
                if (iy < 0 || ix < 0 || iy >= long(h) || ix >= long(w)) continue;
                acc += x[((b * c + ci) * h + iy) * w + ix] * k[((o * c + ci) * kh + i) * kw + j];
              }
          out[((b * f + o) * oh + y) * ow + xx] = acc;
        }
  return out;
}

inline double dot(const std::vector<double>& a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// G[i][j] = sum_hw f[i,hw] f[j,hw] / (C*H*W), one plain triple loop.
inline std::vector<double> gram(const std::vector<double>& fmap, std::size_t c, std::size_t hw) {
  std::vector<double> g(c * c, 0.0);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < hw; ++l) acc += fmap[i * hw + l] * fmap[j * hw + l];
      g[i * c + j] = acc / double(c * hw);
    }
  return g;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0 || bb == 0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

}  // namespace oracle
