#include <cmath>

#include "mmgan/nn.hpp"

namespace mmgan::nn {

AdamState make_adam_state(const ParamSet& params, AdamConfig hyper) {
  if (!(hyper.lr >= 0.0) || !(hyper.beta1 >= 0.0 && hyper.beta1 < 1.0) ||
      !(hyper.beta2 >= 0.0 && hyper.beta2 < 1.0) || !(hyper.eps > 0.0))
    throw std::invalid_argument("invalid Adam hyperparameters");
  AdamState s;
  s.hyper = hyper;
  for (const auto& [path, t] : params) {
    s.m.emplace(path, std::vector<double>(t.size(), 0.0));
    s.v.emplace(path, std::vector<double>(t.size(), 0.0));
  }
  return s;
}

void adam_step(ParamSet& params, const GradMap& grads, AdamState& state) {
  for (const auto& [path, g] : grads)
    if (!params.contains(path)) throw std::invalid_argument("gradient for unknown parameter '" + path + "'");
  for (const auto& [path, t] : params) {
    auto it = grads.find(path);
    if (it == grads.end()) throw std::invalid_argument("missing gradient for parameter '" + path + "'");
    if (it->second.size() != t.size())
      throw ShapeError("gradient for '" + path + "' has " + std::to_string(it->second.size()) +
                       " entries, parameter has " + std::to_string(t.size()));
    for (double v : it->second)
      if (!std::isfinite(v)) throw std::domain_error("non-finite gradient in parameter '" + path + "'");
    if (state.m.count(path) == 0 || state.m.at(path).size() != t.size() ||
        state.v.at(path).size() != t.size())
      throw ShapeError("Adam state does not match parameter '" + path + "'");
  }

  const auto& h = state.hyper;
  state.t += 1;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
  for (const auto& [path, g] : grads) {
    auto theta = params.at(path).values();
    auto& m = state.m.at(path);
    auto& v = state.v.at(path);
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      theta[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
    }
  }
}

}  // namespace mmgan::nn
