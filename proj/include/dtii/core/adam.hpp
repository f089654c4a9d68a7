#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dtii/core/array.hpp"

namespace dtii::core {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moments for a list of parameter arrays.
struct AdamState {
  std::vector<ArrayF> m;
  std::vector<ArrayF> v;
  std::int64_t step = 0;

  void init_like(std::span<ArrayF* const> params) {
    m.clear();
    v.clear();
    for (const ArrayF* p : params) {
      m.emplace_back(p->shape(), 0.0f);
      v.emplace_back(p->shape(), 0.0f);
    }
    step = 0;
  }
};

/// Bias-corrected Adam step applied in place. An array whose gradient has a
/// non-finite entry is left untouched (moments included); its index is
/// returned so the caller can log the incident.
inline std::vector<std::size_t> adam_update(std::span<ArrayF* const> params, std::span<const ArrayF* const> grads,
                                            AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ShapeError("adam_update: params, grads and moments are not aligned");
  std::vector<std::size_t> skipped;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t a = 0; a < params.size(); ++a) {
    ArrayF& p = *params[a];
    const ArrayF& g = *grads[a];
    if (g.size() != p.size()) throw ShapeError("adam_update: gradient shape mismatch for array " + std::to_string(a));
    if (!g.all_finite()) {
      skipped.push_back(a);
      continue;
    }
    ArrayF& m = state.m[a];
    ArrayF& v = state.v[a];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      p[i] = static_cast<float>(p[i] - cfg.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps));
    }
  }
  return skipped;
}

}  // namespace dtii::core
