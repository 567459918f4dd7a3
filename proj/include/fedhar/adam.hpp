#pragma once

#include <cmath>
#include <cstdint>

#include "fedhar/param_set.hpp"

namespace fedhar {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
};

// Bias-corrected Adam over a ParamSet; moment tensors mirror the parameters.
struct AdamState {
  ParamSet m;
  ParamSet v;
  std::int64_t t = 0;
  AdamConfig cfg;

  static AdamState init(const ParamSet& params, AdamConfig cfg = {}) {
    AdamState s;
    s.m = params.zeros_like();
    s.v = params.zeros_like();
    s.cfg = cfg;
    return s;
  }

  void step(ParamSet& params, const ParamSet& grads) {
    params.require_congruent(grads, "adam_step");
    m.require_congruent(params, "adam_step: stale optimizer state");
    t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& p = params.item(i).second;
      const Tensor& g = grads.item(i).second;
      Tensor& mi = m.item(i).second;
      Tensor& vi = v.item(i).second;
      for (std::size_t e = 0; e < p.size(); ++e) {
        mi[e] = cfg.beta1 * mi[e] + (1.0 - cfg.beta1) * g[e];
        vi[e] = cfg.beta2 * vi[e] + (1.0 - cfg.beta2) * g[e] * g[e];
        if (cfg.lr != 0.0) {
          const double mhat = mi[e] / bc1;
          const double vhat = vi[e] / bc2;
          p[e] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
      }
    }
    params.check_finite("adam_step");
  }
};

inline void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state) {
  state.step(params, grads);
}

}  // namespace fedhar
