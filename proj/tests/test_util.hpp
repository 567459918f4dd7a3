#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "fedhar/data.hpp"
#include "fedhar/param_set.hpp"
#include "fedhar/signals.hpp"

namespace fedhar::testutil {

// Central finite differences over every element of a ParamSet. `loss` must be
// a deterministic function of the parameters.
inline ParamSet finite_difference(const ParamSet& params,
                                  const std::function<double(const ParamSet&)>& loss,
                                  double h = 1e-4) {
  ParamSet fd = params.zeros_like();
  ParamSet work = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& wt = work.item(i).second;
    for (std::size_t e = 0; e < wt.size(); ++e) {
      const double orig = wt[e];
      wt[e] = orig + h;
      const double up = loss(work);
      wt[e] = orig - h;
      const double down = loss(work);
      wt[e] = orig;
      fd.item(i).second[e] = (up - down) / (2.0 * h);
    }
  }
  return fd;
}

// max over elements of |a - b| / max(|a|, |b|, floor)
inline double max_rel_error(const ParamSet& a, const ParamSet& b, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Tensor& ta = a.item(i).second;
    const Tensor& tb = b.item(i).second;
    for (std::size_t e = 0; e < ta.size(); ++e) {
      const double denom = std::max({std::abs(ta[e]), std::abs(tb[e]), floor});
      worst = std::max(worst, std::abs(ta[e] - tb[e]) / denom);
    }
  }
  return worst;
}

// Random preprocessed-sample features matching a 2-sensor layout.
inline SampleFeatures random_features(Rng& rng, std::size_t k, std::size_t raw_axes,
                                      std::size_t f, std::size_t sensors = 2) {
  SampleFeatures sf;
  for (std::size_t s = 0; s < sensors; ++s) {
    Tensor t({k, 2 * (raw_axes + 1), f});
    for (double& v : t.flat()) v = rng.normal();
    sf.per_sensor.push_back(std::move(t));
  }
  return sf;
}

inline SensorTrack random_track(Rng& rng, std::size_t axes, std::size_t length,
                                double rate = 25.0) {
  SensorTrack tr{"sensor", {}, rate};
  for (std::size_t a = 0; a < axes; ++a) {
    std::vector<double> axis(length);
    for (double& v : axis) v = rng.normal();
    tr.axes.push_back(std::move(axis));
  }
  return tr;
}

// Mean silhouette coefficient of 2-D points under the given labels.
inline double silhouette(const std::vector<std::array<double, 2>>& points,
                         const std::vector<int>& labels) {
  const std::size_t n = points.size();
  auto dist = [&](std::size_t i, std::size_t j) {
    const double dx = points[i][0] - points[j][0];
    const double dy = points[i][1] - points[j][1];
    return std::sqrt(dx * dx + dy * dy);
  };
  int max_label = 0;
  for (int l : labels) max_label = std::max(max_label, l);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> mean_d(static_cast<std::size_t>(max_label) + 1, 0.0);
    std::vector<std::size_t> count(static_cast<std::size_t>(max_label) + 1, 0);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      mean_d[static_cast<std::size_t>(labels[j])] += dist(i, j);
      count[static_cast<std::size_t>(labels[j])] += 1;
    }
    const auto li = static_cast<std::size_t>(labels[i]);
    const double a = count[li] > 0 ? mean_d[li] / static_cast<double>(count[li]) : 0.0;
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < mean_d.size(); ++c) {
      if (c == li || count[c] == 0) continue;
      b = std::min(b, mean_d[c] / static_cast<double>(count[c]));
    }
    if (std::isinf(b)) continue;
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

// Tiny logistic-regression probe (gradient descent); returns train accuracy.
inline double logistic_probe_accuracy(const std::vector<std::vector<double>>& x,
                                      const std::vector<int>& y, int classes,
                                      int steps = 500, double lr = 0.1) {
  const std::size_t n = x.size(), d = x.front().size();
  // standardize features
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (const auto& row : x)
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
  for (double& m : mean) m /= static_cast<double>(n);
  for (const auto& row : x)
    for (std::size_t j = 0; j < d; ++j) sd[j] += (row[j] - mean[j]) * (row[j] - mean[j]);
  for (double& s : sd) s = std::max(std::sqrt(s / static_cast<double>(n)), 1e-9);

  std::vector<std::vector<double>> w(static_cast<std::size_t>(classes),
                                     std::vector<double>(d + 1, 0.0));
  auto logits_of = [&](const std::vector<double>& row, std::vector<double>& out) {
    for (int c = 0; c < classes; ++c) {
      double z = w[static_cast<std::size_t>(c)][d];
      for (std::size_t j = 0; j < d; ++j)
        z += w[static_cast<std::size_t>(c)][j] * (row[j] - mean[j]) / sd[j];
      out[static_cast<std::size_t>(c)] = z;
    }
  };
  std::vector<double> logits(static_cast<std::size_t>(classes));
  for (int step = 0; step < steps; ++step) {
    std::vector<std::vector<double>> grad(static_cast<std::size_t>(classes),
                                          std::vector<double>(d + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      logits_of(x[i], logits);
      double mx = logits[0];
      for (double v : logits) mx = std::max(mx, v);
      double zsum = 0.0;
      for (double& v : logits) {
        v = std::exp(v - mx);
        zsum += v;
      }
      for (int c = 0; c < classes; ++c) {
        const double p = logits[static_cast<std::size_t>(c)] / zsum -
                         (c == y[i] ? 1.0 : 0.0);
        for (std::size_t j = 0; j < d; ++j)
          grad[static_cast<std::size_t>(c)][j] += p * (x[i][j] - mean[j]) / sd[j];
        grad[static_cast<std::size_t>(c)][d] += p;
      }
    }
    for (int c = 0; c < classes; ++c)
      for (std::size_t j = 0; j <= d; ++j)
        w[static_cast<std::size_t>(c)][j] -=
            lr * grad[static_cast<std::size_t>(c)][j] / static_cast<double>(n);
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    logits_of(x[i], logits);
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.size(); ++c)
      if (logits[c] > logits[best]) best = c;
    if (static_cast<int>(best) == y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace fedhar::testutil
