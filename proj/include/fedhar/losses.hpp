#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "fedhar/common.hpp"
#include "fedhar/rng.hpp"

namespace fedhar {

// log(1 + e^x) without overflow
inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Cosine similarity of two nonzero vectors. A zero-norm embedding signals a
// dead network and is a hard error.
inline double cosine(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "cosine: dimension mismatch");
  require(!a.empty(), "cosine: empty vectors");
  const double na = norm(a), nb = norm(b);
  require(na > 0.0 && nb > 0.0, "cosine: zero-norm embedding");
  return dot(a, b) / (na * nb);
}

// d(cosine)/da and d(cosine)/db for backprop through both branches.
inline void cosine_grad(std::span<const double> a, std::span<const double> b,
                        std::span<double> da, std::span<double> db) {
  const double na = norm(a), nb = norm(b);
  require(na > 0.0 && nb > 0.0, "cosine_grad: zero-norm embedding");
  const double phi = dot(a, b) / (na * nb);
  for (std::size_t i = 0; i < a.size(); ++i) {
    da[i] = b[i] / (na * nb) - phi * a[i] / (na * na);
    db[i] = a[i] / (na * nb) - phi * b[i] / (nb * nb);
  }
}

struct SigmoidSlope {
  double k = 10.0;
};

// Binary log-loss on a steep sigmoid of the cosine similarity, evaluated in
// log-space: -delta*log(sigma(k*phi)) - (1-delta)*log(1 - sigma(k*phi)).
inline double pairwise_loss(double phi, int delta, SigmoidSlope slope = {}) {
  require(slope.k > 0.0, "pairwise_loss: slope must be positive");
  require(delta == 0 || delta == 1, "pairwise_loss: delta must be 0 or 1");
  return delta == 1 ? softplus(-slope.k * phi) : softplus(slope.k * phi);
}

// dl/dphi = k * (sigma(k*phi) - delta)
inline double pairwise_loss_dphi(double phi, int delta, SigmoidSlope slope = {}) {
  const double s = 1.0 / (1.0 + std::exp(-slope.k * phi));
  return slope.k * (s - static_cast<double>(delta));
}

// H(p, q) = -sum p_j log q_j with an epsilon floor inside the log.
inline double cross_entropy(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size(), "cross_entropy: dimension mismatch");
  constexpr double kFloor = 1e-12;
  double h = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] != 0.0) h -= p[j] * std::log(std::max(q[j], kFloor));
  }
  return h;
}

inline double cross_entropy_onehot(std::size_t target, std::span<const double> q) {
  require(target < q.size(), "cross_entropy: target out of range");
  constexpr double kFloor = 1e-12;
  return -std::log(std::max(q[target], kFloor));
}

// Index pairs into a client's sample list with the same-class flag delta.
struct PairBatch {
  struct Pair {
    int i = 0;
    int j = 0;
    int delta = 0;
  };
  std::vector<Pair> pairs;
  bool single_class = false;
};

// Balanced positive/negative pair sampling over local labels. A client with
// only one class yields positive pairs only; the batch is flagged.
inline PairBatch sample_pairs(std::span<const int> labels, int batch_size, Rng& rng) {
  require(labels.size() >= 2, "sample_pairs: need at least 2 samples");
  require(batch_size >= 1, "sample_pairs: batch size must be >= 1");

  int max_label = 0;
  for (int l : labels) {
    require(l >= 0, "sample_pairs: negative label");
    max_label = std::max(max_label, l);
  }
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(max_label) + 1);
  for (std::size_t i = 0; i < labels.size(); ++i)
    by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));

  int classes_present = 0;
  for (const auto& c : by_class)
    if (!c.empty()) ++classes_present;

  PairBatch out;
  out.single_class = classes_present < 2;
  out.pairs.reserve(static_cast<std::size_t>(batch_size));
  const std::size_t n = labels.size();
  for (int b = 0; b < batch_size; ++b) {
    const bool want_positive = out.single_class || rng.uniform() < 0.5;
    const int i = static_cast<int>(rng.below(n));
    const auto& same = by_class[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    int j;
    if (want_positive) {
      if (same.size() > 1) {
        do {
          j = same[rng.below(same.size())];
        } while (j == i);
      } else {
        j = i;
      }
      out.pairs.push_back({i, j, 1});
    } else {
      do {
        j = static_cast<int>(rng.below(n));
      } while (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)]);
      out.pairs.push_back({i, j, 0});
    }
  }
  return out;
}

}  // namespace fedhar
