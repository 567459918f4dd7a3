#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "fedhar/common.hpp"

namespace fedhar {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
// eigenvalues in descending order with matching eigenvectors (columns of v).
struct EigenResult {
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;  // vectors[i] is the i-th eigenvector
};

inline EigenResult jacobi_eigen(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  require(n >= 1, "jacobi_eigen: empty matrix");
  for (const auto& row : a) require(row.size() == n, "jacobi_eigen: matrix not square");
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a[i][p], aiq = a[i][q];
          a[i][p] = c * aip - s * aiq;
          a[i][q] = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = a[p][i], aqi = a[q][i];
          a[p][i] = c * api - s * aqi;
          a[q][i] = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v[i][p], viq = v[i][q];
          v[i][p] = c * vip - s * viq;
          v[i][q] = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });

  EigenResult r;
  r.values.resize(n);
  r.vectors.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    r.values[i] = a[order[i]][order[i]];
    for (std::size_t j = 0; j < n; ++j) r.vectors[i][j] = v[j][order[i]];
    // sign convention: largest-magnitude entry is positive
    std::size_t imax = 0;
    for (std::size_t j = 1; j < n; ++j)
      if (std::abs(r.vectors[i][j]) > std::abs(r.vectors[i][imax])) imax = j;
    if (r.vectors[i][imax] < 0.0)
      for (double& x : r.vectors[i]) x = -x;
  }
  return r;
}

// Projects feature vectors onto the top-2 principal components of the
// mean-centered feature matrix. All-identical input yields all-zero points.
inline std::vector<std::array<double, 2>> pca_project(
    const std::vector<std::vector<double>>& features) {
  require(features.size() >= 2, "pca_project: need at least 2 vectors");
  const std::size_t d = features.front().size();
  require(d >= 2, "pca_project: need at least 2 feature dimensions");
  for (const auto& f : features) require(f.size() == d, "pca_project: ragged features");

  std::vector<double> mean(d, 0.0);
  for (const auto& f : features)
    for (std::size_t j = 0; j < d; ++j) mean[j] += f[j];
  for (double& m : mean) m /= static_cast<double>(features.size());

  std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
  for (const auto& f : features) {
    for (std::size_t i = 0; i < d; ++i) {
      const double ci = f[i] - mean[i];
      for (std::size_t j = i; j < d; ++j) cov[i][j] += ci * (f[j] - mean[j]);
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      cov[i][j] /= static_cast<double>(features.size());
      cov[j][i] = cov[i][j];
    }

  EigenResult eig = jacobi_eigen(cov);
  std::vector<std::array<double, 2>> out(features.size());
  for (std::size_t s = 0; s < features.size(); ++s) {
    for (int comp = 0; comp < 2; ++comp) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += (features[s][j] - mean[j]) * eig.vectors[comp][j];
      out[s][comp] = dot;
    }
  }
  return out;
}

}  // namespace fedhar
