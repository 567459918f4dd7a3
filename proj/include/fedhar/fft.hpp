#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "fedhar/common.hpp"

namespace fedhar {

namespace detail {

// Iterative radix-2 Cooley-Tukey; n must be a power of two.
inline void fft_pow2(std::vector<std::complex<double>>& a, bool invert) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * M_PI / static_cast<double>(len) * (invert ? 1.0 : -1.0);
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (invert) {
    for (auto& x : a) x /= static_cast<double>(n);
  }
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace detail

// Unnormalized DFT of a real sequence of arbitrary length via Bluestein's
// chirp-z transform (power-of-two lengths take the radix-2 path directly).
inline std::vector<std::complex<double>> dft(std::span<const double> x) {
  const std::size_t n = x.size();
  require(n >= 1, "dft: empty input");
  if ((n & (n - 1)) == 0) {
    std::vector<std::complex<double>> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = x[i];
    detail::fft_pow2(a, false);
    return a;
  }
  // chirp c_k = exp(-i pi k^2 / n); X_k = c_k * (x*c conv conj-chirp)_k
  const std::size_t m = detail::next_pow2(2 * n + 1);
  std::vector<std::complex<double>> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    double ang = M_PI * static_cast<double>((k * k) % (2 * n)) / static_cast<double>(n);
    chirp[k] = std::complex<double>(std::cos(ang), -std::sin(ang));
  }
  std::vector<std::complex<double>> a(m, {0.0, 0.0}), b(m, {0.0, 0.0});
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
  b[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(chirp[k]);
  detail::fft_pow2(a, false);
  detail::fft_pow2(b, false);
  for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
  detail::fft_pow2(a, true);
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * chirp[k];
  return out;
}

struct Spectrum {
  std::vector<double> magnitude;  // one-sided, floor(n/2)+1 bins, unnormalized
  std::vector<double> frequency;  // bin center frequencies in Hz
};

inline std::size_t onesided_bins(std::size_t block_len) { return block_len / 2 + 1; }

// One-sided magnitude spectrum with per-bin frequencies for a real block.
inline Spectrum fft_features(std::span<const double> block, double rate_hz) {
  const std::size_t n = block.size();
  require(n >= 2, "fft_features: block length must be >= 2");
  require(rate_hz > 0.0, "fft_features: rate must be positive");
  auto full = dft(block);
  const std::size_t bins = onesided_bins(n);
  Spectrum s;
  s.magnitude.resize(bins);
  s.frequency.resize(bins);
  for (std::size_t j = 0; j < bins; ++j) {
    s.magnitude[j] = std::abs(full[j]);
    s.frequency[j] = rate_hz * static_cast<double>(j) / static_cast<double>(n);
    require(std::isfinite(s.magnitude[j]), "fft_features: non-finite magnitude");
  }
  return s;
}

}  // namespace fedhar
