#pragma once

// Slow, direct reference implementations. Deliberately share no code with the
// library so a disagreement points at one side or the other.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace oracle {

inline std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0L * std::numbers::pi_v<long double> * i / (n - 1));
  }
  return w;
}

// One-sided PSD by an O(N * bins) DFT in long double.
inline std::vector<double> dft_psd(std::span<const double> x, std::size_t nfft, double fs) {
  const auto w = hann(x.size());
  long double s2 = 0.0L;
  for (double v : w) s2 += static_cast<long double>(v) * v;
  const std::size_t bins = nfft / 2 + 1;
  std::vector<double> p(bins);
  const long double two_pi = 2.0L * std::numbers::pi_v<long double>;
  std::vector<long double> cos_t(nfft), sin_t(nfft);
  for (std::size_t m = 0; m < nfft; ++m) {
    cos_t[m] = std::cos(two_pi * static_cast<long double>(m) / nfft);
    sin_t[m] = std::sin(two_pi * static_cast<long double>(m) / nfft);
  }
  for (std::size_t k = 0; k < bins; ++k) {
    long double re = 0.0L, im = 0.0L;
    for (std::size_t n = 0; n < x.size(); ++n) {
      const std::size_t m = (k * n) % nfft;
      const long double v = static_cast<long double>(w[n]) * x[n];
      re += v * cos_t[m];
      im -= v * sin_t[m];
    }
    long double power = (re * re + im * im) / (fs * s2);
    if (k != 0 && k != bins - 1) power *= 2.0L;
    p[k] = static_cast<double>(power);
  }
  return p;
}

inline double windowed_power(std::span<const double> x) {
  const auto w = hann(x.size());
  long double num = 0.0L, den = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += static_cast<long double>(w[i] * x[i]) * (w[i] * x[i]);
    den += static_cast<long double>(w[i]) * w[i];
  }
  return static_cast<double>(num / den);
}

inline double band_sum(const std::vector<double>& p, double df, double lo, double hi) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double f = k * df;
    if (f >= lo && f <= hi) s += p[k] * df;
  }
  return s;
}

// Probability a random positive outscores a random negative, ties half.
inline double mann_whitney(std::span<const double> scores, std::span<const bool> positive) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!positive[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positive[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

inline double variance(std::span<const double> v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size());
}

inline double rbf(std::span<const double> a, std::span<const double> b, double gamma) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return std::exp(-gamma * d);
}

inline double kernel_sum(const std::vector<std::vector<double>>& sv, std::span<const double> alpha,
                         std::span<const int> y, double bias, std::span<const double> v,
                         double gamma) {
  double f = bias;
  for (std::size_t i = 0; i < sv.size(); ++i) f += alpha[i] * y[i] * rbf(sv[i], v, gamma);
  return f;
}

inline double rel_err(double got, double want) {
  const double scale = std::max(std::abs(want), 1e-300);
  return std::abs(got - want) / scale;
}

}  // namespace oracle
