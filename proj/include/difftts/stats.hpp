// Copyright (C) 2026 the difftts authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "difftts/matrix.hpp"

namespace difftts {

inline double mean(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Unbiased sample variance.
inline double variance(const Vec& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double std_error_of_mean(const Vec& v) {
  if (v.size() < 2) return 0.0;
  return std::sqrt(variance(v) / static_cast<double>(v.size()));
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double gaussian_log_density(std::span<const double> x, std::span<const double> mean,
                                   std::span<const double> var_diag) {
  double lp = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean[i];
    lp += -0.5 * std::log(2.0 * std::numbers::pi * var_diag[i]) - 0.5 * d * d / var_diag[i];
  }
  return lp;
}

// CDF of a 1D Gaussian mixture with component std deviations derived from
// the variances.
inline double mixture_cdf_1d(double x, const Vec& weights, const Vec& means, const Vec& vars) {
  double c = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k)
    c += weights[k] * normal_cdf((x - means[k]) / std::sqrt(vars[k]));
  return c;
}

// Quantile of a 1D Gaussian mixture by bisection.
inline double mixture_quantile_1d(double q, const Vec& weights, const Vec& means, const Vec& vars) {
  if (q <= 0.0 || q >= 1.0) throw std::domain_error("mixture_quantile_1d: q outside (0,1)");
  double lo = means[0], hi = means[0];
  for (std::size_t k = 0; k < means.size(); ++k) {
    const double sd = std::sqrt(vars[k]);
    lo = std::min(lo, means[k] - 12.0 * sd - 1.0);
    hi = std::max(hi, means[k] + 12.0 * sd + 1.0);
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mixture_cdf_1d(mid, weights, means, vars) < q)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Wasserstein-1 distance between an empirical 1D sample and a distribution
// given through its quantile function, by sorted-sample comparison.
template <typename QuantileFn>
double w1_sorted_vs_quantiles(Vec samples, QuantileFn&& quantile) {
  std::sort(samples.begin(), samples.end());
  const std::size_t m = samples.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double q = (static_cast<double>(i) + 0.5) / static_cast<double>(m);
    acc += std::abs(samples[i] - quantile(q));
  }
  return acc / static_cast<double>(m);
}

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r2 = 0.0;
};

// Least-squares fit y = a + b x with coefficient of determination.
inline LinearFit linear_fit(const Vec& x, const Vec& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("linear_fit: need matched samples");
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double pred = f.intercept + f.slope * x[i];
    ss_res += (y[i] - pred) * (y[i] - pred);
    ss_tot += (y[i] - my) * (y[i] - my);
  }
  f.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

}  // namespace difftts
