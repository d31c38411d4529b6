// Copyright (C) 2026 the difftts authors
// SPDX-License-Identifier: Apache-2.0
//
// Test-only oracles, independent of the implementation paths they check.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "difftts/matrix.hpp"

namespace testsupport {

// Adaptive Simpson quadrature.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-13, int depth = 40) {
  const auto simpson = [&](double lo, double hi) {
    const double mid = 0.5 * (lo + hi);
    return (hi - lo) / 6.0 * (f(lo) + 4.0 * f(mid) + f(hi));
  };
  std::function<double(double, double, double, int)> recurse = [&](double lo, double hi, double whole,
                                                                   int d) -> double {
    const double mid = 0.5 * (lo + hi);
    const double left = simpson(lo, mid);
    const double right = simpson(mid, hi);
    if (d <= 0 || std::abs(left + right - whole) < 15.0 * tol) return left + right + (left + right - whole) / 15.0;
    return recurse(lo, mid, left, d - 1) + recurse(mid, hi, right, d - 1);
  };
  return recurse(a, b, simpson(a, b), depth);
}

// Central finite-difference gradient of a scalar function of a vector.
inline difftts::Vec fd_gradient(const std::function<double(const difftts::Vec&)>& f, difftts::Vec x,
                                double eps_scale = 1e-5) {
  difftts::Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double eps = eps_scale * (1.0 + std::abs(x[i]));
    const double orig = x[i];
    x[i] = orig + eps;
    const double fp = f(x);
    x[i] = orig - eps;
    const double fm = f(x);
    x[i] = orig;
    g[i] = (fp - fm) / (2.0 * eps);
  }
  return g;
}

// Central finite difference of a scalar function along one coordinate.
inline double fd_partial(const std::function<double(const difftts::Vec&)>& f, difftts::Vec x, std::size_t i,
                         double eps_scale = 1e-5) {
  const double eps = eps_scale * (1.0 + std::abs(x[i]));
  const double orig = x[i];
  x[i] = orig + eps;
  const double fp = f(x);
  x[i] = orig - eps;
  const double fm = f(x);
  return (fp - fm) / (2.0 * eps);
}

// |a - b| <= rel * max(|a|, |b|) + abs_floor
inline bool close_rel(double a, double b, double rel, double abs_floor = 0.0) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

}  // namespace testsupport
