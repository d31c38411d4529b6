// Copyright (C) 2026 the difftts authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "difftts/matrix.hpp"

namespace difftts {

// Linear noise schedule beta(t) = beta0 + (beta1 - beta0) * t on [0, horizon].
// For the forward process to flatten the data distribution into the terminal
// Gaussian the accumulated noise must dominate: exp(-integral of beta over
// [0, horizon]) should be well below 1e-4. That is a property of sensible
// configurations, not a hard precondition; degenerate schedules (e.g. beta
// identically zero) are still evaluable.
struct NoiseSchedule {
  double beta0 = 0.05;
  double beta1 = 20.0;
  double horizon = 1.0;

  // exp(-B(0, horizon)); < 1e-4 for any schedule that saturates.
  double terminal_decay() const;
};

inline void validate(const NoiseSchedule& s) {
  if (!(s.horizon > 0.0)) throw std::domain_error("NoiseSchedule: horizon must be positive");
  if (s.beta0 < 0.0 || s.beta1 < 0.0) throw std::domain_error("NoiseSchedule: beta must be nonnegative");
}

inline double beta_at(const NoiseSchedule& s, double t) {
  if (t < 0.0 || t > s.horizon) throw std::domain_error("beta_at: t outside [0, horizon]");
  return s.beta0 + (s.beta1 - s.beta0) * t;
}

// Integral of beta over [s, t], closed form (no quadrature).
inline double beta_integral(const NoiseSchedule& sch, double s, double t) {
  if (s > t) throw std::domain_error("beta_integral: s > t");
  if (s < 0.0 || t > sch.horizon) throw std::domain_error("beta_integral: interval outside [0, horizon]");
  return sch.beta0 * (t - s) + 0.5 * (sch.beta1 - sch.beta0) * (t * t - s * s);
}

// Accumulated noise variance 1 - exp(-B(0, t)) for the identity-covariance
// case.
inline double lambda_scalar(const NoiseSchedule& s, double t) {
  return 1.0 - std::exp(-beta_integral(s, 0.0, t));
}

inline double NoiseSchedule::terminal_decay() const { return std::exp(-beta_integral(*this, 0.0, horizon)); }

// Noise schedule plus the diagonal terminal covariance. dim is the feature
// dimensionality n; sigma_diag holds the diagonal of the terminal covariance.
struct DiffusionSpec {
  NoiseSchedule schedule;
  Vec sigma_diag;
  int dim = 0;

  static DiffusionSpec identity(int n, NoiseSchedule sch = {}) {
    DiffusionSpec spec;
    spec.schedule = sch;
    spec.sigma_diag.assign(static_cast<std::size_t>(n), 1.0);
    spec.dim = n;
    return spec;
  }

  bool identity_sigma() const {
    for (double s : sigma_diag)
      if (s != 1.0) return false;
    return true;
  }
};

inline void validate(const DiffusionSpec& spec) {
  validate(spec.schedule);
  if (spec.dim <= 0) throw std::domain_error("DiffusionSpec: dim must be positive");
  if (static_cast<int>(spec.sigma_diag.size()) != spec.dim)
    throw std::invalid_argument("DiffusionSpec: sigma_diag length != dim");
  for (double s : spec.sigma_diag)
    if (!(s > 0.0)) throw std::domain_error("DiffusionSpec: sigma_diag entries must be positive");
}

inline void require_identity_sigma(const DiffusionSpec& spec, const char* where) {
  if (!spec.identity_sigma())
    throw std::domain_error(std::string(where) + ": requires identity terminal covariance");
}

// Mean and diagonal variance of the conditional law of the diffused state
// given the initial state.
struct ConditionalMarginal {
  Vec mean_rho;
  Vec var_diag;
};

// mean_i = e^{-B/(2 s_i)} x0_i + (1 - e^{-B/(2 s_i)}) mu_i
// var_i  = s_i (1 - e^{-B/s_i})           with s_i the terminal variances.
// t = 0 is permitted and yields the degenerate zero-variance marginal.
inline ConditionalMarginal marginal_params(const DiffusionSpec& spec, std::span<const double> x0,
                                           std::span<const double> mu, double t) {
  const std::size_t n = static_cast<std::size_t>(spec.dim);
  if (x0.size() != n || mu.size() != n) throw std::invalid_argument("marginal_params: dimension mismatch");
  const double big_b = beta_integral(spec.schedule, 0.0, t);
  ConditionalMarginal out;
  out.mean_rho.resize(n);
  out.var_diag.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = spec.sigma_diag[i];
    const double decay = std::exp(-0.5 * big_b / s);
    out.mean_rho[i] = decay * x0[i] + (1.0 - decay) * mu[i];
    out.var_diag[i] = s * (1.0 - decay * decay);
  }
  return out;
}

}  // namespace difftts
