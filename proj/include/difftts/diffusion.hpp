// Copyright (C) 2026 the difftts authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "difftts/matrix.hpp"
#include "difftts/rng.hpp"
#include "difftts/schedule.hpp"

namespace difftts {

// One simulated trajectory of the forward process. times[0] = 0 and
// states[0] is the supplied initial state.
struct DiffusionPath {
  Vec times;
  std::vector<Vec> states;
  std::uint64_t seed = 0;
};

// Draw the diffused state at time t directly from its conditional law,
// without simulating the path.
inline Vec sample_conditional(const DiffusionSpec& spec, std::span<const double> x0,
                              std::span<const double> mu, double t, Rng& rng) {
  if (!(t > 0.0)) throw std::domain_error("sample_conditional: t must be positive (variance degenerates)");
  const ConditionalMarginal m = marginal_params(spec, x0, mu, t);
  Vec out(m.mean_rho.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = m.mean_rho[i] + std::sqrt(m.var_diag[i]) * rng.normal();
  return out;
}

// Euler-Maruyama simulation of the forward dynamics with uniform step
// h = horizon / num_steps, beta evaluated at the left endpoint of each step:
//   X <- X + 0.5 * Sigma^{-1} (mu - X) beta(t) h + sqrt(beta(t) h) z.
// Serves as the path-level oracle for the closed-form conditional marginal.
inline DiffusionPath simulate_forward_em(const DiffusionSpec& spec, std::span<const double> x0,
                                         std::span<const double> mu, int num_steps, Rng& rng) {
  const std::size_t n = static_cast<std::size_t>(spec.dim);
  if (x0.size() != n || mu.size() != n) throw std::invalid_argument("simulate_forward_em: dimension mismatch");
  if (num_steps < 1) throw std::invalid_argument("simulate_forward_em: num_steps must be >= 1");
  const double h = spec.schedule.horizon / num_steps;
  DiffusionPath path;
  path.seed = rng.seed();
  path.times.reserve(num_steps + 1);
  path.states.reserve(num_steps + 1);
  Vec x(x0.begin(), x0.end());
  path.times.push_back(0.0);
  path.states.push_back(x);
  for (int k = 0; k < num_steps; ++k) {
    const double t = k * h;
    const double beta = beta_at(spec.schedule, t);
    const double noise_sd = std::sqrt(beta * h);
    for (std::size_t i = 0; i < n; ++i)
      x[i] += 0.5 / spec.sigma_diag[i] * (mu[i] - x[i]) * beta * h + noise_sd * rng.normal();
    path.times.push_back((k + 1) * h);
    path.states.push_back(x);
  }
  return path;
}

// Log-density of the conditional law of the diffused state given x0.
inline double conditional_log_density(const DiffusionSpec& spec, std::span<const double> x_t,
                                      std::span<const double> x0, std::span<const double> mu, double t) {
  if (!(t > 0.0)) throw std::domain_error("conditional_log_density: t must be positive");
  const ConditionalMarginal m = marginal_params(spec, x0, mu, t);
  double lp = 0.0;
  for (std::size_t i = 0; i < m.mean_rho.size(); ++i) {
    const double d = x_t[i] - m.mean_rho[i];
    lp += -0.5 * std::log(2.0 * std::numbers::pi * m.var_diag[i]) - 0.5 * d * d / m.var_diag[i];
  }
  return lp;
}

// Gradient of the conditional log-density: -lambda^{-1} (x_t - rho).
inline Vec conditional_score(const DiffusionSpec& spec, std::span<const double> x_t,
                             std::span<const double> x0, std::span<const double> mu, double t) {
  if (!(t > 0.0)) throw std::domain_error("conditional_score: t must be positive (variance degenerates)");
  const ConditionalMarginal m = marginal_params(spec, x0, mu, t);
  if (x_t.size() != m.mean_rho.size()) throw std::invalid_argument("conditional_score: dimension mismatch");
  Vec out(m.mean_rho.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = -(x_t[i] - m.mean_rho[i]) / m.var_diag[i];
  return out;
}

// Finite Gaussian mixture standing in for the data distribution in tests and
// benchmarks. Diagonal component covariances keep the diffused mixture in
// closed form.
struct MixturePrior {
  Vec weights;
  std::vector<Vec> means;
  std::vector<Vec> var_diag_components;

  std::size_t components() const { return weights.size(); }
  int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
};

inline void validate(const MixturePrior& p) {
  if (p.weights.empty()) throw std::invalid_argument("MixturePrior: empty mixture");
  if (p.means.size() != p.weights.size() || p.var_diag_components.size() != p.weights.size())
    throw std::invalid_argument("MixturePrior: component count mismatch");
  double sum = 0.0;
  for (double w : p.weights) {
    if (w < 0.0) throw std::domain_error("MixturePrior: negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw std::domain_error("MixturePrior: weights must sum to 1");
  for (std::size_t k = 0; k < p.components(); ++k) {
    if (p.means[k].size() != p.means[0].size() || p.var_diag_components[k].size() != p.means[0].size())
      throw std::invalid_argument("MixturePrior: ragged components");
    for (double v : p.var_diag_components[k])
      if (v < 0.0) throw std::domain_error("MixturePrior: negative component variance");
  }
}

// Diffused parameters of mixture component k at time t: the component mean
// follows the conditional-mean contraction and its variance picks up the
// accumulated noise, var_i = lambda_i + e^{-B/s_i} v_i.
struct DiffusedComponent {
  Vec mean;
  Vec var;
};

inline DiffusedComponent diffused_component(const MixturePrior& prior, const DiffusionSpec& spec,
                                            std::span<const double> mu, double t, std::size_t k) {
  const ConditionalMarginal m = marginal_params(spec, prior.means[k], mu, t);
  DiffusedComponent out;
  out.mean = m.mean_rho;
  out.var.resize(m.var_diag.size());
  const double big_b = beta_integral(spec.schedule, 0.0, t);
  for (std::size_t i = 0; i < out.var.size(); ++i) {
    const double s = spec.sigma_diag[i];
    out.var[i] = m.var_diag[i] + std::exp(-big_b / s) * prior.var_diag_components[k][i];
  }
  return out;
}

// Log-density of the diffused mixture at (x, t), log-sum-exp stabilized.
inline double mixture_log_density(const MixturePrior& prior, const DiffusionSpec& spec,
                                  std::span<const double> mu, std::span<const double> x, double t) {
  if (!(t > 0.0)) throw std::domain_error("mixture_log_density: t must be positive");
  const std::size_t kk = prior.components();
  Vec logs(kk);
  double lmax = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < kk; ++k) {
    const DiffusedComponent c = diffused_component(prior, spec, mu, t, k);
    double lp = std::log(prior.weights[k]);
    for (std::size_t i = 0; i < c.mean.size(); ++i) {
      const double d = x[i] - c.mean[i];
      lp += -0.5 * std::log(2.0 * std::numbers::pi * c.var[i]) - 0.5 * d * d / c.var[i];
    }
    logs[k] = lp;
    lmax = std::max(lmax, lp);
  }
  double acc = 0.0;
  for (double lp : logs) acc += std::exp(lp - lmax);
  return lmax + std::log(acc);
}

// Exact gradient of the diffused-mixture log-density: responsibility-weighted
// sum of per-component Gaussian scores.
inline Vec mixture_score(const MixturePrior& prior, const DiffusionSpec& spec, std::span<const double> mu,
                         std::span<const double> x, double t) {
  if (!(t > 0.0)) throw std::domain_error("mixture_score: t must be positive (variance degenerates)");
  const std::size_t kk = prior.components();
  const std::size_t n = x.size();
  std::vector<DiffusedComponent> comps(kk);
  Vec logs(kk);
  double lmax = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < kk; ++k) {
    comps[k] = diffused_component(prior, spec, mu, t, k);
    double lp = std::log(prior.weights[k]);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x[i] - comps[k].mean[i];
      lp += -0.5 * std::log(2.0 * std::numbers::pi * comps[k].var[i]) - 0.5 * d * d / comps[k].var[i];
    }
    logs[k] = lp;
    lmax = std::max(lmax, lp);
  }
  double denom = 0.0;
  for (double lp : logs) denom += std::exp(lp - lmax);
  Vec score(n, 0.0);
  for (std::size_t k = 0; k < kk; ++k) {
    const double resp = std::exp(logs[k] - lmax) / denom;
    for (std::size_t i = 0; i < n; ++i) score[i] += resp * (-(x[i] - comps[k].mean[i]) / comps[k].var[i]);
  }
  return score;
}

// Row-wise score-model adapters. Each frame of the matrix evolves
// independently, so the analytic vector scores apply per row.

struct MixtureScoreModel {
  MixturePrior prior;
  DiffusionSpec spec;

  Matrix score(const Matrix& x, const Matrix& mu, double t) const {
    check_same_shape(x, mu, "MixtureScoreModel");
    Matrix out(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) out.set_row(i, mixture_score(prior, spec, mu.row(i), x.row(i), t));
    return out;
  }
};

// Score of the conditional law given a known initial state; rows of x0 pair
// with rows of the solver state.
struct ConditionalScoreModel {
  Matrix x0;
  DiffusionSpec spec;

  Matrix score(const Matrix& x, const Matrix& mu, double t) const {
    check_same_shape(x, mu, "ConditionalScoreModel");
    Matrix out(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i)
      out.set_row(i, conditional_score(spec, x.row(i), x0.row(i), mu.row(i), t));
    return out;
  }
};

}  // namespace difftts
