// Copyright (C) 2026 the difftts authors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "difftts/diffusion.hpp"
#include "difftts/sampler.hpp"
#include "difftts/stats.hpp"
#include "support.hpp"

using namespace difftts;

namespace {

// Gaussian data prior as a one-component mixture; its diffused score is
// analytic.
MixtureScoreModel gaussian_prior_model(double m, double v, const DiffusionSpec& spec) {
  MixturePrior prior;
  prior.weights = {1.0};
  prior.means = {{m}};
  prior.var_diag_components = {{v}};
  return MixtureScoreModel{prior, spec};
}

struct DriftCancelModel {
  Matrix score(const Matrix& x, const Matrix& mu, double) const {
    Matrix s(x.rows, x.cols);
    for (std::size_t i = 0; i < s.data.size(); ++i) s.data[i] = mu.data[i] - x.data[i];
    return s;
  }
};

struct NanAtModel {
  double bad_t = 0.5;
  Matrix score(const Matrix& x, const Matrix&, double t) const {
    Matrix s(x.rows, x.cols, 0.0);
    if (t < bad_t) s.data[0] = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
};

Vec column(const Matrix& m, int c) {
  Vec v(m.rows);
  for (int i = 0; i < m.rows; ++i) v[i] = m(i, c);
  return v;
}

}  // namespace

TEST_CASE("sample_terminal moments") {
  Rng rng(3);
  const Matrix mu(200, 4, 0.7);

  SECTION("very large tau collapses on mu") {
    Matrix x = sample_terminal(mu, 1e12, rng);
    CHECK(max_abs(x) <= 0.7 + 1e-5);
    for (double v : x.data) CHECK(v == Catch::Approx(0.7).margin(1e-5));
  }

  SECTION("per-entry variance is 1/tau") {
    const Matrix zero(500, 200, 0.0);
    for (double tau : {1.0, 1.5}) {
      Matrix x = sample_terminal(zero, tau, rng);
      CHECK(variance(x.data) == Catch::Approx(1.0 / tau).epsilon(0.02));
      CHECK(std::abs(mean(x.data)) < 3.0 / std::sqrt(tau * x.data.size()));
    }
  }

  SECTION("tau must be positive") {
    CHECK_THROWS_AS(sample_terminal(mu, 0.0, rng), std::domain_error);
    CHECK_THROWS_AS(sample_terminal(mu, -1.0, rng), std::domain_error);
  }
}

TEST_CASE("sample_terminal(mu, tau) matches mu + sample_terminal(0, tau) in distribution") {
  Rng r1(8), r2(9);
  const int draws = 60000;
  const Matrix mu(draws, 1, 1.3);
  const Matrix zero(draws, 1, 0.0);
  const double tau = 1.5;
  const Vec a = column(sample_terminal(mu, tau, r1), 0);
  Vec b = column(sample_terminal(zero, tau, r2), 0);
  for (double& v : b) v += 1.3;
  CHECK(std::abs(mean(a) - mean(b)) < 3.0 * std::sqrt(2.0 / (tau * draws)));
  CHECK(variance(a) == Catch::Approx(variance(b)).epsilon(0.03));
}

TEST_CASE("reverse ODE leaves x_T unchanged when the score cancels the drift") {
  const DiffusionSpec spec = DiffusionSpec::identity(3);
  Rng rng(21);
  Matrix mu(5, 3);
  rng.fill_normal(mu);
  Matrix x_t(5, 3);
  rng.fill_normal(x_t);
  SamplerConfig cfg;
  cfg.num_steps = 64;
  const Matrix out = solve_reverse_ode(DriftCancelModel{}, spec, mu, x_t, cfg);
  CHECK(out == x_t);
}

TEST_CASE("reverse ODE is deterministic") {
  const DiffusionSpec spec = DiffusionSpec::identity(1);
  const auto model = gaussian_prior_model(0.5, 0.25, spec);
  Rng rng(22);
  Matrix mu(10, 1, 0.0);
  Matrix x_t = sample_terminal(mu, 1.0, rng);
  SamplerConfig cfg;
  cfg.num_steps = 100;
  const Matrix a = solve_reverse_ode(model, spec, mu, x_t, cfg);
  const Matrix b = solve_reverse_ode(model, spec, mu, x_t, cfg);
  CHECK(a == b);
}

TEST_CASE("reverse ODE with the exact score recovers a Gaussian prior") {
  const DiffusionSpec spec = DiffusionSpec::identity(1);
  const double data_mean = 1.3, data_var = 0.49;
  const auto model = gaussian_prior_model(data_mean, data_var, spec);
  const int samples = 10000;
  Rng rng(23);
  const Matrix mu(samples, 1, 0.0);
  Matrix x_t = sample_terminal(mu, 1.0, rng);
  SamplerConfig cfg;
  cfg.num_steps = 1000;
  cfg.tau = 1.0;
  const Vec out = column(solve_reverse_ode(model, spec, mu, x_t, cfg), 0);
  CHECK(std::abs(mean(out) - data_mean) < 3.0 * std::sqrt(data_var / samples));
  CHECK(variance(out) == Catch::Approx(data_var).epsilon(0.05));
}

TEST_CASE("reverse SDE with the exact score recovers a Gaussian prior") {
  const DiffusionSpec spec = DiffusionSpec::identity(1);
  const double data_mean = -0.7, data_var = 0.36;
  const auto model = gaussian_prior_model(data_mean, data_var, spec);
  const int samples = 10000;
  Rng rng(24);
  const Matrix mu(samples, 1, 0.0);
  Matrix x_t = sample_terminal(mu, 1.0, rng);
  SamplerConfig cfg;
  cfg.num_steps = 1000;
  const Vec out = column(solve_reverse_sde(model, spec, mu, x_t, cfg, rng), 0);
  CHECK(std::abs(mean(out) - data_mean) < 3.0 * std::sqrt(data_var / samples));
  CHECK(variance(out) == Catch::Approx(data_var).epsilon(0.05));
}

TEST_CASE("reverse SDE with a frozen schedule returns x_T") {
  DiffusionSpec spec = DiffusionSpec::identity(1);
  spec.schedule = NoiseSchedule{0.0, 0.0, 1.0};
  Rng rng(25);
  Matrix mu(4, 1, 0.0), x_t(4, 1);
  rng.fill_normal(x_t);
  SamplerConfig cfg;
  cfg.num_steps = 32;
  const auto model = gaussian_prior_model(0.0, 1.0, spec);
  const Matrix out = solve_reverse_sde(model, spec, mu, x_t, cfg, rng);
  CHECK(out == x_t);
}

TEST_CASE("two SDE seeds differ pointwise but agree in distribution") {
  const DiffusionSpec spec = DiffusionSpec::identity(1);
  const auto model = gaussian_prior_model(0.4, 0.25, spec);
  const int samples = 10000;
  SamplerConfig cfg;
  cfg.num_steps = 400;
  Rng ra(31), rb(32);
  const Matrix mu(samples, 1, 0.0);
  Matrix xa = sample_terminal(mu, 1.0, ra);
  Matrix xb = sample_terminal(mu, 1.0, rb);
  const Vec a = column(solve_reverse_sde(model, spec, mu, xa, cfg, ra), 0);
  const Vec b = column(solve_reverse_sde(model, spec, mu, xb, cfg, rb), 0);
  CHECK(a != b);
  const double se_mean = std::sqrt(variance(a) / samples + variance(b) / samples);
  CHECK(std::abs(mean(a) - mean(b)) < 3.0 * se_mean);
  CHECK(variance(a) == Catch::Approx(variance(b)).epsilon(0.08));
}

TEST_CASE("ODE and SDE marginals agree for a mixture prior") {
  const DiffusionSpec spec = DiffusionSpec::identity(1);
  MixturePrior prior;
  prior.weights = {0.4, 0.6};
  prior.means = {{-2.0}, {2.0}};
  prior.var_diag_components = {{0.09}, {0.16}};
  const MixtureScoreModel model{prior, spec};
  const int samples = 8000;
  SamplerConfig cfg;
  cfg.num_steps = 500;
  Rng rng(33);
  const Matrix mu(samples, 1, 0.0);
  Matrix x_ode = sample_terminal(mu, 1.0, rng);
  Matrix x_sde = sample_terminal(mu, 1.0, rng);
  const Vec ode = column(solve_reverse_ode(model, spec, mu, x_ode, cfg), 0);
  const Vec sde = column(solve_reverse_sde(model, spec, mu, x_sde, cfg, rng), 0);
  const double se_mean = std::sqrt(variance(ode) / samples + variance(sde) / samples);
  CHECK(std::abs(mean(ode) - mean(sde)) < 3.0 * se_mean);
  Vec ode2(ode), sde2(sde);
  for (double& v : ode2) v *= v;
  for (double& v : sde2) v *= v;
  const double se_m2 = std::sqrt(variance(ode2) / samples + variance(sde2) / samples);
  CHECK(std::abs(mean(ode2) - mean(sde2)) < 3.0 * se_m2);
}

TEST_CASE("non-finite scores raise a numerical failure naming t") {
  const DiffusionSpec spec = DiffusionSpec::identity(1);
  const Matrix mu(2, 1, 0.0), x_t(2, 1, 1.0);
  SamplerConfig cfg;
  cfg.num_steps = 10;
  CHECK_THROWS_AS(solve_reverse_ode(NanAtModel{}, spec, mu, x_t, cfg), NumericalError);
  try {
    solve_reverse_ode(NanAtModel{}, spec, mu, x_t, cfg);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("t=") != std::string::npos);
  }
  Rng rng(40);
  CHECK_THROWS_AS(solve_reverse_sde(NanAtModel{}, spec, mu, x_t, cfg, rng), NumericalError);
}

TEST_CASE("log-likelihood machinery against the Gaussian closed form") {
  const DiffusionSpec spec = DiffusionSpec::identity(2);
  MixturePrior prior;
  prior.weights = {1.0};
  prior.means = {{0.8, -0.5}};
  prior.var_diag_components = {{0.49, 0.49}};
  const MixtureScoreModel model{prior, spec};

  Rng rng(55);
  const int frames = 3;
  // the data prior sits at mu, so the terminal condition is exact up to the
  // e^{-B} variance remainder and the error budget is discretization + probes
  Matrix x0(frames, 2), mu(frames, 2);
  for (int j = 0; j < frames; ++j)
    for (int c = 0; c < 2; ++c) {
      mu(j, c) = prior.means[0][c];
      x0(j, c) = prior.means[0][c] + std::sqrt(0.49) * rng.normal();
    }

  double closed = 0.0;
  for (int j = 0; j < frames; ++j)
    closed += gaussian_log_density(x0.row(j), prior.means[0], prior.var_diag_components[0]);

  SECTION("Gaussian probes match within three standard errors") {
    const auto est = log_likelihood(model, spec, mu, x0, 2000, 32, rng, ProbeKind::gaussian);
    CHECK(est.num_probes == 32);
    CHECK(est.std_error > 0.0);
    CHECK(std::abs(est.value - closed) < 3.0 * est.std_error);
  }

  SECTION("Rademacher probes hit the closed form to solver accuracy") {
    // The Jacobian of the Gaussian flow is diagonal, so Rademacher probes
    // are exact and the error budget is discretization only.
    const auto est = log_likelihood(model, spec, mu, x0, 2000, 4, rng, ProbeKind::rademacher);
    CHECK(est.std_error < 1e-8);
    CHECK(std::abs(est.value - closed) < 0.01);
  }

  SECTION("standard error shrinks roughly as 1/sqrt(probes)") {
    const auto est8 = log_likelihood(model, spec, mu, x0, 400, 8, rng, ProbeKind::gaussian);
    const auto est128 = log_likelihood(model, spec, mu, x0, 400, 128, rng, ProbeKind::gaussian);
    CHECK(est128.std_error < est8.std_error);
    const double ratio = est8.std_error / est128.std_error;
    CHECK(ratio > 2.0);
    CHECK(ratio < 8.0);
    CHECK(std::abs(est8.value - est128.value) < 3.0 * (est8.std_error + est128.std_error));
  }

  SECTION("validation") {
    CHECK_THROWS_AS(log_likelihood(model, spec, mu, x0, 0, 8, rng), std::invalid_argument);
    CHECK_THROWS_AS(log_likelihood(model, spec, mu, x0, 100, 0, rng), std::invalid_argument);
    DiffusionSpec bad = spec;
    bad.sigma_diag = {2.0, 2.0};
    CHECK_THROWS_AS(log_likelihood(model, bad, mu, x0, 100, 8, rng), std::domain_error);
  }
}

TEST_CASE("sampler config validation") {
  SamplerConfig cfg;
  cfg.num_steps = 0;
  CHECK_THROWS_AS(validate(cfg), std::domain_error);
  cfg.num_steps = 10;
  cfg.tau = 0.0;
  CHECK_THROWS_AS(validate(cfg), std::domain_error);
}
