// Copyright (C) 2026 the difftts authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cmath>
#include <vector>

#include "difftts/diffusion.hpp"
#include "difftts/sampler.hpp"
#include "difftts/stats.hpp"
#include "difftts/tts.hpp"

namespace difftts {

// One benchmark cell: a step count with its error and wall-clock statistics
// over repetitions.
struct BenchRow {
  int steps = 0;
  int samples = 0;
  int reps = 0;
  double mean_error = 0.0;
  double sd_error = 0.0;
  double mean_ms_per_sample = 0.0;
  double sd_ms_per_sample = 0.0;
};

namespace detail {

inline Vec column_zero(const Matrix& m) {
  Vec v(m.rows);
  for (int i = 0; i < m.rows; ++i) v[i] = m(i, 0);
  return v;
}

inline BenchRow summarize(int steps, int samples, const Vec& errors, const Vec& ms) {
  BenchRow row;
  row.steps = steps;
  row.samples = samples;
  row.reps = static_cast<int>(errors.size());
  row.mean_error = mean(errors);
  row.sd_error = errors.size() > 1 ? std::sqrt(variance(errors)) : 0.0;
  row.mean_ms_per_sample = mean(ms);
  row.sd_ms_per_sample = ms.size() > 1 ? std::sqrt(variance(ms)) : 0.0;
  return row;
}

}  // namespace detail

// Speed-vs-quality sweep with the analytic mixture score on a 1D prior.
// Error is the Wasserstein-1 distance between the generated samples and true
// data, by sorted-sample comparison. The terminal draws are shared across
// step counts within each repetition, so the error column isolates
// discretization.
//
// With reference_steps = 0 the true side is the exact prior quantile
// function. A positive reference_steps instead compares against a true-data
// sample produced by the converged solver from the same terminal draws
// (common random numbers); that removes the empirical-W1 noise floor, which
// otherwise drowns the small discretization gaps at large N.
inline std::vector<BenchRow> bench_steps_analytic(const MixturePrior& prior, const DiffusionSpec& spec,
                                                  const std::vector<int>& step_list, int reps, int samples,
                                                  SamplerMode mode, const Rng& root,
                                                  int reference_steps = 0) {
  validate(prior);
  Vec weights = prior.weights, means(prior.components()), vars(prior.components());
  for (std::size_t k = 0; k < prior.components(); ++k) {
    means[k] = prior.means[k][0];
    vars[k] = prior.var_diag_components[k][0];
  }
  const MixtureScoreModel model{prior, spec};
  const Matrix mu(samples, 1, 0.0);
  const auto quantile = [&](double q) { return mixture_quantile_1d(q, weights, means, vars); };

  const auto solve = [&](Matrix x_t, int steps, int rep) {
    SamplerConfig cfg;
    cfg.num_steps = steps;
    cfg.tau = 1.0;
    cfg.mode = mode;
    if (mode == SamplerMode::ode) return solve_reverse_ode(model, spec, mu, std::move(x_t), cfg);
    Rng path_rng = root.derive(5000 + static_cast<std::uint64_t>(rep) * 101 + static_cast<std::uint64_t>(steps));
    return solve_reverse_sde(model, spec, mu, std::move(x_t), cfg, path_rng);
  };

  std::vector<std::vector<double>> reference(reps);
  if (reference_steps > 0) {
    for (int rep = 0; rep < reps; ++rep) {
      Rng terminal_rng = root.derive(1000 + rep);
      Matrix out = solve(sample_terminal(mu, 1.0, terminal_rng), reference_steps, rep);
      reference[rep] = detail::column_zero(out);
      std::sort(reference[rep].begin(), reference[rep].end());
    }
  }

  std::vector<BenchRow> rows;
  for (int steps : step_list) {
    Vec errors, ms;
    for (int rep = 0; rep < reps; ++rep) {
      Rng terminal_rng = root.derive(1000 + rep);
      Matrix x_t = sample_terminal(mu, 1.0, terminal_rng);
      const auto start = std::chrono::steady_clock::now();
      const Matrix out = solve(std::move(x_t), steps, rep);
      const auto stop = std::chrono::steady_clock::now();
      Vec values = detail::column_zero(out);
      if (reference_steps > 0) {
        std::sort(values.begin(), values.end());
        double acc = 0.0;
        for (int i = 0; i < samples; ++i) acc += std::abs(values[i] - reference[rep][i]);
        errors.push_back(acc / samples);
      } else {
        errors.push_back(w1_sorted_vs_quantiles(std::move(values), quantile));
      }
      ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count() / samples);
    }
    rows.push_back(detail::summarize(steps, samples, errors, ms));
  }
  return rows;
}

// Speed-vs-quality sweep on a trained model: error is the per-frame RMS
// deviation of inferred features from the owning token's corpus pattern,
// averaged over `samples` inferences per repetition.
inline std::vector<BenchRow> bench_steps_model(const TtsModel& model, const SyntheticCorpus& corpus,
                                               const std::vector<int>& step_list, int reps, int samples,
                                               SamplerMode mode, double tau, const Rng& root) {
  std::vector<BenchRow> rows;
  for (int steps : step_list) {
    Vec errors, ms;
    for (int rep = 0; rep < reps; ++rep) {
      Rng rep_rng = root.derive(2000 + rep);
      double err_acc = 0.0, ms_acc = 0.0;
      for (int s = 0; s < samples; ++s) {
        const CorpusItem& item =
            corpus.items[rep_rng.uniform_int(0, static_cast<int>(corpus.items.size()) - 1)];
        SamplerConfig cfg;
        cfg.num_steps = steps;
        cfg.tau = tau;
        cfg.mode = mode;
        const Matrix mu_tilde = model.encoder.encode(item.tokens);
        const std::vector<int> durations = scale_durations(model.dur.predict(mu_tilde), 1.0);
        Rng sample_rng = rep_rng.derive(static_cast<std::uint64_t>(s));
        const auto start = std::chrono::steady_clock::now();
        const Matrix out = infer(model, item.tokens, cfg, 1.0, sample_rng);
        const auto stop = std::chrono::steady_clock::now();
        err_acc += pattern_rms_error(out, durations, item.tokens, corpus.patterns);
        ms_acc += std::chrono::duration<double, std::milli>(stop - start).count();
      }
      errors.push_back(err_acc / samples);
      ms.push_back(ms_acc / samples);
    }
    rows.push_back(detail::summarize(steps, samples, errors, ms));
  }
  return rows;
}

// R^2 of the affine fit of wall-clock per sample against the step count.
inline double bench_timing_r2(const std::vector<BenchRow>& rows) {
  Vec x, y;
  for (const BenchRow& r : rows) {
    x.push_back(static_cast<double>(r.steps));
    y.push_back(r.mean_ms_per_sample);
  }
  return linear_fit(x, y).r2;
}

}  // namespace difftts
