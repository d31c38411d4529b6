// Copyright (C) 2026 the difftts authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "difftts/matrix.hpp"
#include "difftts/rng.hpp"

namespace difftts {

// Monotonic surjective frame-to-token alignment, stored as the per-token
// frame counts. Monotonicity and surjectivity are implied by every duration
// being at least one.
struct Alignment {
  std::vector<int> durations;

  int num_tokens() const { return static_cast<int>(durations.size()); }
  int num_frames() const {
    int f = 0;
    for (int d : durations) f += d;
    return f;
  }

  // Token index (0-based) owning each frame.
  std::vector<int> frame_to_token() const {
    std::vector<int> map;
    map.reserve(num_frames());
    for (int i = 0; i < num_tokens(); ++i)
      for (int k = 0; k < durations[i]; ++k) map.push_back(i);
    return map;
  }

  bool operator==(const Alignment&) const = default;
};

inline void validate(const Alignment& a, int num_tokens, int num_frames) {
  if (a.num_tokens() != num_tokens) throw std::invalid_argument("Alignment: token count mismatch");
  for (int d : a.durations)
    if (d < 1) throw std::invalid_argument("Alignment: every token needs at least one frame");
  if (a.num_frames() != num_frames) throw std::invalid_argument("Alignment: durations must sum to frame count");
}

namespace detail {

// log N(y_j; mu_i, I) for all (token, frame) pairs.
inline Matrix frame_token_log_likelihood(const Matrix& mu_tilde, const Matrix& y) {
  if (mu_tilde.cols != y.cols) throw std::invalid_argument("alignment: feature dimension mismatch");
  const double norm_const = -0.5 * y.cols * std::log(2.0 * std::numbers::pi);
  Matrix ll(mu_tilde.rows, y.rows);
  for (int i = 0; i < mu_tilde.rows; ++i)
    for (int j = 0; j < y.rows; ++j) {
      double sq = 0.0;
      for (int c = 0; c < y.cols; ++c) {
        const double d = y(j, c) - mu_tilde(i, c);
        sq += d * d;
      }
      ll(i, j) = norm_const - 0.5 * sq;
    }
  return ll;
}

// Advance a composition of `frames` into positive parts to its lexicographic
// successor. Returns false after the last composition.
inline bool next_composition(std::vector<int>& d, int frames) {
  const int parts = static_cast<int>(d.size());
  int tail = 0;
  for (int i = parts - 2; i >= 0; --i) {
    tail += d[i + 1];
    if (tail > parts - 1 - i) {  // a spare frame exists right of i
      d[i] += 1;
      for (int k = i + 1; k < parts - 1; ++k) d[k] = 1;
      int used = 0;
      for (int k = 0; k < parts - 1; ++k) used += d[k];
      d[parts - 1] = frames - used;
      return true;
    }
  }
  return false;
}

}  // namespace detail

// Negative log-likelihood of the frames under the aligned encoder rows:
//   sum_j [ (n/2) log 2pi + 0.5 ||y_j - mu_A(j)||^2 ].
inline double encoder_loss(const Matrix& mu_tilde, const Matrix& y, const Alignment& a) {
  validate(a, mu_tilde.rows, y.rows);
  if (mu_tilde.cols != y.cols) throw std::invalid_argument("encoder_loss: feature dimension mismatch");
  const std::vector<int> map = a.frame_to_token();
  double loss = 0.0;
  for (int j = 0; j < y.rows; ++j) {
    loss += 0.5 * y.cols * std::log(2.0 * std::numbers::pi);
    const int i = map[j];
    for (int c = 0; c < y.cols; ++c) {
      const double d = y(j, c) - mu_tilde(i, c);
      loss += 0.5 * d * d;
    }
  }
  return loss;
}

// Monotonic alignment search. Maximizes the cumulative Gaussian
// log-likelihood over the token-frame lattice with two transitions per cell
// (stay on the token, advance to the next) and backtracks the argmax. On
// ties the backtrack prefers staying, which selects the optimum with the
// lexicographically smallest duration vector.
inline Alignment mas(const Matrix& mu_tilde, const Matrix& y) {
  const int tokens = mu_tilde.rows, frames = y.rows;
  if (tokens < 1 || frames < tokens) throw std::invalid_argument("mas: need frames >= tokens >= 1");
  const Matrix ll = detail::frame_token_log_likelihood(mu_tilde, y);
  const double ninf = -std::numeric_limits<double>::infinity();

  Matrix q(tokens, frames, ninf);
  q(0, 0) = ll(0, 0);
  for (int j = 1; j < frames; ++j) {
    const int imax = std::min(tokens - 1, j);
    for (int i = 0; i <= imax; ++i) {
      if (tokens - 1 - i > frames - 1 - j) continue;  // later tokens need a frame each
      const double stay = q(i, j - 1);
      const double advance = i > 0 ? q(i - 1, j - 1) : ninf;
      const double best = std::max(stay, advance);
      if (best == ninf) continue;
      q(i, j) = ll(i, j) + best;
    }
  }

  Alignment a;
  a.durations.assign(tokens, 1);  // one owned frame per token; stays add the rest
  int i = tokens - 1;
  for (int j = frames - 1; j > 0; --j) {
    const double stay = q(i, j - 1);
    const double advance = i > 0 ? q(i - 1, j - 1) : ninf;
    if (i > 0 && advance > stay)
      --i;
    else
      a.durations[i] += 1;
  }
  return a;
}

// Number of monotonic surjective alignments: (frames-1 choose tokens-1).
inline std::uint64_t composition_count(int frames, int tokens) {
  std::uint64_t c = 1;
  for (int k = 1; k <= tokens - 1; ++k) c = c * static_cast<std::uint64_t>(frames - tokens + k) / k;
  return c;
}

// Exhaustive-enumeration oracle for mas. Walks every composition of the
// frame count into positive token durations in lexicographic order, keeping
// strictly better candidates only, so ties resolve to the lexicographically
// smallest duration vector.
inline Alignment brute_force_alignment(const Matrix& mu_tilde, const Matrix& y,
                                       std::uint64_t cap = 1'000'000) {
  const int tokens = mu_tilde.rows, frames = y.rows;
  if (tokens < 1 || frames < tokens)
    throw std::invalid_argument("brute_force_alignment: need frames >= tokens >= 1");
  if (composition_count(frames, tokens) > cap)
    throw std::invalid_argument("brute_force_alignment: composition count exceeds cap");
  const Matrix ll = detail::frame_token_log_likelihood(mu_tilde, y);

  std::vector<int> dur(tokens, 1);
  dur[tokens - 1] = frames - (tokens - 1);
  std::vector<int> best;
  double best_score = -std::numeric_limits<double>::infinity();
  do {
    double score = 0.0;
    int j = 0;
    for (int i = 0; i < tokens; ++i)
      for (int k = 0; k < dur[i]; ++k) score += ll(i, j++);
    if (score > best_score) {
      best_score = score;
      best = dur;
    }
  } while (detail::next_composition(dur, frames));
  return Alignment{best};
}

// Log frame counts, the duration-predictor regression target.
inline Vec durations_from_alignment(const Alignment& a) {
  Vec d(a.durations.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::log(static_cast<double>(a.durations[i]));
  return d;
}

// Two-layer per-token regressor from encoded features to a predicted
// log-duration. Parameters live in one flat vector:
//   [w1 (hidden x dim), b1 (hidden), w2 (hidden), b2 (1)].
struct DurationPredictor {
  int dim = 0;
  int hidden = 0;
  Vec params;

  static int param_count(int dim, int hidden) { return hidden * dim + hidden + hidden + 1; }

  static DurationPredictor init(int dim, int hidden, Rng& rng) {
    DurationPredictor dp;
    dp.dim = dim;
    dp.hidden = hidden;
    dp.params.resize(param_count(dim, hidden));
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (double& p : dp.params) p = rng.uniform(-scale, scale);
    return dp;
  }

  // Predicted log-duration per token row.
  Vec predict(const Matrix& mu_tilde) const {
    if (mu_tilde.cols != dim) throw std::invalid_argument("DurationPredictor: feature dimension mismatch");
    const double* w1 = params.data();
    const double* b1 = w1 + hidden * dim;
    const double* w2 = b1 + hidden;
    const double b2 = *(w2 + hidden);
    Vec out(mu_tilde.rows);
    for (int r = 0; r < mu_tilde.rows; ++r) {
      double acc = b2;
      for (int h = 0; h < hidden; ++h) {
        double z = b1[h];
        for (int c = 0; c < dim; ++c) z += w1[h * dim + c] * mu_tilde(r, c);
        acc += w2[h] * std::tanh(z);
      }
      out[r] = acc;
    }
    return out;
  }

  // Accumulates d(loss)/d(params) given d(loss)/d(output) per token. The
  // predictor input is treated as a constant: no gradient flows back into
  // the encoder from here.
  void backward(const Matrix& mu_tilde, const Vec& dout, Vec& grad) const {
    if (grad.size() != params.size()) throw std::invalid_argument("DurationPredictor: gradient size mismatch");
    const double* w1 = params.data();
    const double* b1 = w1 + hidden * dim;
    const double* w2 = b1 + hidden;
    double* gw1 = grad.data();
    double* gb1 = gw1 + hidden * dim;
    double* gw2 = gb1 + hidden;
    double* gb2 = gw2 + hidden;
    for (int r = 0; r < mu_tilde.rows; ++r) {
      const double go = dout[r];
      *gb2 += go;
      for (int h = 0; h < hidden; ++h) {
        double z = b1[h];
        for (int c = 0; c < dim; ++c) z += w1[h * dim + c] * mu_tilde(r, c);
        const double a = std::tanh(z);
        gw2[h] += go * a;
        const double dz = go * w2[h] * (1.0 - a * a);
        gb1[h] += dz;
        for (int c = 0; c < dim; ++c) gw1[h * dim + c] += dz * mu_tilde(r, c);
      }
    }
  }
};

// Mean squared error between predicted and target log-durations.
inline double duration_loss(const Vec& predicted, const Vec& target) {
  if (predicted.size() != target.size()) throw std::invalid_argument("duration_loss: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - target[i];
    s += d * d;
  }
  return s / static_cast<double>(predicted.size());
}

inline double duration_loss(const DurationPredictor& dp, const Matrix& mu_tilde_detached, const Vec& target) {
  return duration_loss(dp.predict(mu_tilde_detached), target);
}

// Frame-wise feature sequence from per-token rows: row i repeated
// durations[i] times, in order.
inline Matrix expand_encoded(const Matrix& mu_tilde, const std::vector<int>& durations) {
  if (static_cast<int>(durations.size()) != mu_tilde.rows)
    throw std::invalid_argument("expand_encoded: duration count mismatch");
  int frames = 0;
  for (int d : durations) {
    if (d < 1) throw std::invalid_argument("expand_encoded: durations must be positive");
    frames += d;
  }
  Matrix out(frames, mu_tilde.cols);
  int j = 0;
  for (int i = 0; i < mu_tilde.rows; ++i)
    for (int k = 0; k < durations[i]; ++k) out.set_row(j++, mu_tilde.row(i));
  return out;
}

// Integer frame counts from predicted log-durations: round half up after
// tempo scaling, clamped to at least one frame per token (surjectivity).
inline std::vector<int> scale_durations(const Vec& log_durations, double factor) {
  if (!(factor > 0.0)) throw std::domain_error("scale_durations: factor must be positive");
  std::vector<int> out(log_durations.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double frames = factor * std::exp(log_durations[i]);
    out[i] = std::max(1, static_cast<int>(std::floor(frames + 0.5)));
  }
  return out;
}

}  // namespace difftts
