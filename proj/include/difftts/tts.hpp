// Copyright (C) 2026 the difftts authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "difftts/align.hpp"
#include "difftts/matrix.hpp"
#include "difftts/rng.hpp"
#include "difftts/sampler.hpp"
#include "difftts/schedule.hpp"
#include "difftts/scorenet.hpp"

namespace difftts {

using TokenSequence = std::vector<int>;

// Embedding table plus a per-token affine transform producing the encoded
// rows. Parameters in one flat vector: [embedding (vocab x dim) | W (dim x
// dim) | b (dim)]. The transform starts at identity so the initial encoding
// is the raw embedding.
struct TokenEncoder {
  int vocab = 0;
  int dim = 0;
  Vec params;

  static int param_count(int vocab, int dim) { return vocab * dim + dim * dim + dim; }

  static TokenEncoder init(int vocab, int dim, Rng& rng) {
    TokenEncoder enc;
    enc.vocab = vocab;
    enc.dim = dim;
    enc.params.assign(static_cast<std::size_t>(param_count(vocab, dim)), 0.0);
    for (int k = 0; k < vocab * dim; ++k) enc.params[k] = 0.1 * rng.normal();
    for (int c = 0; c < dim; ++c) enc.params[vocab * dim + c * dim + c] = 1.0;
    return enc;
  }

  Matrix encode(std::span<const int> tokens) const {
    if (tokens.empty()) throw std::invalid_argument("TokenEncoder: empty token sequence");
    const double* emb = params.data();
    const double* w = emb + vocab * dim;
    const double* b = w + dim * dim;
    Matrix out(static_cast<int>(tokens.size()), dim);
    for (std::size_t r = 0; r < tokens.size(); ++r) {
      const int id = tokens[r];
      if (id < 0 || id >= vocab) throw std::invalid_argument("TokenEncoder: unknown token id");
      const double* e = emb + static_cast<std::size_t>(id) * dim;
      for (int o = 0; o < dim; ++o) {
        double z = b[o];
        for (int c = 0; c < dim; ++c) z += w[o * dim + c] * e[c];
        out(static_cast<int>(r), o) = z;
      }
    }
    return out;
  }

  // Accumulates d(loss)/d(params) given d(loss)/d(encoded rows).
  void backward(std::span<const int> tokens, const Matrix& dmu_tilde, Vec& grad) const {
    if (grad.size() != params.size()) throw std::invalid_argument("TokenEncoder: gradient size mismatch");
    const double* emb = params.data();
    const double* w = emb + vocab * dim;
    double* gemb = grad.data();
    double* gw = gemb + vocab * dim;
    double* gb = gw + dim * dim;
    for (std::size_t r = 0; r < tokens.size(); ++r) {
      const int id = tokens[r];
      const double* e = emb + static_cast<std::size_t>(id) * dim;
      for (int o = 0; o < dim; ++o) {
        const double g = dmu_tilde(static_cast<int>(r), o);
        gb[o] += g;
        for (int c = 0; c < dim; ++c) {
          gw[o * dim + c] += g * e[c];
          gemb[static_cast<std::size_t>(id) * dim + c] += g * w[o * dim + c];
        }
      }
    }
  }
};

// Recipe for the synthetic corpus: every vocabulary symbol owns a fixed
// target pattern row and a ground-truth duration; features are patterns
// repeated per duration plus observation noise.
struct CorpusRecipe {
  int vocab = 12;
  int dim = 8;
  double noise = 0.1;
  // Sequences long enough that alignment is genuinely ambiguous at
  // initialization; short ones let the diffusion loss alone align them.
  int min_tokens = 10;
  int max_tokens = 16;
  int min_duration = 2;
  int max_duration = 6;
  std::uint64_t pattern_seed = 1234;
};

inline void validate(const CorpusRecipe& r) {
  if (r.vocab < 2) throw std::domain_error("CorpusRecipe: vocab must be >= 2");
  if (r.dim < 1) throw std::domain_error("CorpusRecipe: dim must be >= 1");
  if (r.noise < 0.0) throw std::domain_error("CorpusRecipe: noise must be nonnegative");
  if (r.min_tokens < 1 || r.max_tokens < r.min_tokens)
    throw std::domain_error("CorpusRecipe: invalid token-count range");
  if (r.min_duration < 1 || r.max_duration < r.min_duration)
    throw std::domain_error("CorpusRecipe: invalid duration range");
}

struct CorpusItem {
  TokenSequence tokens;
  Matrix features;
};

struct SyntheticCorpus {
  CorpusRecipe recipe;
  Matrix patterns;                    // vocab x dim
  std::vector<int> symbol_durations;  // ground truth, evaluation only
  std::vector<CorpusItem> items;
  std::uint64_t seed = 0;

  std::vector<int> true_durations(const TokenSequence& tokens) const {
    std::vector<int> d(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) d[i] = symbol_durations[tokens[i]];
    return d;
  }
};

// Reproducible synthetic corpus. Patterns and per-symbol durations depend
// only on recipe.pattern_seed, so corpora with different noise or item seeds
// share the same ground truth.
inline SyntheticCorpus gen_corpus(const CorpusRecipe& recipe, int size, Rng& rng) {
  validate(recipe);
  if (size < 1) throw std::invalid_argument("gen_corpus: size must be >= 1");
  SyntheticCorpus corpus;
  corpus.recipe = recipe;
  corpus.seed = rng.seed();

  Rng pattern_rng(recipe.pattern_seed);
  corpus.patterns = Matrix(recipe.vocab, recipe.dim);
  pattern_rng.fill_normal(corpus.patterns);
  corpus.symbol_durations.resize(recipe.vocab);
  for (int v = 0; v < recipe.vocab; ++v)
    corpus.symbol_durations[v] = pattern_rng.uniform_int(recipe.min_duration, recipe.max_duration);

  corpus.items.reserve(size);
  for (int it = 0; it < size; ++it) {
    CorpusItem item;
    const int len = rng.uniform_int(recipe.min_tokens, recipe.max_tokens);
    item.tokens.resize(len);
    // No adjacent duplicates: a boundary between identical neighbors would
    // leave the ground-truth durations unidentifiable from the features.
    int prev = -1;
    for (int& id : item.tokens) {
      do {
        id = rng.uniform_int(0, recipe.vocab - 1);
      } while (id == prev);
      prev = id;
    }
    int frames = 0;
    for (int id : item.tokens) frames += corpus.symbol_durations[id];
    item.features = Matrix(frames, recipe.dim);
    int j = 0;
    for (int id : item.tokens)
      for (int k = 0; k < corpus.symbol_durations[id]; ++k, ++j)
        for (int c = 0; c < recipe.dim; ++c)
          item.features(j, c) = corpus.patterns(id, c) + recipe.noise * rng.normal();
    corpus.items.push_back(std::move(item));
  }
  return corpus;
}

struct TrainConfig {
  double lr = 1e-4;
  int batch = 16;
  int segment_frames = 32;
  int iters = 4000;
  double enc_weight = 1.0;
  double dp_weight = 1.0;
  double diff_weight = 1.0;
  double t_min_frac = 1e-5;  // clamp: t uniform on (t_min_frac * horizon, horizon]
  std::uint64_t seed = 0;
};

inline void validate(const TrainConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw std::domain_error("TrainConfig: lr must be positive");
  if (cfg.batch < 1) throw std::domain_error("TrainConfig: batch must be >= 1");
  if (cfg.segment_frames < 1) throw std::domain_error("TrainConfig: segment_frames must be >= 1");
  if (cfg.iters < 0) throw std::domain_error("TrainConfig: iters must be nonnegative");
  if (cfg.enc_weight < 0.0 || cfg.dp_weight < 0.0 || cfg.diff_weight < 0.0)
    throw std::domain_error("TrainConfig: loss weights must be nonnegative");
}

// The three jointly trained components plus the diffusion spec they share.
struct TtsModel {
  DiffusionSpec spec;
  TokenEncoder encoder;
  DurationPredictor dur;
  ToyScoreNet score_net;
};

struct ModelArch {
  int vocab = 12;
  int dim = 8;
  std::vector<int> score_hidden = {64, 64};
  int time_dim = 8;
  int dp_hidden = 16;
};

inline TtsModel make_model(const ModelArch& arch, NoiseSchedule schedule, Rng& rng) {
  TtsModel m;
  m.spec = DiffusionSpec::identity(arch.dim, schedule);
  Rng enc_rng = rng.derive(1), dp_rng = rng.derive(2), net_rng = rng.derive(3);
  m.encoder = TokenEncoder::init(arch.vocab, arch.dim, enc_rng);
  m.dur = DurationPredictor::init(arch.dim, arch.dp_hidden, dp_rng);
  ScoreNetArch sa;
  sa.dim = arch.dim;
  sa.hidden = arch.score_hidden;
  sa.time_dim = arch.time_dim;
  m.score_net = ToyScoreNet::init(sa, net_rng);
  return m;
}

inline Matrix encode(const TtsModel& model, const TokenSequence& tokens) {
  return model.encoder.encode(tokens);
}

// --- joint parameter vector: [encoder | duration predictor | score net] ---

inline std::size_t total_params(const TtsModel& m) {
  return m.encoder.params.size() + m.dur.params.size() + m.score_net.params.size();
}

inline Vec gather_params(const TtsModel& m) {
  Vec p;
  p.reserve(total_params(m));
  p.insert(p.end(), m.encoder.params.begin(), m.encoder.params.end());
  p.insert(p.end(), m.dur.params.begin(), m.dur.params.end());
  p.insert(p.end(), m.score_net.params.begin(), m.score_net.params.end());
  return p;
}

inline void scatter_params(TtsModel& m, const Vec& p) {
  if (p.size() != total_params(m)) throw std::invalid_argument("scatter_params: size mismatch");
  std::size_t off = 0;
  std::copy_n(p.begin() + off, m.encoder.params.size(), m.encoder.params.begin());
  off += m.encoder.params.size();
  std::copy_n(p.begin() + off, m.dur.params.size(), m.dur.params.begin());
  off += m.dur.params.size();
  std::copy_n(p.begin() + off, m.score_net.params.size(), m.score_net.params.begin());
}

// --- training -------------------------------------------------------------

// Everything one optimization step needs that must stay frozen while the
// step's losses and gradients are evaluated: the MAS alignment, the
// duration targets, the detached encoder output fed to the duration
// predictor, and the segment/time/noise draws for the diffusion term.
struct PlanItem {
  TokenSequence tokens;
  Matrix y;
  Alignment alignment;
  Vec d_target;              // log frame counts from the alignment
  Matrix mu_tilde_detached;  // duration-predictor input, treated as constant
  int seg_offset = 0;
  int seg_frames = 0;
  double t = 0.0;
  Matrix xi;
};

struct TrainPlan {
  std::vector<PlanItem> items;
};

struct LossReport {
  double enc = 0.0;   // per frame element
  double dp = 0.0;    // per token
  double diff = 0.0;  // per frame
  double total(const TrainConfig& cfg) const {
    return cfg.enc_weight * enc + cfg.dp_weight * dp + cfg.diff_weight * diff;
  }
};

inline TrainPlan make_train_plan(const TtsModel& model, const SyntheticCorpus& corpus,
                                 std::span<const int> item_indices, const TrainConfig& cfg, Rng& rng) {
  TrainPlan plan;
  plan.items.reserve(item_indices.size());
  const double t_min = cfg.t_min_frac * model.spec.schedule.horizon;
  for (int idx : item_indices) {
    const CorpusItem& it = corpus.items.at(static_cast<std::size_t>(idx));
    PlanItem p;
    p.tokens = it.tokens;
    p.y = it.features;
    const Matrix mu_tilde = model.encoder.encode(p.tokens);
    p.alignment = mas(mu_tilde, p.y);
    p.d_target = durations_from_alignment(p.alignment);
    p.mu_tilde_detached = mu_tilde;
    const int frames = p.y.rows;
    p.seg_frames = std::min(cfg.segment_frames, frames);
    p.seg_offset = frames > p.seg_frames ? rng.uniform_int(0, frames - p.seg_frames) : 0;
    p.t = rng.uniform(t_min, model.spec.schedule.horizon);
    p.xi = Matrix(p.seg_frames, model.spec.dim);
    rng.fill_normal(p.xi);
    plan.items.push_back(std::move(p));
  }
  return plan;
}

namespace detail {

inline Matrix segment_rows(const Matrix& m, int offset, int count) {
  Matrix out(count, m.cols);
  for (int r = 0; r < count; ++r) out.set_row(r, m.row(offset + r));
  return out;
}

inline TrainBatch plan_diffusion_batch(const TtsModel& model, const TrainPlan& plan) {
  TrainBatch batch;
  for (const PlanItem& p : plan.items) {
    const Matrix mu_tilde = model.encoder.encode(p.tokens);
    const Matrix mu_full = expand_encoded(mu_tilde, p.alignment.durations);
    batch.x0.push_back(segment_rows(p.y, p.seg_offset, p.seg_frames));
    batch.mu.push_back(segment_rows(mu_full, p.seg_offset, p.seg_frames));
    batch.xi.push_back(p.xi);
    batch.t.push_back(p.t);
  }
  return batch;
}

}  // namespace detail

// Loss terms of the summed objective for a frozen plan. The encoder term is
// normalized per frame element, the duration term per token, the diffusion
// term per frame.
inline LossReport eval_objective(const TtsModel& model, const TrainPlan& plan) {
  LossReport report;
  const std::size_t b = plan.items.size();
  for (const PlanItem& p : plan.items) {
    const Matrix mu_tilde = model.encoder.encode(p.tokens);
    report.enc += encoder_loss(mu_tilde, p.y, p.alignment) / (p.y.rows * p.y.cols);
    report.dp += duration_loss(model.dur, p.mu_tilde_detached, p.d_target);
  }
  report.enc /= static_cast<double>(b);
  report.dp /= static_cast<double>(b);
  const TrainBatch batch = detail::plan_diffusion_batch(model, plan);
  report.diff = diffusion_loss(model.score_net, batch, model.spec);
  return report;
}

// Loss terms plus the exact gradient of the weighted objective with respect
// to the joint parameter vector. By the stop-gradient contract the duration
// loss contributes nothing to the encoder section.
inline std::pair<LossReport, Vec> eval_gradients(const TtsModel& model, const TrainPlan& plan,
                                                 const TrainConfig& cfg) {
  const std::size_t b = plan.items.size();
  LossReport report;
  Vec grad(total_params(model), 0.0);
  const std::size_t enc_off = 0;
  const std::size_t dp_off = model.encoder.params.size();
  const std::size_t net_off = dp_off + model.dur.params.size();

  Vec enc_grad(model.encoder.params.size(), 0.0);
  Vec dp_grad(model.dur.params.size(), 0.0);

  // Diffusion term over all segments at once; mu gradients flow back to the
  // encoder through the expansion.
  const TrainBatch batch = detail::plan_diffusion_batch(model, plan);
  DiffusionLossGrads diff = diffusion_loss_backward(model.score_net, batch, model.spec, true);
  report.diff = diff.loss;
  for (std::size_t k = 0; k < diff.param_grad.size(); ++k)
    grad[net_off + k] += cfg.diff_weight * diff.param_grad[k];

  for (std::size_t i = 0; i < b; ++i) {
    const PlanItem& p = plan.items[i];
    const Matrix mu_tilde = model.encoder.encode(p.tokens);
    const std::vector<int> frame_token = p.alignment.frame_to_token();

    // encoder loss and its gradient into the encoded rows
    report.enc += encoder_loss(mu_tilde, p.y, p.alignment) / (p.y.rows * p.y.cols);
    Matrix dmu_tilde(mu_tilde.rows, mu_tilde.cols, 0.0);
    const double enc_scale = cfg.enc_weight / (static_cast<double>(b) * p.y.rows * p.y.cols);
    for (int j = 0; j < p.y.rows; ++j) {
      const int tok = frame_token[j];
      for (int c = 0; c < p.y.cols; ++c)
        dmu_tilde(tok, c) += enc_scale * (mu_tilde(tok, c) - p.y(j, c));
    }

    // diffusion-term gradient into the encoded rows (segment frames only)
    for (int r = 0; r < p.seg_frames; ++r) {
      const int tok = frame_token[p.seg_offset + r];
      for (int c = 0; c < mu_tilde.cols; ++c)
        dmu_tilde(tok, c) += cfg.diff_weight * diff.mu_grad[i](r, c);
    }
    model.encoder.backward(p.tokens, dmu_tilde, enc_grad);

    // duration loss on the detached encoder output
    const Vec pred = model.dur.predict(p.mu_tilde_detached);
    report.dp += duration_loss(pred, p.d_target);
    Vec dout(pred.size());
    const double dp_scale = cfg.dp_weight / (static_cast<double>(b) * pred.size());
    for (std::size_t r = 0; r < pred.size(); ++r) dout[r] = 2.0 * dp_scale * (pred[r] - p.d_target[r]);
    model.dur.backward(p.mu_tilde_detached, dout, dp_grad);
  }
  report.enc /= static_cast<double>(b);
  report.dp /= static_cast<double>(b);

  for (std::size_t k = 0; k < enc_grad.size(); ++k) grad[enc_off + k] += enc_grad[k];
  for (std::size_t k = 0; k < dp_grad.size(); ++k) grad[dp_off + k] += dp_grad[k];
  return {report, grad};
}

// One iteration of the alternating scheme: search alignments with frozen
// parameters, then take one optimizer step on the summed loss with the
// alignments fixed.
inline LossReport train_step(TtsModel& model, const SyntheticCorpus& corpus,
                             std::span<const int> item_indices, const TrainConfig& cfg, AdamState& adam,
                             Rng& rng) {
  const TrainPlan plan = make_train_plan(model, corpus, item_indices, cfg, rng);
  auto [report, grad] = eval_gradients(model, plan, cfg);
  Vec params = gather_params(model);
  adam_step(adam, params, grad);
  scatter_params(model, params);
  return report;
}

struct LossRecord {
  int step = 0;
  LossReport losses;
};

// Fixed-budget training loop; batches are drawn uniformly with replacement.
inline std::vector<LossRecord> train(TtsModel& model, const SyntheticCorpus& corpus, const TrainConfig& cfg,
                                     Rng& rng) {
  validate(cfg);
  if (corpus.items.empty()) throw std::invalid_argument("train: empty corpus");
  AdamState adam = AdamState::make(total_params(model), cfg.lr);
  std::vector<LossRecord> curve;
  curve.reserve(cfg.iters);
  std::vector<int> indices(cfg.batch);
  for (int step = 0; step < cfg.iters; ++step) {
    for (int& idx : indices) idx = rng.uniform_int(0, static_cast<int>(corpus.items.size()) - 1);
    const LossReport report = train_step(model, corpus, indices, cfg, adam, rng);
    curve.push_back({step + 1, report});
  }
  return curve;
}

// --- inference -------------------------------------------------------------

// Full synthesis path: encode, predict and scale durations, expand, sample
// the terminal state, run the reverse dynamics down to t = 0.
inline Matrix infer(const TtsModel& model, const TokenSequence& tokens, const SamplerConfig& cfg,
                    double tempo_factor, Rng& rng) {
  const Matrix mu_tilde = model.encoder.encode(tokens);
  const Vec log_d = model.dur.predict(mu_tilde);
  const std::vector<int> durations = scale_durations(log_d, tempo_factor);
  const Matrix mu = expand_encoded(mu_tilde, durations);
  Matrix x_t = sample_terminal(mu, cfg.tau, rng);
  if (cfg.mode == SamplerMode::ode) return solve_reverse_ode(model.score_net, model.spec, mu, std::move(x_t), cfg);
  return solve_reverse_sde(model.score_net, model.spec, mu, std::move(x_t), cfg, rng);
}

// --- evaluation helpers ----------------------------------------------------

// Fraction of tokens whose MAS duration under the current encoder equals the
// corpus ground truth.
inline double duration_recovery(const TtsModel& model, const SyntheticCorpus& corpus) {
  int hit = 0, total = 0;
  for (const CorpusItem& item : corpus.items) {
    const Alignment a = mas(model.encoder.encode(item.tokens), item.features);
    const std::vector<int> truth = corpus.true_durations(item.tokens);
    for (std::size_t i = 0; i < truth.size(); ++i) {
      hit += a.durations[i] == truth[i] ? 1 : 0;
      ++total;
    }
  }
  return total > 0 ? static_cast<double>(hit) / total : 0.0;
}

// Root-mean-square per-element deviation of generated frames from the owning
// token's target pattern.
inline double pattern_rms_error(const Matrix& generated, const std::vector<int>& durations,
                                const TokenSequence& tokens, const Matrix& patterns) {
  if (static_cast<int>(tokens.size()) != static_cast<int>(durations.size()))
    throw std::invalid_argument("pattern_rms_error: token/duration mismatch");
  double sq = 0.0;
  int j = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    for (int k = 0; k < durations[i]; ++k, ++j)
      for (int c = 0; c < generated.cols; ++c) {
        const double d = generated(j, c) - patterns(tokens[i], c);
        sq += d * d;
      }
  if (j != generated.rows) throw std::invalid_argument("pattern_rms_error: frame count mismatch");
  return std::sqrt(sq / (static_cast<double>(generated.rows) * generated.cols));
}

}  // namespace difftts
