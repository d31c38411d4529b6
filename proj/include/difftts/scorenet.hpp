// Copyright (C) 2026 the difftts authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "difftts/matrix.hpp"
#include "difftts/rng.hpp"
#include "difftts/schedule.hpp"

namespace difftts {

// Feed-forward score network applied independently to every frame with
// shared weights. Input per frame is [x_t | mu | time features], output an
// n-vector score. Hidden layers use tanh; the output layer is linear and
// zero-initialized so the untrained network scores everything as zero.
struct ScoreNetArch {
  int dim = 8;
  std::vector<int> hidden = {64, 64};
  int time_dim = 8;  // even; half sines, half cosines

  int input_dim() const { return 2 * dim + time_dim; }
};

// Fixed sinusoidal features of t with geometrically spaced frequencies.
inline Vec time_features(double t, int time_dim) {
  if (time_dim < 2 || time_dim % 2 != 0) throw std::invalid_argument("time_features: need a positive even count");
  const int half = time_dim / 2;
  Vec f(static_cast<std::size_t>(time_dim));
  for (int j = 0; j < half; ++j) {
    const double freq = half > 1 ? std::pow(1000.0, static_cast<double>(j) / (half - 1)) : 1.0;
    f[j] = std::sin(freq * t);
    f[half + j] = std::cos(freq * t);
  }
  return f;
}

struct ToyScoreNet {
  ScoreNetArch arch;
  Vec params;

  // Layer sizes including input and output.
  std::vector<int> layer_sizes() const {
    std::vector<int> sizes{arch.input_dim()};
    sizes.insert(sizes.end(), arch.hidden.begin(), arch.hidden.end());
    sizes.push_back(arch.dim);
    return sizes;
  }

  static int param_count(const ScoreNetArch& arch) {
    int count = 0;
    int in = arch.input_dim();
    for (int h : arch.hidden) {
      count += h * in + h;
      in = h;
    }
    count += arch.dim * in + arch.dim;
    return count;
  }

  static ToyScoreNet init(const ScoreNetArch& arch, Rng& rng) {
    ToyScoreNet net;
    net.arch = arch;
    net.params.assign(static_cast<std::size_t>(param_count(arch)), 0.0);
    int offset = 0;
    int in = arch.input_dim();
    for (int h : arch.hidden) {
      const double scale = 1.0 / std::sqrt(static_cast<double>(in));
      for (int k = 0; k < h * in + h; ++k) net.params[offset + k] = rng.uniform(-scale, scale);
      offset += h * in + h;
      in = h;
    }
    // output layer stays zero
    return net;
  }

  // Forward pass over all frames; activations retained when a cache is given.
  // acts[l] holds the post-activation of layer l (acts[0] is the input).
  Matrix forward(const Matrix& x, const Matrix& mu, double t, std::vector<Matrix>* cache) const {
    check_same_shape(x, mu, "ToyScoreNet");
    if (x.cols != arch.dim) throw std::invalid_argument("ToyScoreNet: feature dimension mismatch");
    const Vec tf = time_features(t, arch.time_dim);
    const std::vector<int> sizes = layer_sizes();
    const int frames = x.rows;

    Matrix act(frames, sizes[0]);
    for (int r = 0; r < frames; ++r) {
      for (int c = 0; c < arch.dim; ++c) {
        act(r, c) = x(r, c);
        act(r, arch.dim + c) = mu(r, c);
      }
      for (int c = 0; c < arch.time_dim; ++c) act(r, 2 * arch.dim + c) = tf[c];
    }
    if (cache) {
      cache->clear();
      cache->push_back(act);
    }

    int offset = 0;
    for (std::size_t l = 1; l < sizes.size(); ++l) {
      const int in = sizes[l - 1], out = sizes[l];
      const double* w = params.data() + offset;
      const double* b = w + out * in;
      const bool last = l + 1 == sizes.size();
      Matrix next(frames, out);
      for (int r = 0; r < frames; ++r)
        for (int o = 0; o < out; ++o) {
          double z = b[o];
          for (int c = 0; c < in; ++c) z += w[o * in + c] * act(r, c);
          next(r, o) = last ? z : std::tanh(z);
        }
      act = std::move(next);
      if (cache) cache->push_back(act);
      offset += out * in + out;
    }
    return act;
  }

  Matrix score(const Matrix& x, const Matrix& mu, double t) const { return forward(x, mu, t, nullptr); }

  // Reverse pass. Accumulates parameter gradients into param_grad and, when
  // requested, writes the gradients with respect to the x and mu inputs.
  void backward(const std::vector<Matrix>& cache, const Matrix& dout, Vec& param_grad, Matrix* dx,
                Matrix* dmu) const {
    const std::vector<int> sizes = layer_sizes();
    if (param_grad.size() != params.size()) throw std::invalid_argument("ToyScoreNet: gradient size mismatch");
    const int frames = cache.front().rows;

    // parameter offsets per layer
    std::vector<int> offsets(sizes.size(), 0);
    int offset = 0;
    for (std::size_t l = 1; l < sizes.size(); ++l) {
      offsets[l] = offset;
      offset += sizes[l] * sizes[l - 1] + sizes[l];
    }

    Matrix delta = dout;  // d(loss)/d(post-activation of current layer)
    for (std::size_t l = sizes.size() - 1; l >= 1; --l) {
      const int in = sizes[l - 1], out = sizes[l];
      const double* w = params.data() + offsets[l];
      double* gw = param_grad.data() + offsets[l];
      double* gb = gw + out * in;
      const Matrix& below = cache[l - 1];
      const bool last = l + 1 == sizes.size();

      // d/d(pre-activation); tanh' = 1 - a^2 on hidden layers
      Matrix dz(frames, out);
      for (int r = 0; r < frames; ++r)
        for (int o = 0; o < out; ++o) {
          const double a = cache[l](r, o);
          dz(r, o) = last ? delta(r, o) : delta(r, o) * (1.0 - a * a);
        }

      for (int r = 0; r < frames; ++r)
        for (int o = 0; o < out; ++o) {
          const double g = dz(r, o);
          gb[o] += g;
          for (int c = 0; c < in; ++c) gw[o * in + c] += g * below(r, c);
        }

      if (l == 1 && !dx && !dmu) break;
      Matrix prev(frames, in, 0.0);
      for (int r = 0; r < frames; ++r)
        for (int o = 0; o < out; ++o) {
          const double g = dz(r, o);
          for (int c = 0; c < in; ++c) prev(r, c) += g * w[o * in + c];
        }
      if (l == 1) {
        if (dx) {
          *dx = Matrix(frames, arch.dim);
          for (int r = 0; r < frames; ++r)
            for (int c = 0; c < arch.dim; ++c) (*dx)(r, c) = prev(r, c);
        }
        if (dmu) {
          *dmu = Matrix(frames, arch.dim);
          for (int r = 0; r < frames; ++r)
            for (int c = 0; c < arch.dim; ++c) (*dmu)(r, c) = prev(r, arch.dim + c);
        }
        break;
      }
      delta = std::move(prev);
    }
  }
};

// One training batch for the diffusion loss: targets, aligned encoder
// outputs, per-instance times and the standard normal noise that produced
// the diffused states.
struct TrainBatch {
  std::vector<Matrix> x0;
  std::vector<Matrix> mu;
  std::vector<Matrix> xi;
  Vec t;

  std::size_t size() const { return x0.size(); }
};

inline void validate(const TrainBatch& batch, double t_min) {
  if (batch.x0.size() != batch.mu.size() || batch.x0.size() != batch.xi.size() ||
      batch.x0.size() != batch.t.size())
    throw std::invalid_argument("TrainBatch: component count mismatch");
  for (std::size_t i = 0; i < batch.size(); ++i) {
    check_same_shape(batch.x0[i], batch.mu[i], "TrainBatch");
    check_same_shape(batch.x0[i], batch.xi[i], "TrainBatch");
    if (!(batch.t[i] > t_min)) throw std::domain_error("TrainBatch: t at or below the clamp");
  }
}

// Fills times and noise for given (x0, mu) pairs; t is uniform on
// (t_min, horizon].
inline TrainBatch make_train_batch(const DiffusionSpec& spec, std::vector<Matrix> x0, std::vector<Matrix> mu,
                                   double t_min, Rng& rng) {
  TrainBatch batch;
  batch.x0 = std::move(x0);
  batch.mu = std::move(mu);
  batch.t.resize(batch.x0.size());
  batch.xi.reserve(batch.x0.size());
  for (std::size_t i = 0; i < batch.x0.size(); ++i) {
    batch.t[i] = rng.uniform(t_min, spec.schedule.horizon);
    Matrix noise(batch.x0[i].rows, batch.x0[i].cols);
    rng.fill_normal(noise);
    batch.xi.push_back(std::move(noise));
  }
  return batch;
}

namespace detail {

// Diffused state for the identity-covariance loss: decay x0 + (1-decay) mu
// + sqrt(lambda) xi, with decay = exp(-B/2).
inline Matrix noisy_state(const DiffusionSpec& spec, const Matrix& x0, const Matrix& mu, const Matrix& xi,
                          double t, double& decay_out, double& lambda_out) {
  const double big_b = beta_integral(spec.schedule, 0.0, t);
  const double decay = std::exp(-0.5 * big_b);
  const double lambda = 1.0 - decay * decay;
  decay_out = decay;
  lambda_out = lambda;
  Matrix x_t(x0.rows, x0.cols);
  const double sd = std::sqrt(lambda);
  for (std::size_t k = 0; k < x_t.data.size(); ++k)
    x_t.data[k] = decay * x0.data[k] + (1.0 - decay) * mu.data[k] + sd * xi.data[k];
  return x_t;
}

}  // namespace detail

// Weighted score-matching loss, identity covariance:
//   mean over instances of  lambda_t / F * || s(x_t, mu, t) + xi / sqrt(lambda_t) ||_F^2,
// i.e. per-frame mean, per-coordinate sum (an untrained zero network scores
// about n per frame). Works for any score model so analytic oracles can be
// plugged in.
template <typename Model>
double diffusion_loss_for(const Model& model, const TrainBatch& batch, const DiffusionSpec& spec,
                          double t_min = 0.0) {
  require_identity_sigma(spec, "diffusion_loss");
  validate(batch, t_min);
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    double decay, lambda;
    const Matrix x_t = detail::noisy_state(spec, batch.x0[i], batch.mu[i], batch.xi[i], batch.t[i], decay, lambda);
    const Matrix s = model.score(x_t, batch.mu[i], batch.t[i]);
    const double inv_sd = 1.0 / std::sqrt(lambda);
    double sq = 0.0;
    for (std::size_t k = 0; k < s.data.size(); ++k) {
      const double r = s.data[k] + batch.xi[i].data[k] * inv_sd;
      sq += r * r;
    }
    loss += lambda * sq / batch.x0[i].rows;
  }
  return loss / static_cast<double>(batch.size());
}

inline double diffusion_loss(const ToyScoreNet& net, const TrainBatch& batch, const DiffusionSpec& spec,
                             double t_min = 0.0) {
  return diffusion_loss_for(net, batch, spec, t_min);
}

struct DiffusionLossGrads {
  double loss = 0.0;
  Vec param_grad;               // d(loss)/d(theta)
  std::vector<Matrix> mu_grad;  // d(loss)/d(mu), both through x_t and the net input
};

// Loss plus exact reverse-mode gradients. mu gradients are produced only on
// request (the full pipeline needs them; standalone training does not).
inline DiffusionLossGrads diffusion_loss_backward(const ToyScoreNet& net, const TrainBatch& batch,
                                                  const DiffusionSpec& spec, bool with_mu_grad,
                                                  double t_min = 0.0) {
  require_identity_sigma(spec, "diffusion_loss");
  validate(batch, t_min);
  DiffusionLossGrads out;
  out.param_grad.assign(net.params.size(), 0.0);
  if (with_mu_grad) out.mu_grad.resize(batch.size());

  for (std::size_t i = 0; i < batch.size(); ++i) {
    double decay, lambda;
    const Matrix x_t = detail::noisy_state(spec, batch.x0[i], batch.mu[i], batch.xi[i], batch.t[i], decay, lambda);
    std::vector<Matrix> cache;
    const Matrix s = net.forward(x_t, batch.mu[i], batch.t[i], &cache);
    const double inv_sd = 1.0 / std::sqrt(lambda);
    const int frames = batch.x0[i].rows;
    const double weight = lambda / (frames * static_cast<double>(batch.size()));

    Matrix dout(s.rows, s.cols);
    double sq = 0.0;
    for (std::size_t k = 0; k < s.data.size(); ++k) {
      const double r = s.data[k] + batch.xi[i].data[k] * inv_sd;
      sq += r * r;
      dout.data[k] = 2.0 * weight * r;
    }
    out.loss += weight * sq;

    Matrix dx, dmu;
    net.backward(cache, dout, out.param_grad, with_mu_grad ? &dx : nullptr, with_mu_grad ? &dmu : nullptr);
    if (with_mu_grad) {
      // x_t depends on mu through the conditional mean.
      Matrix g(frames, s.cols);
      for (std::size_t k = 0; k < g.data.size(); ++k) g.data[k] = dmu.data[k] + (1.0 - decay) * dx.data[k];
      out.mu_grad[i] = std::move(g);
    }
  }
  return out;
}

// Gradient of the diffusion loss with respect to every network parameter.
inline Vec score_gradients(const ToyScoreNet& net, const TrainBatch& batch, const DiffusionSpec& spec,
                           double t_min = 0.0) {
  return diffusion_loss_backward(net, batch, spec, false, t_min).param_grad;
}

// Adam optimizer state. Accumulators are shaped like the parameter vector.
struct AdamState {
  Vec m;
  Vec v;
  std::int64_t step = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState make(std::size_t n, double lr = 1e-4) {
    AdamState s;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    s.lr = lr;
    return s;
  }
};

// Standard Adam update with bias correction, in place.
inline void adam_step(AdamState& state, Vec& params, const Vec& grads) {
  if (params.size() != state.m.size() || grads.size() != state.m.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

}  // namespace difftts
