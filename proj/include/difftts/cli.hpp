// Copyright (C) 2026 the difftts authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "difftts/bench.hpp"
#include "difftts/diffusion.hpp"
#include "difftts/io.hpp"
#include "difftts/sampler.hpp"
#include "difftts/schedule.hpp"
#include "difftts/tts.hpp"

namespace difftts::cli {

// Aggregated run configuration. Defaults live here; a JSON config file can
// replace any subset; command-line flags override both.
struct RunConfig {
  NoiseSchedule schedule;
  SamplerConfig sampler;
  ModelArch model;
  TrainConfig training;
  CorpusRecipe corpus;
  int corpus_size = 200;
  std::uint64_t seed = 0;
  std::string out_dir;
};

inline std::string default_out_dir() {
  const char* env = std::getenv("DIFFTTS_OUT_DIR");
  return env && *env ? env : "out";
}

inline void from_json_partial(const nlohmann::json& j, RunConfig& cfg) {
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    cfg.schedule.beta0 = s.value("beta0", cfg.schedule.beta0);
    cfg.schedule.beta1 = s.value("beta1", cfg.schedule.beta1);
    cfg.schedule.horizon = s.value("horizon", cfg.schedule.horizon);
  }
  if (j.contains("sampler")) {
    const auto& s = j.at("sampler");
    cfg.sampler.num_steps = s.value("steps", cfg.sampler.num_steps);
    cfg.sampler.tau = s.value("tau", cfg.sampler.tau);
    const std::string mode = s.value("mode", std::string(cfg.sampler.mode == SamplerMode::ode ? "ode" : "sde"));
    if (mode != "ode" && mode != "sde") throw std::domain_error("config: sampler.mode must be ode or sde");
    cfg.sampler.mode = mode == "ode" ? SamplerMode::ode : SamplerMode::sde;
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    cfg.model.vocab = m.value("vocab", cfg.model.vocab);
    cfg.model.dim = m.value("dim", cfg.model.dim);
    cfg.model.score_hidden = m.value("score_hidden", cfg.model.score_hidden);
    cfg.model.time_dim = m.value("time_dim", cfg.model.time_dim);
    cfg.model.dp_hidden = m.value("dp_hidden", cfg.model.dp_hidden);
  }
  if (j.contains("training")) {
    const auto& t = j.at("training");
    cfg.training.lr = t.value("lr", cfg.training.lr);
    cfg.training.batch = t.value("batch", cfg.training.batch);
    cfg.training.segment_frames = t.value("segment_frames", cfg.training.segment_frames);
    cfg.training.iters = t.value("iters", cfg.training.iters);
    cfg.training.enc_weight = t.value("enc_weight", cfg.training.enc_weight);
    cfg.training.dp_weight = t.value("dp_weight", cfg.training.dp_weight);
    cfg.training.diff_weight = t.value("diff_weight", cfg.training.diff_weight);
    cfg.training.t_min_frac = t.value("t_min_frac", cfg.training.t_min_frac);
  }
  if (j.contains("corpus")) {
    const auto& c = j.at("corpus");
    cfg.corpus.vocab = c.value("vocab", cfg.corpus.vocab);
    cfg.corpus.dim = c.value("dim", cfg.corpus.dim);
    cfg.corpus.noise = c.value("noise", cfg.corpus.noise);
    cfg.corpus.min_tokens = c.value("min_tokens", cfg.corpus.min_tokens);
    cfg.corpus.max_tokens = c.value("max_tokens", cfg.corpus.max_tokens);
    cfg.corpus.min_duration = c.value("min_duration", cfg.corpus.min_duration);
    cfg.corpus.max_duration = c.value("max_duration", cfg.corpus.max_duration);
    cfg.corpus.pattern_seed = c.value("pattern_seed", cfg.corpus.pattern_seed);
    cfg.corpus_size = c.value("size", cfg.corpus_size);
  }
  cfg.seed = j.value("seed", cfg.seed);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
}

inline nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["schedule"] = {{"beta0", cfg.schedule.beta0}, {"beta1", cfg.schedule.beta1}, {"horizon", cfg.schedule.horizon}};
  j["sampler"] = {{"steps", cfg.sampler.num_steps},
                  {"mode", cfg.sampler.mode == SamplerMode::ode ? "ode" : "sde"},
                  {"tau", cfg.sampler.tau}};
  j["model"] = {{"vocab", cfg.model.vocab},
                {"dim", cfg.model.dim},
                {"score_hidden", cfg.model.score_hidden},
                {"time_dim", cfg.model.time_dim},
                {"dp_hidden", cfg.model.dp_hidden}};
  j["training"] = {{"lr", cfg.training.lr},
                   {"batch", cfg.training.batch},
                   {"segment_frames", cfg.training.segment_frames},
                   {"iters", cfg.training.iters},
                   {"enc_weight", cfg.training.enc_weight},
                   {"dp_weight", cfg.training.dp_weight},
                   {"diff_weight", cfg.training.diff_weight},
                   {"t_min_frac", cfg.training.t_min_frac}};
  j["corpus"] = {{"vocab", cfg.corpus.vocab},
                 {"dim", cfg.corpus.dim},
                 {"noise", cfg.corpus.noise},
                 {"min_tokens", cfg.corpus.min_tokens},
                 {"max_tokens", cfg.corpus.max_tokens},
                 {"min_duration", cfg.corpus.min_duration},
                 {"max_duration", cfg.corpus.max_duration},
                 {"pattern_seed", cfg.corpus.pattern_seed},
                 {"size", cfg.corpus_size}};
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  return j;
}

inline RunConfig load_run_config(const std::optional<std::string>& path) {
  RunConfig cfg;
  cfg.out_dir = default_out_dir();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw std::runtime_error("cannot open config file: " + *path);
    from_json_partial(nlohmann::json::parse(in), cfg);
  }
  return cfg;
}

inline void validate(const ModelArch& arch) {
  if (arch.vocab < 2) throw std::domain_error("model: vocab must be >= 2");
  if (arch.dim < 1) throw std::domain_error("model: dim must be >= 1");
  if (arch.score_hidden.empty()) throw std::domain_error("model: score_hidden must be nonempty");
  for (int h : arch.score_hidden)
    if (h < 1) throw std::domain_error("model: hidden sizes must be positive");
  if (arch.time_dim < 2 || arch.time_dim % 2 != 0) throw std::domain_error("model: time_dim must be even and >= 2");
  if (arch.dp_hidden < 1) throw std::domain_error("model: dp_hidden must be >= 1");
}

// Every value is checked against the owning module's preconditions before
// any work starts.
inline void validate(const RunConfig& cfg) {
  difftts::validate(cfg.schedule);
  if (cfg.schedule.terminal_decay() >= 1e-4)
    throw std::domain_error("schedule: exp(-B(0,horizon)) must be below 1e-4 for the terminal noise to dominate");
  difftts::validate(cfg.sampler);
  validate(cfg.model);
  difftts::validate(cfg.training);
  difftts::validate(cfg.corpus);
  if (cfg.corpus_size < 1) throw std::domain_error("corpus: size must be >= 1");
}

namespace detail {

inline std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
  return out;
}

inline std::vector<int> parse_ints(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(std::stoi(cell));
  return out;
}

inline void log(const std::string& msg) { std::cerr << msg << "\n"; }

inline void write_bench_csv(const std::filesystem::path& path, const std::vector<BenchRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "steps,samples,reps,mean_error,sd_error,mean_ms_per_sample,sd_ms_per_sample\n";
  for (const BenchRow& r : rows)
    out << r.steps << "," << r.samples << "," << r.reps << "," << csv_double(r.mean_error) << ","
        << csv_double(r.sd_error) << "," << csv_double(r.mean_ms_per_sample) << ","
        << csv_double(r.sd_ms_per_sample) << "\n";
}

inline std::vector<std::string> feature_header(int dim) {
  std::vector<std::string> h;
  h.reserve(dim);
  for (int c = 0; c < dim; ++c) h.push_back("x_" + std::to_string(c + 1));
  return h;
}

// Default analytic benchmark prior: well-separated 1D two-component mixture.
inline MixturePrior default_bench_prior() {
  MixturePrior prior;
  prior.weights = {0.4, 0.6};
  prior.means = {{-2.0}, {2.0}};
  prior.var_diag_components = {{0.09}, {0.16}};
  return prior;
}

}  // namespace detail

// --- subcommand bodies -------------------------------------------------------

struct GenCorpusArgs {
  std::string out;
};

inline void cmd_gen_corpus(const RunConfig& cfg, const GenCorpusArgs& args) {
  Rng rng(cfg.seed);
  const SyntheticCorpus corpus = gen_corpus(cfg.corpus, cfg.corpus_size, rng);
  save_corpus(args.out, corpus);
  detail::log("wrote corpus with " + std::to_string(corpus.items.size()) + " items to " + args.out);
}

struct TrainArgs {
  std::string corpus_dir;
  std::string out;
};

inline void cmd_train(const RunConfig& cfg, const TrainArgs& args) {
  const SyntheticCorpus corpus = load_corpus(args.corpus_dir);
  if (corpus.recipe.dim != cfg.model.dim)
    throw std::domain_error("train: corpus dim " + std::to_string(corpus.recipe.dim) +
                            " does not match model dim " + std::to_string(cfg.model.dim));
  if (corpus.recipe.vocab > cfg.model.vocab)
    throw std::domain_error("train: corpus vocabulary exceeds the model's");
  Rng rng(cfg.seed);
  Rng model_rng = rng.derive(1);
  TtsModel model = make_model(cfg.model, cfg.schedule, model_rng);
  Rng train_rng = rng.derive(2);
  const auto curve = train(model, corpus, cfg.training, train_rng);

  const std::filesystem::path out(args.out);
  std::filesystem::create_directories(out);
  save_checkpoint(out / "checkpoint.bin", model);
  write_loss_curve(out / "loss_curve.csv", curve);
  nlohmann::json manifest;
  manifest["version"] = kVersion;
  manifest["seed"] = cfg.seed;
  manifest["config"] = to_json(cfg);
  std::ofstream mf(out / "run_manifest.json");
  mf << manifest.dump(2) << "\n";
  if (!curve.empty())
    detail::log("trained " + std::to_string(cfg.training.iters) + " steps; final losses enc=" +
                std::to_string(curve.back().losses.enc) + " dp=" + std::to_string(curve.back().losses.dp) +
                " diff=" + std::to_string(curve.back().losses.diff));
  detail::log("wrote checkpoint and loss curve to " + args.out);
}

struct InferArgs {
  std::string model_path;
  std::string tokens_csv;
  double tempo = 1.0;
  std::string out;
  std::string trace;  // optional per-step trajectory CSV
};

inline void cmd_infer(const RunConfig& cfg, const InferArgs& args) {
  const TtsModel model = load_checkpoint(args.model_path);
  const TokenSequence tokens = detail::parse_ints(args.tokens_csv);
  Rng rng(cfg.seed);

  Matrix out;
  if (args.trace.empty()) {
    out = infer(model, tokens, cfg.sampler, args.tempo, rng);
  } else {
    // expanded inference path with a per-step observer
    std::ofstream trace(args.trace);
    if (!trace) throw std::runtime_error("cannot open for writing: " + args.trace);
    trace << "step,t,rms\n";
    const Matrix mu_tilde = model.encoder.encode(tokens);
    const std::vector<int> durations = scale_durations(model.dur.predict(mu_tilde), args.tempo);
    const Matrix mu = expand_encoded(mu_tilde, durations);
    Matrix x_t = sample_terminal(mu, cfg.sampler.tau, rng);
    const auto observer = [&](int step, double t, const Matrix& x) {
      double sq = 0.0;
      for (double v : x.data) sq += v * v;
      trace << step << "," << csv_double(t) << "," << csv_double(std::sqrt(sq / x.data.size())) << "\n";
    };
    observer(0, model.spec.schedule.horizon, x_t);
    out = cfg.sampler.mode == SamplerMode::ode
              ? solve_reverse_ode(model.score_net, model.spec, mu, std::move(x_t), cfg.sampler, observer)
              : solve_reverse_sde(model.score_net, model.spec, mu, std::move(x_t), cfg.sampler, rng, observer);
  }
  write_matrix_csv(args.out, detail::feature_header(out.cols), out);
  detail::log("wrote " + std::to_string(out.rows) + " frames to " + args.out);
}

struct AlignArgs {
  std::string encoded_csv;
  std::string features_csv;
  std::string out;
};

inline void cmd_align(const AlignArgs& args) {
  const Matrix mu_tilde = read_matrix_csv(args.encoded_csv);
  const Matrix y = read_matrix_csv(args.features_csv);
  const Alignment a = mas(mu_tilde, y);
  std::ofstream out(args.out);
  if (!out) throw std::runtime_error("cannot open for writing: " + args.out);
  out << "token,frames\n";
  for (std::size_t i = 0; i < a.durations.size(); ++i) out << i + 1 << "," << a.durations[i] << "\n";
  detail::log("aligned " + std::to_string(y.rows) + " frames to " + std::to_string(mu_tilde.rows) + " tokens");
}

struct SimulateArgs {
  std::string x0_csv;
  std::string mu_csv;
  std::string sigma_csv;  // empty = identity
  int steps = 200;
  std::string out;
};

inline void cmd_simulate(const RunConfig& cfg, const SimulateArgs& args) {
  const Vec x0 = detail::parse_doubles(args.x0_csv);
  const Vec mu = detail::parse_doubles(args.mu_csv);
  DiffusionSpec spec;
  spec.schedule = cfg.schedule;
  spec.dim = static_cast<int>(x0.size());
  spec.sigma_diag = args.sigma_csv.empty() ? Vec(x0.size(), 1.0) : detail::parse_doubles(args.sigma_csv);
  difftts::validate(spec);
  Rng rng(cfg.seed);
  const DiffusionPath path = simulate_forward_em(spec, x0, mu, args.steps, rng);

  std::ofstream out(args.out);
  if (!out) throw std::runtime_error("cannot open for writing: " + args.out);
  out << "t";
  for (int c = 0; c < spec.dim; ++c) out << ",x_" << c + 1;
  out << "\n";
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    out << csv_double(path.times[k]);
    for (double v : path.states[k]) out << "," << csv_double(v);
    out << "\n";
  }
  detail::log("simulated " + std::to_string(args.steps) + " forward steps");
}

struct LoglikArgs {
  std::string model_path;
  std::string corpus_dir;
  int items = 8;
  int steps = 400;
  int probes = 32;
  std::string probe_kind = "rademacher";
  std::string out;
};

inline void cmd_loglik(const RunConfig& cfg, const LoglikArgs& args) {
  const TtsModel model = load_checkpoint(args.model_path);
  const SyntheticCorpus corpus = load_corpus(args.corpus_dir);
  if (args.items < 1 || args.items > static_cast<int>(corpus.items.size()))
    throw std::domain_error("loglik: items out of range");
  const ProbeKind kind = args.probe_kind == "gaussian" ? ProbeKind::gaussian : ProbeKind::rademacher;
  if (args.probe_kind != "gaussian" && args.probe_kind != "rademacher")
    throw std::domain_error("loglik: probe kind must be rademacher or gaussian");

  Rng rng(cfg.seed);
  double value = 0.0, se_sq = 0.0;
  for (int i = 0; i < args.items; ++i) {
    const CorpusItem& item = corpus.items[i];
    const Matrix mu_tilde = model.encoder.encode(item.tokens);
    const Alignment a = mas(mu_tilde, item.features);
    const Matrix mu = expand_encoded(mu_tilde, a.durations);
    Rng item_rng = rng.derive(static_cast<std::uint64_t>(i));
    const LikelihoodEstimate est =
        log_likelihood(model.score_net, model.spec, mu, item.features, args.steps, args.probes, item_rng, kind);
    value += est.value;
    se_sq += est.std_error * est.std_error;
  }
  value /= args.items;
  const double std_error = std::sqrt(se_sq) / args.items;

  std::ofstream out(args.out);
  if (!out) throw std::runtime_error("cannot open for writing: " + args.out);
  out << "items,steps,probes,value,std_error\n";
  out << args.items << "," << args.steps << "," << args.probes << "," << csv_double(value) << ","
      << csv_double(std_error) << "\n";
  detail::log("average log-likelihood per instance: " + std::to_string(value) + " +- " +
              std::to_string(std_error));
}

struct BenchArgs {
  std::string steps_csv = "4,10,100,1000";
  int reps = 3;
  int samples = 2000;
  int ref_steps = 0;  // analytic mode: >0 compares against a converged-solver reference
  std::string model_path;  // empty = analytic mixture score
  std::string corpus_dir;
  std::string out;
};

inline void cmd_bench(const RunConfig& cfg, const BenchArgs& args) {
  const std::vector<int> steps = detail::parse_ints(args.steps_csv);
  for (int n : steps)
    if (n < 1) throw std::domain_error("bench: step counts must be positive");
  const Rng root(cfg.seed);
  std::vector<BenchRow> rows;
  if (args.model_path.empty()) {
    const DiffusionSpec spec = DiffusionSpec::identity(1, cfg.schedule);
    rows = bench_steps_analytic(detail::default_bench_prior(), spec, steps, args.reps, args.samples,
                                cfg.sampler.mode, root, args.ref_steps);
  } else {
    if (args.corpus_dir.empty()) throw std::domain_error("bench: --corpus is required with --model");
    const TtsModel model = load_checkpoint(args.model_path);
    const SyntheticCorpus corpus = load_corpus(args.corpus_dir);
    rows = bench_steps_model(model, corpus, steps, args.reps, std::min(args.samples, 64), cfg.sampler.mode,
                             cfg.sampler.tau, root);
  }
  detail::write_bench_csv(args.out, rows);
  detail::log("wrote " + std::to_string(rows.size()) + " benchmark rows to " + args.out);
}

// --- argument wiring ----------------------------------------------------------

inline int run(std::vector<std::string> args) {
  // A config file changes the defaults the flags see, so scan for it first.
  std::optional<std::string> config_path;
  for (std::size_t i = 0; i + 1 < args.size(); ++i)
    if (args[i] == "--config") config_path = args[i + 1];

  RunConfig cfg;
  try {
    cfg = load_run_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  }

  CLI::App app{"generalized Gaussian diffusion with monotonic alignment, desk scale"};
  app.require_subcommand(1);
  std::string config_flag;
  app.add_option("--config", config_flag, "JSON configuration file");

  std::string mode = cfg.sampler.mode == SamplerMode::ode ? "ode" : "sde";
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", cfg.seed, "root random seed");
    sub->add_option("--config", config_flag, "JSON configuration file");
  };
  const auto add_sampler_flags = [&](CLI::App* sub) {
    sub->add_option("--steps", cfg.sampler.num_steps, "reverse solver step count");
    sub->add_option("--mode", mode, "solver mode: ode | sde")->check(CLI::IsMember({"ode", "sde"}));
    sub->add_option("--tau", cfg.sampler.tau, "terminal temperature");
  };

  GenCorpusArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-corpus", "generate a synthetic corpus");
  add_common(gen);
  gen->add_option("--out", gen_args.out, "output corpus directory");
  gen->add_option("--size", cfg.corpus_size, "number of corpus items");
  gen->add_option("--vocab", cfg.corpus.vocab, "vocabulary size");
  gen->add_option("--dim", cfg.corpus.dim, "feature dimensionality");
  gen->add_option("--noise", cfg.corpus.noise, "observation noise level");
  gen->add_option("--pattern-seed", cfg.corpus.pattern_seed, "seed pinning patterns and durations");

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train the model on a corpus");
  add_common(train_cmd);
  train_cmd->add_option("--corpus", train_args.corpus_dir, "corpus directory")->required();
  train_cmd->add_option("--out", train_args.out, "output directory");
  train_cmd->add_option("--iters", cfg.training.iters, "iteration budget");
  train_cmd->add_option("--batch", cfg.training.batch, "batch size");
  train_cmd->add_option("--lr", cfg.training.lr, "learning rate");
  train_cmd->add_option("--segment", cfg.training.segment_frames, "diffusion-loss segment length");
  train_cmd->add_option("--enc-weight", cfg.training.enc_weight, "encoder loss weight");

  InferArgs infer_args;
  CLI::App* infer_cmd = app.add_subcommand("infer", "synthesize features for a token sequence");
  add_common(infer_cmd);
  add_sampler_flags(infer_cmd);
  infer_cmd->add_option("--model", infer_args.model_path, "model checkpoint")->required();
  infer_cmd->add_option("--tokens", infer_args.tokens_csv, "comma-separated token ids")->required();
  infer_cmd->add_option("--tempo", infer_args.tempo, "duration scaling factor");
  infer_cmd->add_option("--out", infer_args.out, "output feature CSV");
  infer_cmd->add_option("--trace", infer_args.trace, "per-step trajectory CSV");

  AlignArgs align_args;
  CLI::App* align_cmd = app.add_subcommand("align", "monotonic alignment of features to encoded rows");
  align_cmd->add_option("--encoded", align_args.encoded_csv, "encoded rows CSV")->required();
  align_cmd->add_option("--features", align_args.features_csv, "feature frames CSV")->required();
  align_cmd->add_option("--out", align_args.out, "output durations CSV");
  align_cmd->add_option("--config", config_flag, "JSON configuration file");

  SimulateArgs sim_args;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "simulate the forward diffusion of one state");
  add_common(sim_cmd);
  sim_cmd->add_option("--x0", sim_args.x0_csv, "initial state, comma-separated")->required();
  sim_cmd->add_option("--mu", sim_args.mu_csv, "terminal mean, comma-separated")->required();
  sim_cmd->add_option("--sigma", sim_args.sigma_csv, "terminal variance diagonal (default all ones)");
  sim_cmd->add_option("--steps", sim_args.steps, "Euler-Maruyama step count");
  sim_cmd->add_option("--out", sim_args.out, "output path CSV");

  LoglikArgs loglik_args;
  CLI::App* loglik_cmd = app.add_subcommand("loglik", "probability-flow log-likelihood of corpus items");
  add_common(loglik_cmd);
  loglik_cmd->add_option("--model", loglik_args.model_path, "model checkpoint")->required();
  loglik_cmd->add_option("--corpus", loglik_args.corpus_dir, "corpus directory")->required();
  loglik_cmd->add_option("--items", loglik_args.items, "number of items to evaluate");
  loglik_cmd->add_option("--steps", loglik_args.steps, "flow integration steps");
  loglik_cmd->add_option("--probes", loglik_args.probes, "Hutchinson probes");
  loglik_cmd->add_option("--probe-kind", loglik_args.probe_kind, "rademacher | gaussian")
      ->check(CLI::IsMember({"rademacher", "gaussian"}));
  loglik_cmd->add_option("--out", loglik_args.out, "output CSV");

  BenchArgs bench_args;
  CLI::App* bench_cmd = app.add_subcommand("bench", "speed-vs-quality sweep over step counts");
  add_common(bench_cmd);
  bench_cmd->add_option("--steps", bench_args.steps_csv, "comma-separated step counts");
  bench_cmd->add_option("--reps", bench_args.reps, "repetitions per step count");
  bench_cmd->add_option("--samples", bench_args.samples, "samples per repetition");
  bench_cmd->add_option("--ref-steps", bench_args.ref_steps,
                        "compare against a reference solve of this many steps instead of exact quantiles");
  bench_cmd->add_option("--mode", mode, "solver mode: ode | sde")->check(CLI::IsMember({"ode", "sde"}));
  bench_cmd->add_option("--tau", cfg.sampler.tau, "terminal temperature (model mode)");
  bench_cmd->add_option("--model", bench_args.model_path, "model checkpoint (default: analytic score)");
  bench_cmd->add_option("--corpus", bench_args.corpus_dir, "corpus directory (model mode)");
  bench_cmd->add_option("--out", bench_args.out, "output CSV");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, std::cout, std::cerr);
    return code == 0 ? 0 : 2;
  }
  cfg.sampler.mode = mode == "ode" ? SamplerMode::ode : SamplerMode::sde;

  // default output locations under the configured directory
  const std::filesystem::path out_dir(cfg.out_dir);
  if (gen_args.out.empty()) gen_args.out = (out_dir / "corpus").string();
  if (train_args.out.empty()) train_args.out = (out_dir / "run").string();
  if (infer_args.out.empty()) infer_args.out = (out_dir / "features.csv").string();
  if (align_args.out.empty()) align_args.out = (out_dir / "durations.csv").string();
  if (sim_args.out.empty()) sim_args.out = (out_dir / "path.csv").string();
  if (loglik_args.out.empty()) loglik_args.out = (out_dir / "loglik.csv").string();
  if (bench_args.out.empty()) bench_args.out = (out_dir / "bench.csv").string();

  try {
    validate(cfg);
    const auto ensure_parent = [](const std::string& file) {
      const std::filesystem::path p(file);
      if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    };
    if (gen->parsed()) {
      cmd_gen_corpus(cfg, gen_args);
    } else if (train_cmd->parsed()) {
      cmd_train(cfg, train_args);
    } else if (infer_cmd->parsed()) {
      ensure_parent(infer_args.out);
      cmd_infer(cfg, infer_args);
    } else if (align_cmd->parsed()) {
      ensure_parent(align_args.out);
      cmd_align(align_args);
    } else if (sim_cmd->parsed()) {
      ensure_parent(sim_args.out);
      cmd_simulate(cfg, sim_args);
    } else if (loglik_cmd->parsed()) {
      ensure_parent(loglik_args.out);
      cmd_loglik(cfg, loglik_args);
    } else if (bench_cmd->parsed()) {
      ensure_parent(bench_args.out);
      cmd_bench(cfg, bench_args);
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

inline int run_main(int argc, char** argv) {
  return run(std::vector<std::string>(argv + 1, argv + argc));
}

}  // namespace difftts::cli
