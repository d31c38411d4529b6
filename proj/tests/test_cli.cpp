// Copyright (C) 2026 the difftts authors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "difftts/cli.hpp"

using namespace difftts;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& tail = "") const { return (path / tail).string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(std::initializer_list<std::string> args) { return cli::run(std::vector<std::string>(args)); }

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run_cli({"no-such-command"}) == 2);
  CHECK(run_cli({}) == 2);
  CHECK(run_cli({"simulate", "--bogus-flag", "1"}) == 2);
}

TEST_CASE("help exits cleanly") {
  CHECK(run_cli({"--help"}) == 0);
  CHECK(run_cli({"bench", "--help"}) == 0);
}

TEST_CASE("config and validation failures exit with 3") {
  CHECK(run_cli({"train", "--config", "missing.json", "--corpus", "nowhere"}) == 3);

  TempDir tmp("difftts_cli_cfg");
  {
    std::ofstream cfg(tmp.str("bad.json"));
    cfg << R"({"schedule": {"beta1": 0.01}})";
  }
  // terminal decay too weak -> rejected before any work
  CHECK(run_cli({"simulate", "--config", tmp.str("bad.json"), "--x0", "0", "--mu", "1", "--out",
                 tmp.str("p.csv")}) == 3);
  CHECK_FALSE(fs::exists(tmp.str("p.csv")));
}

TEST_CASE("gen-corpus is byte-identical under a fixed seed") {
  TempDir tmp("difftts_cli_gen");
  CHECK(run_cli({"gen-corpus", "--seed", "7", "--size", "5", "--out", tmp.str("a")}) == 0);
  CHECK(run_cli({"gen-corpus", "--seed", "7", "--size", "5", "--out", tmp.str("b")}) == 0);
  CHECK(run_cli({"gen-corpus", "--seed", "8", "--size", "5", "--out", tmp.str("c")}) == 0);
  CHECK(slurp(tmp.str("a") + "/manifest.json") == slurp(tmp.str("b") + "/manifest.json"));
  CHECK(slurp(tmp.str("a") + "/item_0000.csv") == slurp(tmp.str("b") + "/item_0000.csv"));
  CHECK(slurp(tmp.str("a") + "/item_0000.csv") != slurp(tmp.str("c") + "/item_0000.csv"));

  const SyntheticCorpus reloaded = load_corpus(tmp.str("a"));
  CHECK(reloaded.items.size() == 5);
}

TEST_CASE("simulate writes a re-readable path CSV") {
  TempDir tmp("difftts_cli_sim");
  CHECK(run_cli({"simulate", "--x0", "0,0", "--mu", "1,-1", "--steps", "50", "--seed", "3", "--out",
                 tmp.str("path.csv")}) == 0);
  std::vector<std::string> header;
  const Matrix path = read_matrix_csv(tmp.str("path.csv"), &header);
  CHECK(header == std::vector<std::string>{"t", "x_1", "x_2"});
  CHECK(path.rows == 51);
  CHECK(path(0, 0) == 0.0);
  CHECK(path(50, 0) == Catch::Approx(1.0));
}

TEST_CASE("align round-trips through CSV files") {
  TempDir tmp("difftts_cli_align");
  Matrix mu_tilde(2, 1);
  mu_tilde(0, 0) = 0.0;
  mu_tilde(1, 0) = 1.0;
  Matrix y(3, 1);
  y(0, 0) = 0.0;
  y(1, 0) = 0.0;
  y(2, 0) = 1.0;
  write_matrix_csv(tmp.str("mu.csv"), {"x_1"}, mu_tilde);
  write_matrix_csv(tmp.str("y.csv"), {"x_1"}, y);
  CHECK(run_cli({"align", "--encoded", tmp.str("mu.csv"), "--features", tmp.str("y.csv"), "--out",
                 tmp.str("durations.csv")}) == 0);
  std::vector<std::string> header;
  const Matrix durations = read_matrix_csv(tmp.str("durations.csv"), &header);
  CHECK(header == std::vector<std::string>{"token", "frames"});
  REQUIRE(durations.rows == 2);
  CHECK(durations(0, 1) == 2.0);
  CHECK(durations(1, 1) == 1.0);
}

TEST_CASE("train, infer, loglik and bench operate on real artifacts") {
  TempDir tmp("difftts_cli_train");
  // tiny corpus and model so the whole chain stays fast
  CHECK(run_cli({"gen-corpus", "--seed", "5", "--size", "8", "--vocab", "4", "--dim", "3", "--out",
                 tmp.str("corpus")}) == 0);
  {
    std::ofstream cfg(tmp.str("config.json"));
    cfg << R"({
      "model": {"vocab": 4, "dim": 3, "score_hidden": [12, 12], "time_dim": 4, "dp_hidden": 4},
      "corpus": {"vocab": 4, "dim": 3},
      "training": {"iters": 40, "batch": 4, "lr": 0.001, "segment_frames": 8}
    })";
  }
  CHECK(run_cli({"train", "--config", tmp.str("config.json"), "--corpus", tmp.str("corpus"), "--out",
                 tmp.str("run"), "--seed", "11"}) == 0);
  CHECK(fs::exists(tmp.str("run") + "/checkpoint.bin"));
  CHECK(fs::exists(tmp.str("run") + "/loss_curve.csv"));
  CHECK(fs::exists(tmp.str("run") + "/run_manifest.json"));

  std::vector<std::string> header;
  const Matrix curve = read_matrix_csv(tmp.str("run") + "/loss_curve.csv", &header);
  CHECK(curve.rows == 40);

  SECTION("checkpoints reload into an identical model") {
    const TtsModel model = load_checkpoint(tmp.str("run") + "/checkpoint.bin");
    CHECK(model.encoder.vocab == 4);
    CHECK(model.spec.dim == 3);
  }

  SECTION("infer produces features and an optional trace") {
    CHECK(run_cli({"infer", "--model", tmp.str("run") + "/checkpoint.bin", "--tokens", "0,1,2,3",
                   "--steps", "20", "--seed", "9", "--out", tmp.str("features.csv"), "--trace",
                   tmp.str("trace.csv")}) == 0);
    const Matrix features = read_matrix_csv(tmp.str("features.csv"), &header);
    CHECK(features.cols == 3);
    CHECK(features.rows >= 4);
    const Matrix trace = read_matrix_csv(tmp.str("trace.csv"), &header);
    CHECK(header == std::vector<std::string>{"step", "t", "rms"});
    CHECK(trace.rows == 21);  // terminal row plus one per step

    SECTION("same seed, same output") {
      CHECK(run_cli({"infer", "--model", tmp.str("run") + "/checkpoint.bin", "--tokens", "0,1,2,3",
                     "--steps", "20", "--seed", "9", "--out", tmp.str("features2.csv")}) == 0);
      CHECK(slurp(tmp.str("features.csv")) == slurp(tmp.str("features2.csv")));
    }
  }

  SECTION("loglik writes its estimate") {
    CHECK(run_cli({"loglik", "--model", tmp.str("run") + "/checkpoint.bin", "--corpus", tmp.str("corpus"),
                   "--items", "3", "--steps", "60", "--probes", "8", "--seed", "2", "--out",
                   tmp.str("loglik.csv")}) == 0);
    const Matrix ll = read_matrix_csv(tmp.str("loglik.csv"), &header);
    CHECK(header == std::vector<std::string>{"items", "steps", "probes", "value", "std_error"});
    REQUIRE(ll.rows == 1);
    CHECK(std::isfinite(ll(0, 3)));
  }

  SECTION("bench on the trained model emits one row per step count") {
    CHECK(run_cli({"bench", "--model", tmp.str("run") + "/checkpoint.bin", "--corpus", tmp.str("corpus"),
                   "--steps", "4,8", "--reps", "2", "--samples", "3", "--seed", "1", "--out",
                   tmp.str("bench_model.csv")}) == 0);
    const Matrix rows = read_matrix_csv(tmp.str("bench_model.csv"), &header);
    CHECK(rows.rows == 2);
    CHECK(rows(0, 0) == 4.0);
    CHECK(rows(1, 0) == 8.0);
  }
}

TEST_CASE("bench with the analytic score fills every column") {
  TempDir tmp("difftts_cli_bench");
  CHECK(run_cli({"bench", "--steps", "4,16", "--reps", "2", "--samples", "300", "--seed", "21", "--out",
                 tmp.str("bench.csv")}) == 0);
  std::vector<std::string> header;
  const Matrix rows = read_matrix_csv(tmp.str("bench.csv"), &header);
  CHECK(header == std::vector<std::string>{"steps", "samples", "reps", "mean_error", "sd_error",
                                           "mean_ms_per_sample", "sd_ms_per_sample"});
  REQUIRE(rows.rows == 2);
  CHECK(rows(0, 3) > 0.0);
  CHECK(rows(1, 3) > 0.0);

  SECTION("a single repetition zeroes the spread columns") {
    CHECK(run_cli({"bench", "--steps", "4", "--reps", "1", "--samples", "200", "--seed", "22", "--out",
                   tmp.str("bench1.csv")}) == 0);
    const Matrix one = read_matrix_csv(tmp.str("bench1.csv"), &header);
    REQUIRE(one.rows == 1);
    CHECK(one(0, 4) == 0.0);
    CHECK(one(0, 6) == 0.0);
  }
}

TEST_CASE("numerical failures exit with 4") {
  TempDir tmp("difftts_cli_nan");
  Rng rng(1);
  ModelArch arch;
  arch.vocab = 3;
  arch.dim = 2;
  arch.score_hidden = {4};
  arch.time_dim = 4;
  arch.dp_hidden = 2;
  TtsModel model = make_model(arch, NoiseSchedule{}, rng);
  for (double& p : model.score_net.params) p = std::numeric_limits<double>::quiet_NaN();
  save_checkpoint(tmp.str("nan.bin"), model);
  CHECK(run_cli({"infer", "--model", tmp.str("nan.bin"), "--tokens", "0,1", "--steps", "4", "--out",
                 tmp.str("f.csv")}) == 4);
}

TEST_CASE("environment variable sets the default output directory") {
  TempDir tmp("difftts_cli_env");
  setenv("DIFFTTS_OUT_DIR", tmp.str("envout").c_str(), 1);
  CHECK(run_cli({"simulate", "--x0", "0", "--mu", "1", "--steps", "10", "--seed", "1"}) == 0);
  unsetenv("DIFFTTS_OUT_DIR");
  CHECK(fs::exists(tmp.str("envout") + "/path.csv"));
}
