// Copyright (C) 2026 the difftts authors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "difftts/align.hpp"
#include "support.hpp"

using namespace difftts;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  rng.fill_normal(m);
  return m;
}

}  // namespace

TEST_CASE("encoder_loss hand examples") {
  SECTION("zero residual leaves only the normalization constant") {
    Matrix mu_tilde(1, 1);
    mu_tilde(0, 0) = 0.4;
    Matrix y(3, 1, 0.4);
    const Alignment a{{3}};
    CHECK(encoder_loss(mu_tilde, y, a) == Catch::Approx(1.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
    CHECK(encoder_loss(mu_tilde, y, a) == Catch::Approx(2.7568).margin(1e-4));
  }

  SECTION("two tokens, exact and off-by-one alignments") {
    Matrix mu_tilde(2, 1);
    mu_tilde(0, 0) = 0.0;
    mu_tilde(1, 0) = 1.0;
    Matrix y(3, 1);
    y(0, 0) = 0.0;
    y(1, 0) = 0.0;
    y(2, 0) = 1.0;
    const double base = 1.5 * std::log(2.0 * std::numbers::pi);
    CHECK(encoder_loss(mu_tilde, y, Alignment{{2, 1}}) == Catch::Approx(base).epsilon(1e-14));
    CHECK(encoder_loss(mu_tilde, y, Alignment{{1, 2}}) == Catch::Approx(base + 0.5).epsilon(1e-12));
  }

  SECTION("invalid alignment") {
    Matrix mu_tilde(2, 1, 0.0);
    Matrix y(3, 1, 0.0);
    CHECK_THROWS_AS(encoder_loss(mu_tilde, y, Alignment{{3, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(encoder_loss(mu_tilde, y, Alignment{{1, 1}}), std::invalid_argument);
  }
}

TEST_CASE("mas base cases") {
  SECTION("single token takes all frames") {
    Matrix mu_tilde(1, 2, 0.3);
    Rng rng(7);
    const Matrix y = random_matrix(6, 2, rng);
    CHECK(mas(mu_tilde, y) == Alignment{{6}});
  }

  SECTION("worked two-token example") {
    Matrix mu_tilde(2, 1);
    mu_tilde(0, 0) = 0.0;
    mu_tilde(1, 0) = 1.0;
    Matrix y(3, 1);
    y(0, 0) = 0.0;
    y(1, 0) = 0.0;
    y(2, 0) = 1.0;
    CHECK(mas(mu_tilde, y) == Alignment{{2, 1}});
  }

  SECTION("as many tokens as frames forces the identity") {
    Rng rng(8);
    const Matrix mu_tilde = random_matrix(4, 3, rng);
    const Matrix y = random_matrix(4, 3, rng);
    CHECK(mas(mu_tilde, y) == Alignment{{1, 1, 1, 1}});
  }

  SECTION("fewer frames than tokens is an error") {
    Matrix mu_tilde(3, 1, 0.0);
    Matrix y(2, 1, 0.0);
    CHECK_THROWS_AS(mas(mu_tilde, y), std::invalid_argument);
  }
}

TEST_CASE("composition_count") {
  CHECK(composition_count(3, 2) == 2);
  CHECK(composition_count(8, 4) == 35);
  CHECK(composition_count(5, 1) == 1);
  CHECK(composition_count(5, 5) == 1);
}

TEST_CASE("brute force base cases and cap") {
  Rng rng(9);
  SECTION("identity when L == F") {
    const Matrix mu_tilde = random_matrix(3, 2, rng);
    const Matrix y = random_matrix(3, 2, rng);
    CHECK(brute_force_alignment(mu_tilde, y) == Alignment{{1, 1, 1}});
  }
  SECTION("cap exceeded") {
    const Matrix mu_tilde = random_matrix(2, 1, rng);
    const Matrix y = random_matrix(20, 1, rng);
    CHECK_THROWS_AS(brute_force_alignment(mu_tilde, y, 5), std::invalid_argument);
  }
}

TEST_CASE("mas equals exhaustive enumeration on random instances") {
  Rng rng(10);
  for (int dim : {1, 3}) {
    for (int tokens = 1; tokens <= 4; ++tokens)
      for (int frames = tokens; frames <= 8; ++frames)
        for (int rep = 0; rep < 20; ++rep) {
          const Matrix mu_tilde = random_matrix(tokens, dim, rng);
          const Matrix y = random_matrix(frames, dim, rng);
          const Alignment fast = mas(mu_tilde, y);
          const Alignment slow = brute_force_alignment(mu_tilde, y);
          REQUIRE(encoder_loss(mu_tilde, y, fast) == Catch::Approx(encoder_loss(mu_tilde, y, slow)).epsilon(1e-12));
          REQUIRE(fast == slow);
        }
  }
}

TEST_CASE("tie-break picks the lexicographically smallest duration vector") {
  // Identical tokens score every alignment equally.
  Matrix mu_tilde(2, 1, 0.5);
  Matrix y(4, 1, 0.5);
  CHECK(brute_force_alignment(mu_tilde, y) == Alignment{{1, 3}});
  CHECK(mas(mu_tilde, y) == Alignment{{1, 3}});

  Matrix mu_tilde3(3, 1, -0.2);
  Matrix y5(5, 1, -0.2);
  CHECK(brute_force_alignment(mu_tilde3, y5) == Alignment{{1, 1, 3}});
  CHECK(mas(mu_tilde3, y5) == Alignment{{1, 1, 3}});
}

TEST_CASE("alignment outputs are always valid") {
  Rng rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    const int tokens = rng.uniform_int(1, 6);
    const int frames = tokens + rng.uniform_int(0, 10);
    const Matrix mu_tilde = random_matrix(tokens, 2, rng);
    const Matrix y = random_matrix(frames, 2, rng);
    const Alignment a = mas(mu_tilde, y);
    CHECK_NOTHROW(validate(a, tokens, frames));
    const std::vector<int> map = a.frame_to_token();
    CHECK(static_cast<int>(map.size()) == frames);
    CHECK(map.front() == 0);
    CHECK(map.back() == tokens - 1);
    for (std::size_t j = 1; j < map.size(); ++j) {
      CHECK(map[j] >= map[j - 1]);
      CHECK(map[j] - map[j - 1] <= 1);
    }
  }
}

TEST_CASE("translation invariance of the optimal alignment") {
  Rng rng(12);
  for (int rep = 0; rep < 25; ++rep) {
    const Matrix mu_tilde = random_matrix(3, 2, rng);
    const Matrix y = random_matrix(7, 2, rng);
    const Vec shift = rng.normal_vec(2);
    Matrix mu_shifted = mu_tilde, y_shifted = y;
    for (int i = 0; i < mu_shifted.rows; ++i)
      for (int c = 0; c < 2; ++c) mu_shifted(i, c) += shift[c];
    for (int j = 0; j < y_shifted.rows; ++j)
      for (int c = 0; c < 2; ++c) y_shifted(j, c) += shift[c];
    CHECK(mas(mu_tilde, y) == mas(mu_shifted, y_shifted));
  }
}

TEST_CASE("durations_from_alignment") {
  CHECK(durations_from_alignment(Alignment{{2, 1}}) ==
        Vec{std::log(2.0), 0.0});
  CHECK(durations_from_alignment(Alignment{{1, 1, 1}}) == Vec{0.0, 0.0, 0.0});
  CHECK(durations_from_alignment(Alignment{{7}}) == Vec{std::log(7.0)});
}

TEST_CASE("duration_loss") {
  const Vec d{std::log(2.0), 0.0, std::log(3.0)};
  CHECK(duration_loss(d, d) == 0.0);
  Vec off = d;
  for (double& v : off) v += 1.0;
  CHECK(duration_loss(off, d) == Catch::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(duration_loss(Vec{1.0}, d), std::invalid_argument);
}

TEST_CASE("duration predictor gradient matches finite differences") {
  Rng rng(14);
  DurationPredictor dp = DurationPredictor::init(3, 5, rng);
  const Matrix mu_tilde = random_matrix(4, 3, rng);
  const Vec target{0.1, 0.7, 1.2, 0.3};

  Vec grad(dp.params.size(), 0.0);
  {
    const Vec pred = dp.predict(mu_tilde);
    Vec dout(pred.size());
    for (std::size_t r = 0; r < pred.size(); ++r)
      dout[r] = 2.0 * (pred[r] - target[r]) / static_cast<double>(pred.size());
    dp.backward(mu_tilde, dout, grad);
  }
  for (std::size_t i = 0; i < dp.params.size(); ++i) {
    const double fd = testsupport::fd_partial(
        [&](const Vec& p) {
          DurationPredictor probe = dp;
          probe.params = p;
          return duration_loss(probe, mu_tilde, target);
        },
        dp.params, i);
    CHECK(testsupport::close_rel(grad[i], fd, 1e-4, 1e-8));
  }
}

TEST_CASE("expand_encoded") {
  Rng rng(15);
  const Matrix mu_tilde = random_matrix(2, 3, rng);

  SECTION("unit durations reproduce the input") {
    CHECK(expand_encoded(mu_tilde, {1, 1}) == mu_tilde);
  }

  SECTION("rows repeat in order") {
    const Matrix out = expand_encoded(mu_tilde, {2, 1});
    REQUIRE(out.rows == 3);
    CHECK(out.row_vec(0) == mu_tilde.row_vec(0));
    CHECK(out.row_vec(1) == mu_tilde.row_vec(0));
    CHECK(out.row_vec(2) == mu_tilde.row_vec(1));
  }

  SECTION("durations round-trip through the implied alignment") {
    const std::vector<int> durations{3, 1, 4};
    const Alignment a{durations};
    const Vec log_d = durations_from_alignment(a);
    CHECK(scale_durations(log_d, 1.0) == durations);
  }

  SECTION("invalid durations") {
    CHECK_THROWS_AS(expand_encoded(mu_tilde, {0, 2}), std::invalid_argument);
    CHECK_THROWS_AS(expand_encoded(mu_tilde, {1, 1, 1}), std::invalid_argument);
  }
}

TEST_CASE("scale_durations") {
  const Vec d{std::log(2.0), 0.0};
  CHECK(scale_durations(d, 1.0) == std::vector<int>{2, 1});
  CHECK(scale_durations(d, 2.0) == std::vector<int>{4, 2});
  CHECK(scale_durations(Vec{0.0}, 0.1) == std::vector<int>{1});  // floor at one frame
  CHECK(scale_durations(Vec{std::log(2.5)}, 1.0) == std::vector<int>{3});  // round half up
  CHECK_THROWS_AS(scale_durations(d, 0.0), std::domain_error);
  CHECK_THROWS_AS(scale_durations(d, -2.0), std::domain_error);
}
