// Copyright (C) 2026 the difftts authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

#include "difftts/matrix.hpp"

namespace difftts {

// Seeded random source. Every sampling routine in the library takes one of
// these explicitly; there is no hidden global state. Independent streams for
// parallel work come from derive().
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(splitmix(seed)) {}

  double normal() { return normal_(gen_); }
  double uniform() { return uniform_(gen_); }  // [0, 1)

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    std::uniform_int_distribution<int> d(lo, hi);
    return d(gen_);
  }

  double rademacher() { return (gen_() & 1ull) ? 1.0 : -1.0; }

  Vec normal_vec(int n) {
    Vec v(static_cast<std::size_t>(n));
    for (double& x : v) x = normal();
    return v;
  }

  void fill_normal(Matrix& m) {
    for (double& x : m.data) x = normal();
  }

  // Child stream reproducibly derived from the root seed and a salt.
  Rng derive(std::uint64_t salt) const { return Rng(splitmix(seed_ + 0x9e3779b97f4a7c15ull * (salt + 1))); }

  std::uint64_t seed() const { return seed_; }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace difftts
