// Copyright (C) 2026 the difftts authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace difftts {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. By convention rows are frames and
// columns are feature coordinates.
struct Matrix {
  int rows = 0;
  int cols = 0;
  Vec data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {
    if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative shape");
  }

  double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

  std::span<double> row(int i) {
    return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)};
  }
  std::span<const double> row(int i) const {
    return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)};
  }

  Vec row_vec(int i) const {
    auto r = row(i);
    return Vec(r.begin(), r.end());
  }
  void set_row(int i, std::span<const double> v) {
    for (int j = 0; j < cols; ++j) (*this)(i, j) = v[j];
  }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  bool operator==(const Matrix& o) const = default;
};

inline Matrix matrix_from_rows(const std::vector<Vec>& rows) {
  if (rows.empty()) return {};
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (int i = 0; i < m.rows; ++i) {
    if (static_cast<int>(rows[i].size()) != m.cols)
      throw std::invalid_argument("matrix_from_rows: ragged rows");
    m.set_row(i, rows[i]);
  }
  return m;
}

inline Matrix matrix_from_row(const Vec& v) {
  Matrix m(1, static_cast<int>(v.size()));
  m.set_row(0, v);
  return m;
}

inline bool all_finite(const Matrix& m) {
  for (double v : m.data)
    if (!std::isfinite(v)) return false;
  return true;
}

inline bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline double max_abs(const Matrix& m) {
  double r = 0.0;
  for (double v : m.data) r = std::max(r, std::abs(v));
  return r;
}

inline double max_abs(const Vec& v) {
  double r = 0.0;
  for (double x : v) r = std::max(r, std::abs(x));
  return r;
}

inline void check_same_shape(const Matrix& a, const Matrix& b, const char* where) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(where) + ": shape mismatch");
}

inline void check_length(const Vec& v, std::size_t n, const char* where) {
  if (v.size() != n) throw std::invalid_argument(std::string(where) + ": length mismatch");
}

}  // namespace difftts
