#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "protoflow/errors.hpp"

namespace protoflow {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::size_t size() const { return data.size(); }
};

inline bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline bool all_finite(const Matrix& m) { return all_finite(m.data); }

inline double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw ShapeError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

inline Vec add(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw ShapeError("add: size mismatch");
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline Vec sub(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw ShapeError("sub: size mismatch");
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline Vec scale(const Vec& a, double s) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * s;
  return r;
}

// y += s * x
inline void axpy(double s, const Vec& x, Vec& y) {
  if (x.size() != y.size()) throw ShapeError("axpy: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

// y = M x
inline Vec matvec(const Matrix& m, const Vec& x) {
  if (x.size() != m.cols) throw ShapeError("matvec: cols mismatch");
  Vec y(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    double s = 0.0;
    const double* row = m.data.data() + r * m.cols;
    for (std::size_t c = 0; c < m.cols; ++c) s += row[c] * x[c];
    y[r] = s;
  }
  return y;
}

// y = M^T x
inline Vec matvec_t(const Matrix& m, const Vec& x) {
  if (x.size() != m.rows) throw ShapeError("matvec_t: rows mismatch");
  Vec y(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m.data.data() + r * m.cols;
    for (std::size_t c = 0; c < m.cols; ++c) y[c] += row[c] * x[r];
  }
  return y;
}

// M += s * (a b^T)
inline void outer_acc(Matrix& m, double s, const Vec& a, const Vec& b) {
  if (a.size() != m.rows || b.size() != m.cols) throw ShapeError("outer_acc: shape mismatch");
  for (std::size_t r = 0; r < m.rows; ++r) {
    double* row = m.data.data() + r * m.cols;
    const double sa = s * a[r];
    for (std::size_t c = 0; c < m.cols; ++c) row[c] += sa * b[c];
  }
}

}  // namespace protoflow
