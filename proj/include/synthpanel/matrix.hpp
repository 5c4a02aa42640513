#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace synthpanel {

/// Dense row-major matrix. The panels handled here are tiny (tens of rows
/// and columns), so this deliberately stays a flat std::vector with index
/// arithmetic and no expression machinery.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data).subspan(r * cols, cols);
  }

  std::vector<double> col(std::size_t c) const {
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = (*this)(r, c);
    return out;
  }

  Matrix transposed() const {
    Matrix t(cols, rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) t(c, r) = (*this)(r, c);
    return t;
  }
};

inline std::vector<double> mat_vec(const Matrix& a, std::span<const double> x) {
  if (x.size() != a.cols) throw std::invalid_argument("mat_vec: dimension mismatch");
  std::vector<double> y(a.rows, 0.0);
  for (std::size_t r = 0; r < a.rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < a.cols; ++c) acc += a(r, c) * x[c];
    y[r] = acc;
  }
  return y;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

/// Gram matrix A'A and right-hand side A'b of a least-squares problem.
inline void normal_equations(const Matrix& a, std::span<const double> b, Matrix& gram,
                             std::vector<double>& rhs) {
  if (b.size() != a.rows) throw std::invalid_argument("normal_equations: dimension mismatch");
  gram = Matrix(a.cols, a.cols);
  rhs.assign(a.cols, 0.0);
  for (std::size_t i = 0; i < a.cols; ++i) {
    for (std::size_t j = i; j < a.cols; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < a.rows; ++r) acc += a(r, i) * a(r, j);
      gram(i, j) = acc;
      gram(j, i) = acc;
    }
    double acc = 0.0;
    for (std::size_t r = 0; r < a.rows; ++r) acc += a(r, i) * b[r];
    rhs[i] = acc;
  }
}

/// Solves m x = rhs in place via Gaussian elimination with partial pivoting.
/// Returns false when a pivot falls below the singularity threshold.
inline bool solve_linear_system(Matrix m, std::vector<double> rhs, std::vector<double>& x) {
  const std::size_t n = m.rows;
  if (m.cols != n || rhs.size() != n) throw std::invalid_argument("solve_linear_system: not square");
  double scale = 0.0;
  for (double v : m.data) scale = std::max(scale, std::abs(v));
  const double tiny = 1e-13 * std::max(scale, 1.0);

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t r = k + 1; r < n; ++r)
      if (std::abs(m(r, k)) > std::abs(m(piv, k))) piv = r;
    if (std::abs(m(piv, k)) <= tiny) return false;
    if (piv != k) {
      for (std::size_t c = k; c < n; ++c) std::swap(m(k, c), m(piv, c));
      std::swap(rhs[k], rhs[piv]);
    }
    for (std::size_t r = k + 1; r < n; ++r) {
      double f = m(r, k) / m(k, k);
      if (f == 0.0) continue;
      for (std::size_t c = k; c < n; ++c) m(r, c) -= f * m(k, c);
      rhs[r] -= f * rhs[k];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t ri = n; ri-- > 0;) {
    double acc = rhs[ri];
    for (std::size_t c = ri + 1; c < n; ++c) acc -= m(ri, c) * x[c];
    x[ri] = acc / m(ri, ri);
  }
  return true;
}

}  // namespace synthpanel
