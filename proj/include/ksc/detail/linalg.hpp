#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "ksc/errors.hpp"

namespace ksc::detail {

/// Dense row-major square matrix paired with its dimension.
struct SquareMatrix {
  std::size_t n = 0;
  std::vector<double> a; // row-major, n*n

  explicit SquareMatrix(std::size_t dim) : n(dim), a(dim * dim, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

/// LU factorization with partial pivoting, in place. Returns the row
/// permutation. Throws numerical_error when a pivot falls below
/// `pivot_tol` times the largest initial row magnitude.
inline std::vector<std::size_t> lu_factor(SquareMatrix& m, double pivot_tol = 1e-12) {
  const std::size_t n = m.n;
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;

  double scale = 0.0;
  for (double v : m.a) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) throw numerical_error("lu_factor: zero matrix");

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(m(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::abs(m(i, k));
      if (v > best) { best = v; piv = i; }
    }
    if (best < pivot_tol * scale)
      throw numerical_error("lu_factor: singular system (pivot " + std::to_string(best) +
                            " at column " + std::to_string(k) + ")");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m(k, j), m(piv, j));
      std::swap(perm[k], perm[piv]);
    }
    const double inv = 1.0 / m(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = m(i, k) * inv;
      m(i, k) = f;
      if (f == 0.0) continue;
      double* ri = &m.a[i * n];
      const double* rk = &m.a[k * n];
      for (std::size_t j = k + 1; j < n; ++j) ri[j] -= f * rk[j];
    }
  }
  return perm;
}

/// Solve with a factorization produced by lu_factor.
inline void lu_solve(const SquareMatrix& lu, const std::vector<std::size_t>& perm,
                     const double* b, double* x) {
  const std::size_t n = lu.n;
  for (std::size_t i = 0; i < n; ++i) x[i] = b[perm[i]];
  for (std::size_t i = 1; i < n; ++i) {
    double s = x[i];
    const double* row = &lu.a[i * n];
    for (std::size_t j = 0; j < i; ++j) s -= row[j] * x[j];
    x[i] = s;
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = x[i];
    const double* row = &lu.a[i * n];
    for (std::size_t j = i + 1; j < n; ++j) s -= row[j] * x[j];
    x[i] = s / row[i];
  }
}

/// One-shot dense solve; `m` and `b` are copied.
inline std::vector<double> solve_dense(SquareMatrix m, const std::vector<double>& b,
                                       double pivot_tol = 1e-12) {
  auto perm = lu_factor(m, pivot_tol);
  std::vector<double> x(m.n);
  lu_solve(m, perm, b.data(), x.data());
  return x;
}

/// Cholesky factorization of a symmetric positive-definite matrix (lower
/// triangle is written). Returns false when a diagonal pivot is not positive.
inline bool cholesky(SquareMatrix& m) {
  const std::size_t n = m.n;
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= m(j, k) * m(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double l = std::sqrt(d);
    m(j, j) = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= m(i, k) * m(j, k);
      m(i, j) = s / l;
    }
  }
  return true;
}

/// Solve L L^T x = b given a cholesky() factor.
inline void cholesky_solve(const SquareMatrix& l, const double* b, double* x) {
  const std::size_t n = l.n;
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t j = 0; j < i; ++j) s -= l(i, j) * x[j];
    x[i] = s / l(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = x[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= l(j, i) * x[j];
    x[i] = s / l(i, i);
  }
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi sweeps.
inline std::vector<double> symmetric_eigenvalues(SquareMatrix m, std::size_t max_sweeps = 64) {
  const std::size_t n = m.n;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += m(i, j) * m(i, j);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = m(p, q);
        if (apq == 0.0) continue;
        const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = m(k, p), akq = m(k, q);
          m(k, p) = c * akp - s * akq;
          m(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = m(p, k), aqk = m(q, k);
          m(p, k) = c * apk - s * aqk;
          m(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = m(i, i);
  return eig;
}

/// Kahan compensated accumulator for deterministic reductions.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double v) {
    const double y = v - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

} // namespace ksc::detail
