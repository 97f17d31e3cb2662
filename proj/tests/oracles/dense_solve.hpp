#pragma once

// Test-only dense solver, kept deliberately independent of
// ksc::detail::lu_factor: plain Gauss-Jordan elimination on the augmented
// matrix with full row pivoting by absolute value.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace oracle {

inline std::vector<double> gauss_jordan_solve(std::vector<std::vector<double>> a,
                                              std::vector<double> b) {
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) a[i].push_back(b[i]);

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) < 1e-14) throw std::runtime_error("oracle: singular matrix");
    std::swap(a[col], a[piv]);
    const double d = a[col][col];
    for (std::size_t c = col; c <= n; ++c) a[col][c] /= d;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c <= n; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = a[i][n];
  return x;
}

/// Ordinary-kriging weights from first principles: assemble
/// [Gamma 1; 1^T 0] [w; mu] = [gamma0; 1] and solve it with the oracle
/// solver. `gamma(i, j)` evaluates the variogram between samples, and
/// `gamma0(i)` between sample i and the target.
template <typename GammaFn, typename Gamma0Fn>
std::vector<double> ok_weights(std::size_t k, GammaFn&& gamma, Gamma0Fn&& gamma0) {
  std::vector<std::vector<double>> a(k + 1, std::vector<double>(k + 1, 0.0));
  std::vector<double> b(k + 1, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) a[i][j] = i == j ? 0.0 : gamma(i, j);
    a[i][k] = 1.0;
    a[k][i] = 1.0;
    b[i] = gamma0(i);
  }
  b[k] = 1.0;
  return gauss_jordan_solve(std::move(a), std::move(b)); // k weights then mu
}

} // namespace oracle
