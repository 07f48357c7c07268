#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "varipro/errors.hpp"
#include "varipro/grid.hpp"

namespace varipro {

using Vec = std::vector<double>;
using LinOp = std::function<Vec(const Vec&)>;

namespace linalg {

/// Conjugate gradient for a symmetric positive definite operator.
/// Stops when ||Ax - b|| <= tol * max(1, ||b||).
inline Vec conjugate_gradient(const LinOp& apply, const Vec& b, Vec x0, double tol = 1e-10,
                              int max_iters = 2000) {
  Vec x = std::move(x0);
  if (x.empty()) x.assign(b.size(), 0.0);
  Vec r = apply(x);
  for (size_t i = 0; i < b.size(); ++i) r[i] = b[i] - r[i];
  Vec p = r;
  double rs = dot(r, r);
  const double stop = tol * std::max(1.0, norm2(b));
  if (std::sqrt(rs) <= stop) return x;
  for (int it = 0; it < max_iters; ++it) {
    const Vec ap = apply(p);
    const double pap = dot(p, ap);
    if (pap <= 0.0) throw InnerSolveFailure("conjugate_gradient: operator not positive definite");
    const double alpha = rs / pap;
    for (size_t i = 0; i < x.size(); ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    const double rs_new = dot(r, r);
    if (std::sqrt(rs_new) <= stop) return x;
    const double beta = rs_new / rs;
    rs = rs_new;
    for (size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
  }
  throw InnerSolveFailure("conjugate_gradient: no convergence within iteration cap");
}

/// Power iteration estimate of the spectral norm of A (via A*A when the
/// operator is not square-symmetric). Starts from a fixed seeded vector so
/// estimates are reproducible. Returns an estimate of ||A||.
inline double power_norm_estimate(const LinOp& apply, const LinOp& adjoint, size_t domain_dim,
                                  int max_iters = 100, std::uint64_t seed = 0x5eedULL) {
  SplitMix64 rng(seed);
  Vec v(domain_dim);
  for (auto& x : v) x = rng.next_gaussian();
  double nv = norm2(v);
  if (nv == 0.0) return 0.0;
  for (auto& x : v) x /= nv;
  double lambda = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Vec w = adjoint(apply(v));
    const double nw = norm2(w);
    if (nw == 0.0) return 0.0;
    const double lambda_new = nw;  // Rayleigh quotient of A*A for unit v
    for (size_t i = 0; i < w.size(); ++i) v[i] = w[i] / nw;
    if (it > 2 && std::abs(lambda_new - lambda) <= 1e-12 * std::max(1.0, lambda_new)) {
      lambda = lambda_new;
      break;
    }
    lambda = lambda_new;
  }
  return std::sqrt(lambda);
}

/// Modified Gram-Schmidt; near-dependent columns are replaced by fresh
/// seeded random directions so the basis keeps full rank.
inline void orthonormalize(std::vector<Vec>& cols, SplitMix64& rng) {
  for (size_t c = 0; c < cols.size(); ++c) {
    for (size_t k = 0; k < c; ++k) {
      const double proj = dot(cols[c], cols[k]);
      for (size_t i = 0; i < cols[c].size(); ++i) cols[c][i] -= proj * cols[k][i];
    }
    double n = norm2(cols[c]);
    while (n < 1e-14) {
      for (auto& x : cols[c]) x = rng.next_gaussian();
      for (size_t k = 0; k < c; ++k) {
        const double proj = dot(cols[c], cols[k]);
        for (size_t i = 0; i < cols[c].size(); ++i) cols[c][i] -= proj * cols[k][i];
      }
      n = norm2(cols[c]);
    }
    for (auto& x : cols[c]) x /= n;
  }
}

/// Cyclic Jacobi eigendecomposition of a dense symmetric matrix (row-major
/// n x n). Returns eigenvalues ascending; `vectors`, when non-null, receives
/// the matching orthonormal eigenvectors as columns (vectors[i*n+j] is
/// component i of eigenvector j).
inline std::vector<double> jacobi_eigensymmetric(std::vector<double> a, int n,
                                                 std::vector<double>* vectors = nullptr,
                                                 double tol = 1e-12, int max_sweeps = 100) {
  std::vector<double> v;
  if (vectors) {
    v.assign(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) v[static_cast<size_t>(i) * n + i] = 1.0;
  }
  auto off_norm = [&]() {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) s += a[static_cast<size_t>(i) * n + j] * a[static_cast<size_t>(i) * n + j];
    return std::sqrt(2.0 * s);
  };
  double anorm = 0.0;
  for (double x : a) anorm = std::max(anorm, std::abs(x));
  if (anorm == 0.0) anorm = 1.0;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (off_norm() <= tol * anorm * n) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[static_cast<size_t>(p) * n + q];
        if (std::abs(apq) <= tol * anorm * 1e-3) continue;
        const double app = a[static_cast<size_t>(p) * n + p];
        const double aqq = a[static_cast<size_t>(q) * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a[static_cast<size_t>(k) * n + p];
          const double akq = a[static_cast<size_t>(k) * n + q];
          a[static_cast<size_t>(k) * n + p] = c * akp - s * akq;
          a[static_cast<size_t>(k) * n + q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a[static_cast<size_t>(p) * n + k];
          const double aqk = a[static_cast<size_t>(q) * n + k];
          a[static_cast<size_t>(p) * n + k] = c * apk - s * aqk;
          a[static_cast<size_t>(q) * n + k] = s * apk + c * aqk;
        }
        if (vectors) {
          for (int k = 0; k < n; ++k) {
            const double vkp = v[static_cast<size_t>(k) * n + p];
            const double vkq = v[static_cast<size_t>(k) * n + q];
            v[static_cast<size_t>(k) * n + p] = c * vkp - s * vkq;
            v[static_cast<size_t>(k) * n + q] = s * vkp + c * vkq;
          }
        }
      }
    }
  }
  std::vector<double> eig(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) eig[static_cast<size_t>(i)] = a[static_cast<size_t>(i) * n + i];
  // sort ascending, permuting eigenvectors alongside
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](int x, int y) { return eig[static_cast<size_t>(x)] < eig[static_cast<size_t>(y)]; });
  std::vector<double> eig_sorted(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) eig_sorted[static_cast<size_t>(i)] = eig[static_cast<size_t>(order[static_cast<size_t>(i)])];
  if (vectors) {
    vectors->assign(static_cast<size_t>(n) * n, 0.0);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        (*vectors)[static_cast<size_t>(i) * n + j] = v[static_cast<size_t>(i) * n + order[static_cast<size_t>(j)]];
  }
  return eig_sorted;
}

/// Dense LU solve with partial pivoting, used by desk-scale oracles.
inline Vec solve_dense(std::vector<double> a, int n, Vec b) {
  std::vector<int> piv(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) piv[static_cast<size_t>(i)] = i;
  for (int col = 0; col < n; ++col) {
    int best = col;
    double best_abs = std::abs(a[static_cast<size_t>(col) * n + col]);
    for (int r = col + 1; r < n; ++r) {
      const double v = std::abs(a[static_cast<size_t>(r) * n + col]);
      if (v > best_abs) {
        best_abs = v;
        best = r;
      }
    }
    if (best_abs == 0.0) throw InnerSolveFailure("solve_dense: singular matrix");
    if (best != col) {
      for (int j = 0; j < n; ++j) std::swap(a[static_cast<size_t>(col) * n + j], a[static_cast<size_t>(best) * n + j]);
      std::swap(b[static_cast<size_t>(col)], b[static_cast<size_t>(best)]);
    }
    const double d = a[static_cast<size_t>(col) * n + col];
    for (int r = col + 1; r < n; ++r) {
      const double f = a[static_cast<size_t>(r) * n + col] / d;
      if (f == 0.0) continue;
      a[static_cast<size_t>(r) * n + col] = 0.0;
      for (int j = col + 1; j < n; ++j) a[static_cast<size_t>(r) * n + j] -= f * a[static_cast<size_t>(col) * n + j];
      b[static_cast<size_t>(r)] -= f * b[static_cast<size_t>(col)];
    }
  }
  Vec x(static_cast<size_t>(n), 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[static_cast<size_t>(r)];
    for (int j = r + 1; j < n; ++j) s -= a[static_cast<size_t>(r) * n + j] * x[static_cast<size_t>(j)];
    x[static_cast<size_t>(r)] = s / a[static_cast<size_t>(r) * n + r];
  }
  return x;
}

}  // namespace linalg
}  // namespace varipro
