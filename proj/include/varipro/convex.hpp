#pragma once

#include <cmath>
#include <functional>

#include "varipro/grid.hpp"

namespace varipro {

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

/// Pixelwise projection onto the l2 ball of radius `alpha`; the prox of the
/// TV conjugate indicator in the dual ROF problem.
inline VectorField project_ball(const VectorField& p, double alpha) {
  if (alpha <= 0.0) throw DomainViolation("project_ball: radius must be positive");
  VectorField q = p;
  for (size_t k = 0; k < q.px.size(); ++k) {
    const double mag = std::hypot(q.px[k], q.py[k]);
    if (mag > alpha) {
      const double s = alpha / mag;
      q.px[k] *= s;
      q.py[k] *= s;
    }
  }
  return q;
}

/// A prox map on grids: (v, tau) -> prox_{tau J}(v).
using GridProx = std::function<GridImage(const GridImage&, double)>;

/// Residual of Moreau's identity
///   v = prox_{tau J}(v) + tau * prox_{J*/tau}(v/tau),
/// zero (up to rounding) exactly when the two maps are a conjugate pair.
inline double moreau_residual(const GridProx& prox_j, const GridProx& prox_jstar,
                              const GridImage& v, double tau) {
  if (tau <= 0.0) throw DomainViolation("moreau_residual: tau must be positive");
  const GridImage a = prox_j(v, tau);
  GridImage scaled = v;
  for (auto& x : scaled.data) x /= tau;
  const GridImage b = prox_jstar(scaled, 1.0 / tau);
  double s = 0.0;
  for (size_t k = 0; k < v.data.size(); ++k) {
    const double r = v.data[k] - a.data[k] - tau * b.data[k];
    s += r * r;
  }
  return std::sqrt(s);
}

/// Gradient of the Moreau-Yosida envelope J_tau at v:
///   grad J_tau(v) = (v - prox_{tau J}(v)) / tau.
inline GridImage moreau_yosida_grad(const GridProx& prox_j, const GridImage& v, double tau) {
  if (tau <= 0.0) throw DomainViolation("moreau_yosida_grad: tau must be positive");
  const GridImage p = prox_j(v, tau);
  GridImage g = v;
  for (size_t k = 0; k < g.data.size(); ++k) g.data[k] = (v.data[k] - p.data[k]) / tau;
  return g;
}

}  // namespace varipro
