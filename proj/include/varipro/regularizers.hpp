#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "varipro/convex.hpp"
#include "varipro/errors.hpp"
#include "varipro/solvers.hpp"

namespace varipro {

enum class RegKind { tikhonov_l2, tikhonov_grad, tv_iso, tv_aniso, proto_dist };

/// Regularization functional alpha * R0(u):
///   tikhonov_l2:   R0 = 0.5*||u||^2
///   tikhonov_grad: R0 = 0.5*sum |grad u|^2
///   tv_iso:        R0 = sum_ij sqrt(px^2 + py^2)
///   tv_aniso:      R0 = sum_ij |px| + |py|
///   proto_dist:    R0 = min_j ||u - proto_j|| + rho0*||u||^2
struct Regularizer {
  RegKind kind = RegKind::tv_iso;
  double weight = 1.0;
  std::vector<GridImage> prototypes;  // proto_dist only
  double rho0 = 0.0;                  // optional coercivity term for proto_dist
};

inline Regularizer make_regularizer(RegKind kind, double alpha) {
  if (alpha <= 0.0) throw DomainViolation("regularizer: weight must be positive");
  if (kind == RegKind::proto_dist) throw DomainViolation("regularizer: proto_dist needs prototypes");
  return Regularizer{kind, alpha, {}, 0.0};
}

inline Regularizer make_proto_regularizer(double alpha, std::vector<GridImage> prototypes,
                                          double rho0 = 0.0) {
  if (alpha <= 0.0) throw DomainViolation("regularizer: weight must be positive");
  if (prototypes.empty()) throw DomainViolation("regularizer: prototype list must be non-empty");
  if (rho0 < 0.0) throw DomainViolation("regularizer: rho0 must be nonnegative");
  return Regularizer{RegKind::proto_dist, alpha, std::move(prototypes), rho0};
}

namespace detail {

inline double min_prototype_distance(const Regularizer& r, const GridImage& u, size_t* index = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  size_t best_j = 0;
  for (size_t j = 0; j < r.prototypes.size(); ++j) {
    const GridImage& p = r.prototypes[j];
    if (p.width != u.width || p.height != u.height) throw ShapeMismatch("proto_dist: prototype shape mismatch");
    double s = 0.0;
    for (size_t k = 0; k < u.data.size(); ++k) {
      const double d = u.data[k] - p.data[k];
      s += d * d;
    }
    s = std::sqrt(s);
    if (s < best) {  // strict: ties keep the lowest index
      best = s;
      best_j = j;
    }
  }
  if (index) *index = best_j;
  return best;
}

}  // namespace detail

inline double reg_value(const Regularizer& r, const GridImage& u) {
  switch (r.kind) {
    case RegKind::tikhonov_l2: {
      double s = 0.0;
      for (double v : u.data) s += v * v;
      return r.weight * 0.5 * s;
    }
    case RegKind::tikhonov_grad: {
      const VectorField g = gradient(u);
      double s = 0.0;
      for (size_t k = 0; k < g.px.size(); ++k) s += g.px[k] * g.px[k] + g.py[k] * g.py[k];
      return r.weight * 0.5 * s;
    }
    case RegKind::tv_iso: {
      const VectorField g = gradient(u);
      double s = 0.0;
      for (size_t k = 0; k < g.px.size(); ++k) s += std::hypot(g.px[k], g.py[k]);
      return r.weight * s;
    }
    case RegKind::tv_aniso: {
      const VectorField g = gradient(u);
      double s = 0.0;
      for (size_t k = 0; k < g.px.size(); ++k) s += std::abs(g.px[k]) + std::abs(g.py[k]);
      return r.weight * s;
    }
    case RegKind::proto_dist: {
      double s = r.weight * detail::min_prototype_distance(r, u);
      if (r.rho0 > 0.0) {
        double q = 0.0;
        for (double v : u.data) q += v * v;
        s += r.weight * r.rho0 * q;
      }
      return s;
    }
  }
  return 0.0;
}

struct SubgradientResult {
  GridImage element;
  bool smooth = true;  // false where the gradient magnitude fell below eps
};

/// A subdifferential element. TV uses the selection -div(grad u / |grad u|)
/// with the magnitude floored at eps = 1e-8; pixels below the floor are
/// flagged via `smooth = false`.
inline SubgradientResult reg_subgradient(const Regularizer& r, const GridImage& u) {
  constexpr double eps = 1e-8;
  switch (r.kind) {
    case RegKind::tikhonov_l2: {
      GridImage g = u;
      for (auto& v : g.data) v *= r.weight;
      return {std::move(g), true};
    }
    case RegKind::tikhonov_grad: {
      GridImage g = divergence(gradient(u), u.spacing);
      for (auto& v : g.data) v *= -r.weight;
      return {std::move(g), true};
    }
    case RegKind::tv_iso: {
      VectorField g = gradient(u);
      bool smooth = true;
      for (int i = 0; i < u.height; ++i) {
        for (int j = 0; j < u.width; ++j) {
          const size_t k = static_cast<size_t>(i) * u.width + j;
          const double mag = std::hypot(g.px[k], g.py[k]);
          // pixels whose forward differences exist but vanish sit at the
          // kink of |.|; structurally absent boundary entries do not count
          const bool has_any = (j < u.width - 1) || (i < u.height - 1);
          if (has_any && mag < eps) smooth = false;
          const double s = 1.0 / std::max(mag, eps);
          g.px[k] *= s;
          g.py[k] *= s;
        }
      }
      GridImage out = divergence(g, u.spacing);
      for (auto& v : out.data) v *= -r.weight;
      return {std::move(out), smooth};
    }
    case RegKind::tv_aniso: {
      VectorField g = gradient(u);
      bool smooth = true;
      for (int i = 0; i < u.height; ++i) {
        for (int j = 0; j < u.width; ++j) {
          const size_t k = static_cast<size_t>(i) * u.width + j;
          if (j < u.width - 1 && std::abs(g.px[k]) < eps) smooth = false;
          if (i < u.height - 1 && std::abs(g.py[k]) < eps) smooth = false;
          g.px[k] = (g.px[k] > 0.0) ? 1.0 : (g.px[k] < 0.0 ? -1.0 : 0.0);
          g.py[k] = (g.py[k] > 0.0) ? 1.0 : (g.py[k] < 0.0 ? -1.0 : 0.0);
        }
      }
      GridImage out = divergence(g, u.spacing);
      for (auto& v : out.data) v *= -r.weight;
      return {std::move(out), smooth};
    }
    case RegKind::proto_dist:
      throw Unsupported("reg_subgradient: proto_dist has no implemented subgradient");
  }
  throw Unsupported("reg_subgradient: unknown kind");
}

namespace detail {

/// TV prox through the dual ROF problem: PDHG on
///   min_u  w * TV(u) + 0.5*||u - v||^2,   w = tau * alpha,
/// returning u = v + div p from the dual iterate, which is exact at the
/// saddle point.
inline GridImage tv_prox_dual(const GridImage& v, double w, bool isotropic, int max_iters = 20000) {
  if (w <= 0.0) return v;
  const int width = v.width, height = v.height;
  const LinearMap grad_map = make_gradient_map(width, height, v.spacing);

  DualTerm J;
  J.value = [w, isotropic, width, height](const Vec& z) {
    const VectorField f = to_field(z, width, height);
    double s = 0.0;
    for (size_t k = 0; k < f.px.size(); ++k)
      s += isotropic ? std::hypot(f.px[k], f.py[k]) : (std::abs(f.px[k]) + std::abs(f.py[k]));
    return w * s;
  };
  J.conj_prox = [w, isotropic, width, height](const Vec& q, double) {
    if (isotropic) return flatten(project_ball(to_field(q, width, height), w));
    Vec out = q;
    for (auto& x : out) x = std::clamp(x, -w, w);
    return out;
  };
  const Vec vdata = v.data;
  PrimalTerm H;
  H.value = [vdata](const Vec& u) {
    double s = 0.0;
    for (size_t k = 0; k < u.size(); ++k) {
      const double d = u[k] - vdata[k];
      s += 0.5 * d * d;
    }
    return s;
  };
  H.prox = [vdata](const Vec& z, double t) {
    Vec out(z.size());
    for (size_t k = 0; k < z.size(); ++k) out[k] = (z[k] + t * vdata[k]) / (1.0 + t);
    return out;
  };

  SolverConfig cfg;
  cfg.max_iters = max_iters;
  cfg.tol = 1e-11 * std::max(1.0, norm2(vdata));
  cfg.criterion = StopCriterion::fixed_point_residual;
  PdhgResult res = pdhg(J, H, grad_map, vdata, Vec(static_cast<size_t>(2) * width * height, 0.0), cfg);
  if (res.trace.status != SolverStatus::converged)
    throw ConvergenceFailure("tv_prox: inner PDHG hit the iteration cap");
  // primal solution from the dual relation u = v - grad^* p = v + div p
  const Vec gsp = grad_map.adjoint(res.p);
  GridImage out = v;
  for (size_t k = 0; k < out.data.size(); ++k) out.data[k] = vdata[k] - gsp[k];
  return out;
}

}  // namespace detail

/// prox_{tau * alpha * R0}(v). The TV cases run the dual PDHG solve; the
/// quadratic cases are closed-form or a conjugate-gradient solve.
inline GridImage reg_prox(const Regularizer& r, const GridImage& v, double tau) {
  if (tau <= 0.0) throw DomainViolation("reg_prox: tau must be positive");
  const double t = tau * r.weight;
  switch (r.kind) {
    case RegKind::tikhonov_l2: {
      GridImage out = v;
      for (auto& x : out.data) x /= (1.0 + t);
      return out;
    }
    case RegKind::tikhonov_grad: {
      // (I - t*Laplacian) u = v, SPD since -Laplacian = grad^* grad
      const int w = v.width, h = v.height;
      const double spacing = v.spacing;
      auto op = [t, w, h, spacing](const Vec& x) {
        const GridImage img = to_image(x, w, h, spacing);
        const GridImage lap = divergence(gradient(img), spacing);
        Vec out(x.size());
        for (size_t k = 0; k < x.size(); ++k) out[k] = x[k] - t * lap.data[k];
        return out;
      };
      Vec u = linalg::conjugate_gradient(op, v.data, v.data, 1e-10, 10000);
      return to_image(u, w, h, spacing);
    }
    case RegKind::tv_iso:
      return detail::tv_prox_dual(v, t, true);
    case RegKind::tv_aniso:
      return detail::tv_prox_dual(v, t, false);
    case RegKind::proto_dist: {
      if (r.rho0 > 0.0)
        throw Unsupported("reg_prox: proto_dist prox implemented for rho0 = 0 only");
      size_t j = 0;
      const double d = detail::min_prototype_distance(r, v, &j);
      const GridImage& p = r.prototypes[j];
      if (d <= t) return p;
      GridImage out = v;
      const double s = t / d;
      for (size_t k = 0; k < out.data.size(); ++k) out.data[k] += s * (p.data[k] - v.data[k]);
      return out;
    }
  }
  throw Unsupported("reg_prox: unknown kind");
}

/// Vec adapter used by the generic solvers.
inline VecProx make_reg_prox(const Regularizer& r, int w, int h, double spacing = 1.0) {
  return [r, w, h, spacing](const Vec& v, double tau) {
    return reg_prox(r, to_image(v, w, h, spacing), tau).data;
  };
}

inline ValueFn make_reg_value(const Regularizer& r, int w, int h, double spacing = 1.0) {
  return [r, w, h, spacing](const Vec& v) { return reg_value(r, to_image(v, w, h, spacing)); };
}

}  // namespace varipro
