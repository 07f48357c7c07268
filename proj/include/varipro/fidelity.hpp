#pragma once

#include <cmath>
#include <optional>

#include "varipro/convex.hpp"
#include "varipro/errors.hpp"
#include "varipro/linalg.hpp"

namespace varipro {

enum class FidelityKind { l2, kl, l1 };

/// Data-fidelity term D(v, y) on the operator range:
///   l2: 0.5*||v - y||^2   (the 1/2 factor is fixed; weights rescale)
///   kl: sum v - y*log v   (Kullback-Leibler up to a y-dependent constant)
///   l1: ||v - y||_1
struct Fidelity {
  FidelityKind kind = FidelityKind::l2;
  Vec y;
};

inline Fidelity make_fidelity(FidelityKind kind, Vec y) {
  if (kind == FidelityKind::kl)
    for (double v : y)
      if (v < 0.0) throw DomainViolation("fidelity: kl requires y >= 0");
  return Fidelity{kind, std::move(y)};
}

namespace detail {
inline void check_same_size(const Fidelity& f, const Vec& v, const char* who) {
  if (f.y.size() != v.size()) throw ShapeMismatch(std::string(who) + ": shape mismatch");
}
inline void check_kl_domain(const Fidelity& f, const Vec& v, const char* who) {
  for (size_t k = 0; k < v.size(); ++k)
    if (f.y[k] > 0.0 && v[k] <= 0.0)
      throw DomainViolation(std::string(who) + ": kl needs v > 0 where y > 0");
}
}  // namespace detail

inline double fid_value(const Fidelity& f, const Vec& v) {
  detail::check_same_size(f, v, "fid_value");
  double s = 0.0;
  switch (f.kind) {
    case FidelityKind::l2:
      for (size_t k = 0; k < v.size(); ++k) {
        const double d = v[k] - f.y[k];
        s += 0.5 * d * d;
      }
      break;
    case FidelityKind::kl:
      detail::check_kl_domain(f, v, "fid_value");
      for (size_t k = 0; k < v.size(); ++k) {
        s += v[k];
        if (f.y[k] > 0.0) s -= f.y[k] * std::log(v[k]);
      }
      break;
    case FidelityKind::l1:
      for (size_t k = 0; k < v.size(); ++k) s += std::abs(v[k] - f.y[k]);
      break;
  }
  return s;
}

inline Vec fid_gradient(const Fidelity& f, const Vec& v) {
  detail::check_same_size(f, v, "fid_gradient");
  Vec g(v.size());
  switch (f.kind) {
    case FidelityKind::l2:
      for (size_t k = 0; k < v.size(); ++k) g[k] = v[k] - f.y[k];
      break;
    case FidelityKind::kl:
      detail::check_kl_domain(f, v, "fid_gradient");
      for (size_t k = 0; k < v.size(); ++k) g[k] = (f.y[k] > 0.0) ? 1.0 - f.y[k] / v[k] : 1.0;
      break;
    case FidelityKind::l1:
      throw NonSmooth("fid_gradient: l1 fidelity is not differentiable");
  }
  return g;
}

/// prox_{tau D(., y)}. The kl case is the positive root of
///   w^2 + (tau - v) w - tau y = 0.
inline Vec fid_prox(const Fidelity& f, const Vec& v, double tau) {
  detail::check_same_size(f, v, "fid_prox");
  if (tau <= 0.0) throw DomainViolation("fid_prox: tau must be positive");
  Vec w(v.size());
  switch (f.kind) {
    case FidelityKind::l2:
      for (size_t k = 0; k < v.size(); ++k) w[k] = (v[k] + tau * f.y[k]) / (1.0 + tau);
      break;
    case FidelityKind::kl:
      for (size_t k = 0; k < v.size(); ++k) {
        if (f.y[k] < 0.0) throw DomainViolation("fid_prox: kl requires y >= 0");
        const double a = v[k] - tau;
        w[k] = 0.5 * (a + std::sqrt(a * a + 4.0 * tau * f.y[k]));
      }
      break;
    case FidelityKind::l1:
      for (size_t k = 0; k < v.size(); ++k) w[k] = f.y[k] + soft_threshold(v[k] - f.y[k], tau);
      break;
  }
  return w;
}

/// prox of the convex conjugate, obtained from Moreau's identity:
///   prox_{sigma D*}(q) = q - sigma * prox_{D/sigma}(q/sigma).
inline Vec fid_conj_prox(const Fidelity& f, const Vec& q, double sigma) {
  if (sigma <= 0.0) throw DomainViolation("fid_conj_prox: sigma must be positive");
  Vec scaled(q.size());
  for (size_t k = 0; k < q.size(); ++k) scaled[k] = q[k] / sigma;
  const Vec p = fid_prox(f, scaled, 1.0 / sigma);
  Vec out(q.size());
  for (size_t k = 0; k < q.size(); ++k) out[k] = q[k] - sigma * p[k];
  return out;
}

/// Conjugate value where a closed form exists (l2 and l1); the kl conjugate
/// is omitted, so gap-based stopping falls back to fixed-point residuals.
inline std::optional<double> fid_conj_value(const Fidelity& f, const Vec& q) {
  switch (f.kind) {
    case FidelityKind::l2: {
      double s = 0.0;
      for (size_t k = 0; k < q.size(); ++k) s += 0.5 * q[k] * q[k] + q[k] * f.y[k];
      return s;
    }
    case FidelityKind::l1: {
      double s = 0.0;
      for (size_t k = 0; k < q.size(); ++k) {
        if (std::abs(q[k]) > 1.0 + 1e-12) return std::numeric_limits<double>::infinity();
        s += q[k] * f.y[k];
      }
      return s;
    }
    case FidelityKind::kl:
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace varipro
