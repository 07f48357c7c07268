#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "varipro/errors.hpp"
#include "varipro/fidelity.hpp"
#include "varipro/linalg.hpp"
#include "varipro/operators.hpp"

namespace varipro {

enum class StopCriterion { gap, fixed_point_residual, energy_delta };
enum class SolverStatus { converged, max_iters };

struct SolverConfig {
  int max_iters = 1000;
  double tol = 1e-8;
  double tau = 0.0;    // primal step; 0 selects the default for the scheme
  double sigma = 0.0;  // dual step (PDHG); 0 selects the default
  double lambda = 1.0; // ADMM penalty
  double theta = 1.0;  // PDHG over-relaxation
  StopCriterion criterion = StopCriterion::fixed_point_residual;
};

struct TraceRecord {
  int iter = 0;
  double energy = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> gap;
  double primal_res = std::numeric_limits<double>::quiet_NaN();
  double dual_res = std::numeric_limits<double>::quiet_NaN();
  double iterate_norm = std::numeric_limits<double>::quiet_NaN();
};

struct SolverTrace {
  std::vector<TraceRecord> records;
  SolverStatus status = SolverStatus::max_iters;
  bool steps_autoscaled = false;

  int iterations() const { return static_cast<int>(records.size()); }
  const TraceRecord& back() const { return records.back(); }
};

/// Trace CSV with columns iter,energy,gap,primal_res,dual_res; an absent
/// gap is an empty field.
inline void write_trace_csv(const SolverTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_trace_csv: cannot open " + path);
  out << "iter,energy,gap,primal_res,dual_res\n";
  char buf[40];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : trace.records) {
    out << r.iter << ',' << fmt(r.energy) << ',' << (r.gap ? fmt(*r.gap) : std::string())
        << ',' << fmt(r.primal_res) << ',' << fmt(r.dual_res) << '\n';
  }
  if (!out) throw IoError("write_trace_csv: write failed for " + path);
}

using VecFn = std::function<Vec(const Vec&)>;
using VecProx = std::function<Vec(const Vec&, double)>;
using ValueFn = std::function<double(const Vec&)>;

namespace detail {

inline void check_divergence(double energy, double& prev_energy, int& bad_streak, const char* who) {
  if (std::isfinite(energy) && std::isfinite(prev_energy) && energy > prev_energy) {
    if (++bad_streak >= 10) throw Diverged(std::string(who) + ": energy increased 10 consecutive iterations");
  } else {
    bad_streak = 0;
  }
  prev_energy = energy;
}

}  // namespace detail

/// Plain explicit descent u <- u - tau * grad(u), stopping on the step norm.
/// `value` is optional and only feeds the energy column and the divergence
/// guard.
inline std::pair<Vec, SolverTrace> gradient_descent(const VecFn& grad, const ValueFn& value,
                                                    Vec u0, const SolverConfig& cfg) {
  if (cfg.tau <= 0.0) throw StepSizeViolation("gradient_descent: tau must be positive");
  SolverTrace trace;
  Vec u = std::move(u0);
  double prev_energy = std::numeric_limits<double>::quiet_NaN();
  int bad_streak = 0;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const Vec g = grad(u);
    Vec next(u.size());
    for (size_t k = 0; k < u.size(); ++k) next[k] = u[k] - cfg.tau * g[k];
    double step = 0.0;
    for (size_t k = 0; k < u.size(); ++k) {
      const double d = next[k] - u[k];
      step += d * d;
    }
    step = std::sqrt(step);
    u = std::move(next);
    TraceRecord rec;
    rec.iter = it;
    rec.energy = value ? value(u) : std::numeric_limits<double>::quiet_NaN();
    rec.primal_res = step;
    rec.iterate_norm = norm2(u);
    trace.records.push_back(rec);
    if (value) detail::check_divergence(rec.energy, prev_energy, bad_streak, "gradient_descent");
    if (step <= cfg.tol) {
      trace.status = SolverStatus::converged;
      return {u, trace};
    }
  }
  trace.status = SolverStatus::max_iters;
  return {u, trace};
}

/// Forward-backward splitting
///   u <- prox_{tau J}(u - tau * grad H(u))
/// for smooth H (gradient `h_grad`, Lipschitz constant bounded by the
/// caller's step choice tau <= 1/L) and proximable J.
inline std::pair<Vec, SolverTrace> forward_backward(const VecFn& h_grad, const ValueFn& h_value,
                                                    const VecProx& j_prox, const ValueFn& j_value,
                                                    Vec u0, const SolverConfig& cfg) {
  if (cfg.tau <= 0.0) throw StepSizeViolation("forward_backward: tau must be positive");
  SolverTrace trace;
  Vec u = std::move(u0);
  double prev_energy = std::numeric_limits<double>::quiet_NaN();
  int bad_streak = 0;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const Vec g = h_grad(u);
    Vec step(u.size());
    for (size_t k = 0; k < u.size(); ++k) step[k] = u[k] - cfg.tau * g[k];
    Vec next = j_prox(step, cfg.tau);
    double delta = 0.0;
    for (size_t k = 0; k < u.size(); ++k) {
      const double d = next[k] - u[k];
      delta += d * d;
    }
    delta = std::sqrt(delta);
    u = std::move(next);
    TraceRecord rec;
    rec.iter = it;
    if (h_value && j_value)
      rec.energy = h_value(u) + j_value(u);
    else if (h_value)
      rec.energy = h_value(u);
    rec.primal_res = delta / cfg.tau;  // fixed-point residual
    rec.iterate_norm = norm2(u);
    trace.records.push_back(rec);
    if (h_value && j_value) detail::check_divergence(rec.energy, prev_energy, bad_streak, "forward_backward");
    const double crit = (cfg.criterion == StopCriterion::energy_delta && trace.records.size() > 1)
                            ? std::abs(rec.energy - trace.records[trace.records.size() - 2].energy)
                            : delta;
    if (crit <= cfg.tol) {
      trace.status = SolverStatus::converged;
      return {u, trace};
    }
  }
  trace.status = SolverStatus::max_iters;
  return {u, trace};
}

/// The J(Au) side of a saddle-point problem: value of J on the range, prox
/// of the conjugate J*, and (optionally) the conjugate's value for the gap.
struct DualTerm {
  ValueFn value;        // J(z), may be empty
  VecProx conj_prox;    // prox_{sigma J*}
  ValueFn conj_value;   // J*(p), may be empty
};

/// The H(u) side: value, prox, and optionally the conjugate's value.
struct PrimalTerm {
  ValueFn value;       // H(u), may be empty
  VecProx prox;        // prox_{tau H}
  ValueFn conj_value;  // H*(q), may be empty
};

struct PdhgResult {
  Vec u;
  Vec p;
  SolverTrace trace;
};

/// Primal-dual hybrid gradient on  min_u J(Au) + H(u):
///   u^{k+1} = prox_{tau H}(u^k - tau A* p^k)
///   p^{k+1} = prox_{sigma J*}(p^k + sigma A((1+theta) u^{k+1} - theta u^k))
/// The step product is kept at sigma*tau*||A||^2 <= 1, rescaling both steps
/// if the caller's choice violates it. The primal-dual gap
///   G(u,p) = J(Au) + H(u) + J*(p) + H*(-A*p)
/// is recorded whenever all four values are finite.
inline PdhgResult pdhg(const DualTerm& J, const PrimalTerm& H, const LinearMap& A, Vec u0, Vec p0,
                       SolverConfig cfg) {
  const double norm_a = std::max(A.norm_estimate, 1e-30);
  SolverTrace trace;
  if (cfg.tau < 0.0 || cfg.sigma < 0.0) throw StepSizeViolation("pdhg: steps must be positive");
  if (cfg.tau == 0.0 && cfg.sigma == 0.0) {
    cfg.tau = cfg.sigma = 1.0 / (1.01 * norm_a);
  } else if (cfg.tau == 0.0) {
    cfg.tau = 1.0 / (1.0201 * cfg.sigma * norm_a * norm_a);
  } else if (cfg.sigma == 0.0) {
    cfg.sigma = 1.0 / (1.0201 * cfg.tau * norm_a * norm_a);
  }
  if (cfg.sigma * cfg.tau * norm_a * norm_a > 1.0) {
    const double scale = 1.0 / (1.01 * std::sqrt(cfg.sigma * cfg.tau) * norm_a);
    cfg.tau *= scale;
    cfg.sigma *= scale;
    trace.steps_autoscaled = true;
  }
  Vec u = std::move(u0);
  Vec p = std::move(p0);
  if (static_cast<int>(u.size()) != A.domain.count()) throw ShapeMismatch("pdhg: u0 shape");
  if (static_cast<int>(p.size()) != A.range.count()) throw ShapeMismatch("pdhg: p0 shape");

  // the primal iterate sees p only through A*p; convergence of that image
  // is what the fixed-point criterion tracks (the dual variable itself may
  // keep wandering along a degenerate optimal face)
  Vec atp_prev;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const Vec atp = A.adjoint(p);
    double datp = std::numeric_limits<double>::infinity();
    if (!atp_prev.empty()) {
      datp = 0.0;
      for (size_t k = 0; k < atp.size(); ++k) {
        const double d = atp[k] - atp_prev[k];
        datp += d * d;
      }
      datp = std::sqrt(datp);
    }
    atp_prev = atp;
    Vec step(u.size());
    for (size_t k = 0; k < u.size(); ++k) step[k] = u[k] - cfg.tau * atp[k];
    Vec u_next = H.prox(step, cfg.tau);

    Vec bar(u.size());
    for (size_t k = 0; k < u.size(); ++k)
      bar[k] = u_next[k] + cfg.theta * (u_next[k] - u[k]);
    Vec abar = A.apply(bar);
    Vec pstep(p.size());
    for (size_t k = 0; k < p.size(); ++k) pstep[k] = p[k] + cfg.sigma * abar[k];
    Vec p_next = J.conj_prox(pstep, cfg.sigma);

    double du = 0.0, dp = 0.0;
    for (size_t k = 0; k < u.size(); ++k) {
      const double d = u_next[k] - u[k];
      du += d * d;
    }
    for (size_t k = 0; k < p.size(); ++k) {
      const double d = p_next[k] - p[k];
      dp += d * d;
    }
    du = std::sqrt(du);
    dp = std::sqrt(dp);
    u = std::move(u_next);
    p = std::move(p_next);

    TraceRecord rec;
    rec.iter = it;
    rec.primal_res = du / cfg.tau;
    rec.dual_res = dp / cfg.sigma;
    rec.iterate_norm = norm2(u);
    double primal = std::numeric_limits<double>::quiet_NaN();
    if (J.value && H.value) {
      primal = J.value(A.apply(u)) + H.value(u);
      rec.energy = primal;
    }
    if (J.conj_value && H.conj_value && std::isfinite(primal)) {
      Vec matp = A.adjoint(p);
      for (auto& x : matp) x = -x;
      const double dual = J.conj_value(p) + H.conj_value(matp);
      if (std::isfinite(dual)) rec.gap = primal + dual;
    }
    trace.records.push_back(rec);

    bool stop = false;
    switch (cfg.criterion) {
      case StopCriterion::gap:
        stop = rec.gap && *rec.gap <= cfg.tol;
        break;
      case StopCriterion::fixed_point_residual:
        stop = du <= cfg.tol && datp <= cfg.tol;
        break;
      case StopCriterion::energy_delta:
        stop = trace.records.size() > 1 && std::isfinite(rec.energy) &&
               std::abs(rec.energy - trace.records[trace.records.size() - 2].energy) <= cfg.tol;
        break;
    }
    if (stop) {
      trace.status = SolverStatus::converged;
      return {std::move(u), std::move(p), std::move(trace)};
    }
  }
  trace.status = SolverStatus::max_iters;
  return {std::move(u), std::move(p), std::move(trace)};
}

struct AdmmResult {
  Vec u;
  Vec v;
  Vec h;
  SolverTrace trace;
};

/// ADMM on  min_u D(Au, y) + S(u)  via the split u = v:
///   u^{k+1} = argmin_u D(Au, y) + (lambda/2)||u - (v^k - h^k)||^2
///   v^{k+1} = r_prox(u^{k+1} + h^k, 1/lambda)
///   h^{k+1} = h^k + u^{k+1} - v^{k+1}
/// For the l2 fidelity the u-step is the normal-equations solve
/// (A*A + lambda I) u = A*y + lambda (v - h) by conjugate gradient. For
/// other fidelities a direct prox of u -> D(Au, y) must be supplied
/// (available when A is the identity); `data_prox` plays that role.
inline AdmmResult admm(const Fidelity& F, const LinearMap& A, const VecProx& r_prox,
                       const ValueFn& r_value, Vec u0, const SolverConfig& cfg,
                       const VecProx& data_prox = nullptr) {
  if (cfg.lambda <= 0.0) throw StepSizeViolation("admm: lambda must be positive");
  const size_t n = u0.size();
  Vec u = std::move(u0);
  Vec v = u;
  Vec h(n, 0.0);
  SolverTrace trace;

  const Vec aty = A.adjoint(F.y);
  auto normal_op = [&A, &cfg](const Vec& x) {
    Vec out = A.adjoint(A.apply(x));
    for (size_t k = 0; k < out.size(); ++k) out[k] += cfg.lambda * x[k];
    return out;
  };

  for (int it = 1; it <= cfg.max_iters; ++it) {
    Vec w(n);
    for (size_t k = 0; k < n; ++k) w[k] = v[k] - h[k];
    if (F.kind == FidelityKind::l2) {
      Vec rhs(n);
      for (size_t k = 0; k < n; ++k) rhs[k] = aty[k] + cfg.lambda * w[k];
      u = linalg::conjugate_gradient(normal_op, rhs, u, 1e-10, 5000);
    } else if (data_prox) {
      u = data_prox(w, 1.0 / cfg.lambda);
    } else {
      throw Unsupported("admm: non-l2 fidelity needs a direct data prox");
    }

    Vec v_prev = v;
    Vec arg(n);
    for (size_t k = 0; k < n; ++k) arg[k] = u[k] + h[k];
    v = r_prox(arg, 1.0 / cfg.lambda);
    for (size_t k = 0; k < n; ++k) h[k] += u[k] - v[k];

    double primal = 0.0, dual = 0.0;
    for (size_t k = 0; k < n; ++k) {
      const double d = u[k] - v[k];
      primal += d * d;
      const double e = v[k] - v_prev[k];
      dual += e * e;
    }
    primal = std::sqrt(primal);
    dual = cfg.lambda * std::sqrt(dual);

    TraceRecord rec;
    rec.iter = it;
    rec.primal_res = primal;
    rec.dual_res = dual;
    rec.iterate_norm = norm2(u);
    rec.energy = fid_value(F, A.apply(u)) + (r_value ? r_value(u) : 0.0);
    trace.records.push_back(rec);

    if (primal <= cfg.tol && dual <= cfg.tol) {
      trace.status = SolverStatus::converged;
      return {std::move(u), std::move(v), std::move(h), std::move(trace)};
    }
  }
  trace.status = SolverStatus::max_iters;
  return {std::move(u), std::move(v), std::move(h), std::move(trace)};
}

}  // namespace varipro
