#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "varipro/errors.hpp"
#include "varipro/grid.hpp"
#include "varipro/linalg.hpp"
#include "varipro/operators.hpp"
#include "varipro/solvers.hpp"

namespace varipro {

enum class UpdateForm { learned_gradient, variational_net, learned_prox };

/// One unrolled-scheme layer Lambda(u, h) with h = A*(Au - y):
///   learned_gradient: u + Gamma(h)
///   variational_net:  u - h + Gamma(u)
///   learned_prox:     Gamma(u - h)
/// Gamma is a fixed analytic map with a certified Lipschitz constant.
struct UpdateMap {
  UpdateForm form = UpdateForm::learned_gradient;
  VecFn gamma;
  double gamma_lipschitz = 0.0;
};

/// Gamma as a periodic convolution with an arbitrary (possibly signed)
/// kernel; Lipschitz constant = max |symbol|, exact because the unitary
/// DFT diagonalizes the operator.
inline UpdateMap make_linear_filter_map(UpdateForm form, const GridImage& kernel, int w, int h) {
  if (kernel.size() == 0) throw EmptyKernel("linear filter map: empty kernel");
  GridImage embedded(w, h, 0.0);
  const int ci = kernel.height / 2, cj = kernel.width / 2;
  for (int i = 0; i < kernel.height; ++i)
    for (int j = 0; j < kernel.width; ++j) {
      const int di = ((i - ci) % h + h) % h;
      const int dj = ((j - cj) % w + w) % w;
      embedded.at(di, dj) += kernel.at(i, j);
    }
  ComplexGrid sym = dft2(embedded);
  const double scale = std::sqrt(static_cast<double>(w) * h);
  auto symbol = std::make_shared<std::vector<std::complex<double>>>(sym.data);
  double max_mod = 0.0;
  for (auto& z : *symbol) {
    z *= scale;
    max_mod = std::max(max_mod, std::abs(z));
  }
  UpdateMap m;
  m.form = form;
  m.gamma = [symbol, w, h](const Vec& x) {
    ComplexGrid c = dft2(to_image(x, w, h));
    for (size_t k = 0; k < c.data.size(); ++k) c.data[k] *= (*symbol)[k];
    return idft2_real(c).data;
  };
  m.gamma_lipschitz = max_mod;
  return m;
}

/// Gamma(x) = clamp(a*x + b, lo, hi); clamping is 1-Lipschitz, so |a|
/// certifies the composite constant.
inline UpdateMap make_clamped_affine_map(UpdateForm form, double a, double b, double lo, double hi) {
  if (lo > hi) throw DomainViolation("clamped affine: lo > hi");
  UpdateMap m;
  m.form = form;
  m.gamma = [a, b, lo, hi](const Vec& x) {
    Vec out(x.size());
    for (size_t k = 0; k < x.size(); ++k) out[k] = std::clamp(a * x[k] + b, lo, hi);
    return out;
  };
  m.gamma_lipschitz = std::abs(a);
  return m;
}

/// Sampling lower bound for the Lipschitz constant of a map, to confront
/// with the analytic certificate.
inline double sampled_lipschitz_lower_bound(const VecFn& f, size_t dim, int pairs = 1000,
                                            std::uint64_t seed = 0x11bULL) {
  SplitMix64 rng(seed);
  double best = 0.0;
  for (int t = 0; t < pairs; ++t) {
    Vec x(dim), y(dim);
    for (auto& v : x) v = rng.next_gaussian();
    for (auto& v : y) v = rng.next_gaussian();
    double dxy = 0.0;
    for (size_t k = 0; k < dim; ++k) {
      const double d = x[k] - y[k];
      dxy += d * d;
    }
    if (dxy == 0.0) continue;
    const Vec fx = f(x);
    const Vec fy = f(y);
    double df = 0.0;
    for (size_t k = 0; k < dim; ++k) {
      const double d = fx[k] - fy[k];
      df += d * d;
    }
    best = std::max(best, std::sqrt(df / dxy));
  }
  return best;
}

/// Executes exactly N layers u <- Lambda(u, A*(Au - y)), recording ||h||.
inline std::pair<Vec, std::vector<double>> run_unrolled(const UpdateMap& scheme, const LinearMap& A,
                                                        const Vec& y, Vec u0, int steps) {
  if (steps < 1) throw DomainViolation("run_unrolled: need at least one step");
  Vec u = std::move(u0);
  std::vector<double> h_norms;
  h_norms.reserve(static_cast<size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    Vec h = A.apply(u);
    for (size_t i = 0; i < h.size(); ++i) h[i] -= y[i];
    h = A.adjoint(h);
    h_norms.push_back(norm2(h));
    switch (scheme.form) {
      case UpdateForm::learned_gradient: {
        const Vec g = scheme.gamma(h);
        for (size_t i = 0; i < u.size(); ++i) u[i] += g[i];
        break;
      }
      case UpdateForm::variational_net: {
        const Vec g = scheme.gamma(u);
        for (size_t i = 0; i < u.size(); ++i) u[i] = u[i] - h[i] + g[i];
        break;
      }
      case UpdateForm::learned_prox: {
        Vec arg(u.size());
        for (size_t i = 0; i < u.size(); ++i) arg[i] = u[i] - h[i];
        u = scheme.gamma(arg);
        break;
      }
    }
  }
  return {std::move(u), std::move(h_norms)};
}

/// Fixed-point operator of the equilibrium gradient-descent scheme
///   T(u) = u + eta A*(y - Au) - eta R(u),
/// contractive with factor 1 - eta(1+mu) + eta*eps when R - Id is
/// eps-Lipschitz, mu = lambda_min(A*A), and eta < 1/(L+1).
struct DeqOperator {
  LinearMap A;
  Vec y;
  double eta = 0.0;
  VecFn r_map;
  double eps = 0.0;  // certified Lipschitz constant of R - Id
  double mu = 0.0;   // lambda_min(A*A); 0 for rank-deficient A
};

inline DeqOperator make_deq_operator(LinearMap A, Vec y, double eta, VecFn r_map, double eps,
                                     double mu = 0.0) {
  const double L = A.norm_estimate * A.norm_estimate;
  if (!(eta > 0.0) || eta >= 1.0 / (L + 1.0))
    throw DomainViolation("deq operator: need 0 < eta < 1/(L+1)");
  if (eps < 0.0 || mu < 0.0) throw DomainViolation("deq operator: eps, mu must be nonnegative");
  return DeqOperator{std::move(A), std::move(y), eta, std::move(r_map), eps, mu};
}

inline Vec deq_apply(const DeqOperator& op, const Vec& u) {
  Vec res = op.A.apply(u);
  for (size_t k = 0; k < res.size(); ++k) res[k] = op.y[k] - res[k];
  const Vec grad = op.A.adjoint(res);
  const Vec r = op.r_map(u);
  Vec out(u.size());
  for (size_t k = 0; k < u.size(); ++k) out[k] = u[k] + op.eta * grad[k] - op.eta * r[k];
  return out;
}

inline double deq_contraction_bound(const DeqOperator& op) {
  return 1.0 - op.eta * (1.0 + op.mu) + op.eta * op.eps;
}

struct DeqResult {
  Vec u;
  double gamma_est = 0.0;  // max observed step-ratio
  SolverTrace trace;
};

/// Picard iteration to the fixed point; gamma_est tracks the worst ratio
/// ||u_{k+2}-u_{k+1}|| / ||u_{k+1}-u_k||. Raises NotContractive when the
/// ratio stays >= 1 for ten steps or exceeds the certified bound.
inline DeqResult deq_solve(const DeqOperator& op, Vec u0, double tol, int max_iters) {
  DeqResult out;
  Vec u = std::move(u0);
  double prev_step = -1.0;
  int expansive_streak = 0;
  for (int it = 1; it <= max_iters; ++it) {
    Vec next = deq_apply(op, u);
    double step = 0.0;
    for (size_t k = 0; k < u.size(); ++k) {
      const double d = next[k] - u[k];
      step += d * d;
    }
    step = std::sqrt(step);
    u = std::move(next);

    TraceRecord rec;
    rec.iter = it;
    rec.primal_res = step;
    rec.iterate_norm = norm2(u);
    out.trace.records.push_back(rec);

    // ratios are meaningful only while the steps sit well above the
    // floating-point noise floor of the iterate updates
    if (prev_step > 1e-7 * std::max(1.0, rec.iterate_norm)) {
      const double ratio = step / prev_step;
      out.gamma_est = std::max(out.gamma_est, ratio);
      if (ratio >= 1.0) {
        if (++expansive_streak >= 10)
          throw NotContractive("deq_solve: step ratio >= 1 for 10 consecutive iterations");
      } else {
        expansive_streak = 0;
      }
    }
    prev_step = step;
    if (step <= tol) {
      out.trace.status = SolverStatus::converged;
      if (op.eps < 1.0 + op.mu && out.gamma_est > deq_contraction_bound(op) + 1e-6)
        throw NotContractive("deq_solve: measured ratio exceeds the certified contraction bound");
      out.u = std::move(u);
      return out;
    }
  }
  out.trace.status = SolverStatus::max_iters;
  out.u = std::move(u);
  return out;
}

struct AndersonResult {
  Vec u;
  SolverTrace trace;
  int fallback_steps = 0;  // Picard steps taken on ill-conditioned LS
};

/// Type-II Anderson acceleration with least squares over the last m
/// residual differences (1e-10 ridge on the normal equations). Falls back
/// to the plain Picard step when the small solve misbehaves.
inline AndersonResult anderson_accelerate(const DeqOperator& op, Vec u0, int memory, double tol,
                                          int max_iters) {
  if (memory < 1 || memory > 10) throw DomainViolation("anderson_accelerate: memory must be in [1, 10]");
  AndersonResult out;
  Vec x = std::move(u0);
  std::vector<Vec> g_hist, f_hist;
  for (int it = 1; it <= max_iters; ++it) {
    const Vec gx = deq_apply(op, x);
    Vec fx(x.size());
    for (size_t k = 0; k < x.size(); ++k) fx[k] = gx[k] - x[k];
    const double res = norm2(fx);

    TraceRecord rec;
    rec.iter = it;
    rec.primal_res = res;
    rec.iterate_norm = norm2(x);
    out.trace.records.push_back(rec);
    if (res <= tol) {
      out.trace.status = SolverStatus::converged;
      out.u = std::move(x);
      return out;
    }

    g_hist.push_back(gx);
    f_hist.push_back(fx);
    if (static_cast<int>(g_hist.size()) > memory + 1) {
      g_hist.erase(g_hist.begin());
      f_hist.erase(f_hist.begin());
    }

    const int mk = static_cast<int>(f_hist.size()) - 1;
    if (mk == 0) {
      x = gx;  // first step is plain Picard
      continue;
    }
    // columns dF_j = f_{j+1} - f_j; solve (dF^T dF + ridge) c = dF^T f_k
    std::vector<Vec> df(static_cast<size_t>(mk));
    for (int j = 0; j < mk; ++j) {
      df[static_cast<size_t>(j)].resize(x.size());
      for (size_t i = 0; i < x.size(); ++i)
        df[static_cast<size_t>(j)][i] = f_hist[static_cast<size_t>(j + 1)][i] - f_hist[static_cast<size_t>(j)][i];
    }
    std::vector<double> gram(static_cast<size_t>(mk) * mk, 0.0);
    Vec rhs(static_cast<size_t>(mk), 0.0);
    for (int a = 0; a < mk; ++a) {
      rhs[static_cast<size_t>(a)] = dot(df[static_cast<size_t>(a)], fx);
      for (int b = 0; b < mk; ++b) gram[static_cast<size_t>(a) * mk + b] = dot(df[static_cast<size_t>(a)], df[static_cast<size_t>(b)]);
    }
    // ridge scaled to the Gram matrix so it keeps regularizing after the
    // residuals have shrunk by many orders of magnitude
    double gmax = 0.0;
    for (int a = 0; a < mk; ++a) gmax = std::max(gmax, gram[static_cast<size_t>(a) * mk + a]);
    for (int a = 0; a < mk; ++a) gram[static_cast<size_t>(a) * mk + a] += 1e-10 * std::max(gmax, 1e-300);
    bool fell_back = false;
    Vec coef;
    try {
      coef = linalg::solve_dense(gram, mk, rhs);
      for (double c : coef)
        if (!std::isfinite(c)) fell_back = true;
    } catch (const Error&) {
      fell_back = true;
    }
    if (fell_back) {
      ++out.fallback_steps;
      x = gx;
      continue;
    }
    // x_{k+1} = g_k - sum_j coef_j (g_{j+1} - g_j)
    Vec next = gx;
    for (int j = 0; j < mk; ++j) {
      const double c = coef[static_cast<size_t>(j)];
      if (c == 0.0) continue;
      for (size_t i = 0; i < x.size(); ++i)
        next[i] -= c * (g_hist[static_cast<size_t>(j + 1)][i] - g_hist[static_cast<size_t>(j)][i]);
    }
    x = std::move(next);
  }
  out.trace.status = SolverStatus::max_iters;
  out.u = std::move(x);
  return out;
}

/// Shipped counterexample with eps > 1 + mu: the expansiveness detector in
/// deq_solve fires on it.
inline DeqOperator make_expansive_counterexample(int w, int h, double eta = 0.4) {
  LinearMap A = make_identity(w, h);
  Vec y(static_cast<size_t>(w) * h, 0.0);
  // R(u) = 4.5 u, so R - Id is 3.5-Lipschitz > 1 + mu = 2
  VecFn r = [](const Vec& u) {
    Vec out(u.size());
    for (size_t k = 0; k < u.size(); ++k) out[k] = 4.5 * u[k];
    return out;
  };
  return DeqOperator{std::move(A), std::move(y), eta, std::move(r), 3.5, 1.0};
}

}  // namespace varipro
