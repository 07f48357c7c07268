#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "varipro/convex.hpp"
#include "varipro/errors.hpp"
#include "varipro/operators.hpp"
#include "varipro/solvers.hpp"

namespace varipro {

struct SegOptions {
  double alpha = 0.1;          // TV weight; tuned for unit-contrast images
  double threshold = 0.5;      // binarization level for the relaxed v
  int outer_iters = 5;         // alternations between v-solve and c-update
  std::optional<std::pair<double, double>> c_init;  // (c1, c2); Otsu 2-means otherwise
  int inner_max_iters = 4000;
  double inner_tol = 1e-10;
};

struct SegResult {
  GridImage v;       // relaxed indicator in [0,1]
  GridImage mask;    // thresholded binary segmentation {0,1}
  double c1 = 0.0;   // mean of the v >= threshold region
  double c2 = 0.0;   // mean of the complement
  double energy = 0.0;
  std::vector<double> energy_history;  // one entry per outer round
  bool degenerate_region = false;      // a region emptied; its c was kept
};

namespace detail {

/// Otsu-style split of the intensity histogram into two means.
inline std::pair<double, double> otsu_two_means(const GridImage& y) {
  const auto [mn_it, mx_it] = std::minmax_element(y.data.begin(), y.data.end());
  const double lo = *mn_it, hi = *mx_it;
  if (hi <= lo) return {lo, lo};
  constexpr int bins = 256;
  std::vector<int> hist(bins, 0);
  for (double v : y.data) {
    int b = static_cast<int>((v - lo) / (hi - lo) * (bins - 1));
    hist[static_cast<size_t>(std::clamp(b, 0, bins - 1))]++;
  }
  const double total = static_cast<double>(y.size());
  double sum_all = 0.0;
  for (int b = 0; b < bins; ++b) sum_all += b * hist[static_cast<size_t>(b)];
  double best_between = -1.0;
  int best_b = bins / 2;
  double w0 = 0.0, sum0 = 0.0;
  for (int b = 0; b < bins; ++b) {
    w0 += hist[static_cast<size_t>(b)];
    if (w0 == 0.0) continue;
    const double w1 = total - w0;
    if (w1 == 0.0) break;
    sum0 += b * hist[static_cast<size_t>(b)];
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best_between) {
      best_between = between;
      best_b = b;
    }
  }
  const double split = lo + (hi - lo) * (best_b + 0.5) / (bins - 1);
  double s_hi = 0.0, s_lo = 0.0;
  int n_hi = 0, n_lo = 0;
  for (double v : y.data) {
    if (v > split) {
      s_hi += v;
      ++n_hi;
    } else {
      s_lo += v;
      ++n_lo;
    }
  }
  const double c_hi = n_hi ? s_hi / n_hi : hi;
  const double c_lo = n_lo ? s_lo / n_lo : lo;
  return {c_hi, c_lo};
}

}  // namespace detail

/// Convex-relaxed two-phase Chan-Vese segmentation:
///   min_{v in [0,1]}  alpha |Dv| + <(y-c1)^2 - (y-c2)^2, v>
/// solved by PDHG at fixed (c1, c2) (the prox of the linear term plus box
/// constraint is a shifted clamp), alternated with updates of (c1, c2) as
/// region means over the thresholded mask. The binarized mask uses the
/// 0.5 threshold by default.
inline SegResult chan_vese(const GridImage& y, const SegOptions& opts = {}) {
  if (opts.alpha <= 0.0) throw DomainViolation("chan_vese: alpha must be positive");
  if (!(opts.threshold > 0.0 && opts.threshold < 1.0))
    throw DomainViolation("chan_vese: threshold must lie in (0,1)");
  if (!all_finite(y.data)) throw DomainViolation("chan_vese: image must be finite");

  const int w = y.width, h = y.height;
  const LinearMap grad_map = make_gradient_map(w, h, y.spacing);

  SegResult res;
  auto [c1, c2] = opts.c_init ? *opts.c_init : detail::otsu_two_means(y);
  res.c1 = c1;
  res.c2 = c2;

  // start from the indicator of "closer to c1"
  Vec v(static_cast<size_t>(w) * h, 0.5);
  if (c1 != c2)
    for (int k = 0; k < y.size(); ++k) {
      const double d1 = std::abs(y.data[static_cast<size_t>(k)] - c1);
      const double d2 = std::abs(y.data[static_cast<size_t>(k)] - c2);
      v[static_cast<size_t>(k)] = d1 <= d2 ? 1.0 : 0.0;
    }
  Vec p(static_cast<size_t>(2) * w * h, 0.0);

  const double alpha = opts.alpha;
  auto tv_of = [w, h, alpha](const Vec& z) {
    const VectorField f = to_field(z, w, h);
    double s = 0.0;
    for (size_t k = 0; k < f.px.size(); ++k) s += std::hypot(f.px[k], f.py[k]);
    return alpha * s;
  };
  auto energy_of = [&](const Vec& vv, double a, double b) {
    double s = tv_of(flatten(gradient(to_image(vv, w, h, y.spacing))));
    for (int k = 0; k < y.size(); ++k) {
      const double d1 = y.data[static_cast<size_t>(k)] - a;
      const double d2 = y.data[static_cast<size_t>(k)] - b;
      s += d1 * d1 * vv[static_cast<size_t>(k)] + d2 * d2 * (1.0 - vv[static_cast<size_t>(k)]);
    }
    return s;
  };

  for (int round = 0; round < opts.outer_iters; ++round) {
    // (a) relaxed solve in v at fixed (c1, c2)
    Vec r(static_cast<size_t>(w) * h);
    for (int k = 0; k < y.size(); ++k) {
      const double d1 = y.data[static_cast<size_t>(k)] - res.c1;
      const double d2 = y.data[static_cast<size_t>(k)] - res.c2;
      r[static_cast<size_t>(k)] = d1 * d1 - d2 * d2;
    }
    DualTerm J;
    J.value = tv_of;
    J.conj_prox = [alpha, w, h](const Vec& q, double) {
      return flatten(project_ball(to_field(q, w, h), alpha));
    };
    PrimalTerm H;
    H.value = [r](const Vec& u) { return dot(r, u); };
    H.prox = [r](const Vec& z, double t) {
      Vec out(z.size());
      for (size_t k = 0; k < z.size(); ++k) out[k] = std::clamp(z[k] - t * r[k], 0.0, 1.0);
      return out;
    };
    SolverConfig cfg;
    cfg.max_iters = opts.inner_max_iters;
    cfg.tol = opts.inner_tol;
    cfg.criterion = StopCriterion::fixed_point_residual;
    PdhgResult sol = pdhg(J, H, grad_map, v, p, cfg);
    v = std::move(sol.u);
    p = std::move(sol.p);

    // (b) region means over the thresholded mask
    double s1 = 0.0, s2 = 0.0;
    int n1 = 0, n2 = 0;
    for (int k = 0; k < y.size(); ++k) {
      if (v[static_cast<size_t>(k)] >= opts.threshold) {
        s1 += y.data[static_cast<size_t>(k)];
        ++n1;
      } else {
        s2 += y.data[static_cast<size_t>(k)];
        ++n2;
      }
    }
    if (n1 == 0 || n2 == 0) {
      res.degenerate_region = true;  // keep previous constants
    } else {
      res.c1 = s1 / n1;
      res.c2 = s2 / n2;
    }
    res.energy_history.push_back(energy_of(v, res.c1, res.c2));
  }

  res.v = to_image(v, w, h, y.spacing);
  res.mask = GridImage(w, h, 0.0, y.spacing);
  for (int k = 0; k < y.size(); ++k)
    res.mask.data[static_cast<size_t>(k)] = v[static_cast<size_t>(k)] >= opts.threshold ? 1.0 : 0.0;
  res.energy = res.energy_history.back();
  return res;
}

}  // namespace varipro
