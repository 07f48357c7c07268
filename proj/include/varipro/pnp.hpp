#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "varipro/errors.hpp"
#include "varipro/grid.hpp"
#include "varipro/linalg.hpp"
#include "varipro/operators.hpp"
#include "varipro/solvers.hpp"

namespace varipro {

enum class DenoiserRep { dense, convolutional, dft_symbol };

/// Symmetric positive semi-definite averaging operator D with spectrum in
/// [lambda_lo, 1]. Such a D is the prox of the quadratic
///   J(x) = 0.5 * <x, (D^{-1} - Id) x>,
/// the implicit prior that the PnP loops regularize with. Two
/// representations keep desk-scale oracles exact: a dense matrix with a
/// Jacobi eigendecomposition, and DFT-diagonal operators (periodic
/// convolutions) whose eigenvalues are the symbol values.
class LinearDenoiser {
 public:
  /// Dense denoiser from a row-major n x n matrix on the flattened grid.
  /// The raw matrix is kept for apply(); the eigen data comes from the
  /// symmetric part, so asymmetric inputs are representable (and detected
  /// by verify_prox_characterization).
  static LinearDenoiser dense(std::vector<double> matrix, int w, int h) {
    const int n = w * h;
    if (static_cast<int>(matrix.size()) != n * n) throw ShapeMismatch("dense denoiser: matrix size");
    LinearDenoiser d;
    d.rep_ = DenoiserRep::dense;
    d.width_ = w;
    d.height_ = h;
    std::vector<double> sym(matrix.size());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        sym[static_cast<size_t>(i) * n + j] =
            0.5 * (matrix[static_cast<size_t>(i) * n + j] + matrix[static_cast<size_t>(j) * n + i]);
    auto vectors = std::make_shared<std::vector<double>>();
    d.eigenvalues_ = linalg::jacobi_eigensymmetric(sym, n, vectors.get());
    d.eigvecs_ = vectors;
    d.matrix_ = std::make_shared<const std::vector<double>>(std::move(matrix));
    d.update_bounds();
    return d;
  }

  /// Periodic-convolution denoiser. The kernel is symmetrized (k(x)+k(-x))/2
  /// so its DFT symbol is real, then the symbol is clamped to [floor, 1]
  /// to certify the lower spectral bound.
  static LinearDenoiser convolution(const GridImage& kernel, int w, int h, double floor = 1e-3) {
    if (kernel.size() == 0) throw EmptyKernel("conv denoiser: empty kernel");
    double sum = 0.0;
    for (double v : kernel.data) sum += v;
    if (sum <= 0.0) throw EmptyKernel("conv denoiser: kernel sums to zero");
    GridImage embedded(w, h, 0.0);
    const int ci = kernel.height / 2, cj = kernel.width / 2;
    for (int i = 0; i < kernel.height; ++i)
      for (int j = 0; j < kernel.width; ++j) {
        const int di = ((i - ci) % h + h) % h;
        const int dj = ((j - cj) % w + w) % w;
        // split mass evenly between +offset and -offset: real symbol
        const int ri = (h - di) % h;
        const int rj = (w - dj) % w;
        embedded.at(di, dj) += 0.5 * kernel.at(i, j) / sum;
        embedded.at(ri, rj) += 0.5 * kernel.at(i, j) / sum;
      }
    ComplexGrid sym = dft2(embedded);
    GridImage symbol(w, h, 0.0);
    const double scale = std::sqrt(static_cast<double>(w) * h);
    for (int k = 0; k < symbol.size(); ++k) symbol.data[static_cast<size_t>(k)] = scale * sym.data[static_cast<size_t>(k)].real();
    LinearDenoiser d = from_symbol(symbol, floor);
    d.rep_ = DenoiserRep::convolutional;
    return d;
  }

  /// Denoiser diagonal in the DFT basis, defined by its real symbol grid.
  static LinearDenoiser from_symbol(const GridImage& symbol, double floor = 1e-3) {
    if (floor <= 0.0) throw SingularDenoiser("symbol denoiser: floor must be positive");
    LinearDenoiser d;
    d.rep_ = DenoiserRep::dft_symbol;
    d.width_ = symbol.width;
    d.height_ = symbol.height;
    d.eigenvalues_.resize(symbol.data.size());
    for (size_t k = 0; k < symbol.data.size(); ++k)
      d.eigenvalues_[k] = std::clamp(symbol.data[k], floor, 1.0);
    d.update_bounds();
    return d;
  }

  DenoiserRep rep() const { return rep_; }
  int width() const { return width_; }
  int height() const { return height_; }
  int dim() const { return width_ * height_; }
  double lambda_lo() const { return lambda_lo_; }
  double lambda_hi() const { return lambda_hi_; }

  /// Eigenvalues in the representation's natural order (dense: ascending;
  /// DFT: frequency order).
  const std::vector<double>& eigenvalues() const { return eigenvalues_; }

  /// Squared coefficients of x in the eigenbasis, aligned with
  /// eigenvalues(); for the DFT representations these are |x_hat_k|^2.
  Vec spectral_coefficients_squared(const Vec& x) const {
    check_size(x);
    Vec out(eigenvalues_.size(), 0.0);
    if (rep_ == DenoiserRep::dense) {
      const int n = dim();
      for (int j = 0; j < n; ++j) {
        double c = 0.0;
        for (int i = 0; i < n; ++i) c += (*eigvecs_)[static_cast<size_t>(i) * n + j] * x[static_cast<size_t>(i)];
        out[static_cast<size_t>(j)] = c * c;
      }
    } else {
      const ComplexGrid xhat = dft2(to_image(x, width_, height_));
      for (size_t k = 0; k < xhat.data.size(); ++k) out[k] = std::norm(xhat.data[k]);
    }
    return out;
  }

  /// Applies the stored operator. Dense denoisers apply the raw matrix, so
  /// an asymmetric matrix really acts asymmetrically.
  Vec apply(const Vec& x) const {
    check_size(x);
    if (rep_ == DenoiserRep::dense) {
      const int n = dim();
      Vec out(static_cast<size_t>(n), 0.0);
      for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += (*matrix_)[static_cast<size_t>(i) * n + j] * x[static_cast<size_t>(j)];
        out[static_cast<size_t>(i)] = s;
      }
      return out;
    }
    return apply_eigen_scaled(x, eigenvalues_);
  }

  /// W = D^{-1} - Id through the eigenbasis.
  Vec apply_penalty(const Vec& x) const {
    std::vector<double> w(eigenvalues_.size());
    for (size_t k = 0; k < w.size(); ++k) {
      if (eigenvalues_[k] <= 0.0) throw SingularDenoiser("denoiser: nonpositive eigenvalue");
      w[k] = (1.0 - eigenvalues_[k]) / eigenvalues_[k];
    }
    return apply_eigen_scaled(x, w);
  }

  /// Max sampled symmetry defect |<Dx,y> - <x,Dy>| / (|x| |y|).
  double symmetry_residual(int pairs = 20, std::uint64_t seed = 0x5eedULL) const {
    SplitMix64 rng(seed);
    double worst = 0.0;
    for (int t = 0; t < pairs; ++t) {
      Vec x(static_cast<size_t>(dim())), y(static_cast<size_t>(dim()));
      for (auto& v : x) v = rng.next_gaussian();
      for (auto& v : y) v = rng.next_gaussian();
      const double lhs = dot(apply(x), y);
      const double rhs = dot(x, apply(y));
      worst = std::max(worst, std::abs(lhs - rhs) / (norm2(x) * norm2(y)));
    }
    return worst;
  }

  /// Same eigenvectors, new eigenvalues (the spectral-filter constructor).
  LinearDenoiser with_eigenvalues(std::vector<double> new_eigs) const {
    if (new_eigs.size() != eigenvalues_.size()) throw ShapeMismatch("with_eigenvalues: size mismatch");
    LinearDenoiser d = *this;
    d.eigenvalues_ = std::move(new_eigs);
    d.update_bounds();
    if (d.rep_ == DenoiserRep::dense) {
      // rebuild the raw matrix as V diag(new) V^T so apply() stays consistent
      const int n = dim();
      std::vector<double> m(static_cast<size_t>(n) * n, 0.0);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int k = 0; k < n; ++k)
            s += (*eigvecs_)[static_cast<size_t>(i) * n + k] * d.eigenvalues_[static_cast<size_t>(k)] *
                 (*eigvecs_)[static_cast<size_t>(j) * n + k];
          m[static_cast<size_t>(i) * n + j] = s;
        }
      d.matrix_ = std::make_shared<const std::vector<double>>(std::move(m));
    }
    return d;
  }

 private:
  void check_size(const Vec& x) const {
    if (static_cast<int>(x.size()) != dim()) throw ShapeMismatch("denoiser: size mismatch");
  }

  Vec apply_eigen_scaled(const Vec& x, const std::vector<double>& scale) const {
    if (rep_ == DenoiserRep::dense) {
      const int n = dim();
      Vec coeff(static_cast<size_t>(n), 0.0);
      for (int j = 0; j < n; ++j) {
        double c = 0.0;
        for (int i = 0; i < n; ++i) c += (*eigvecs_)[static_cast<size_t>(i) * n + j] * x[static_cast<size_t>(i)];
        coeff[static_cast<size_t>(j)] = c * scale[static_cast<size_t>(j)];
      }
      Vec out(static_cast<size_t>(n), 0.0);
      for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += (*eigvecs_)[static_cast<size_t>(i) * n + j] * coeff[static_cast<size_t>(j)];
        out[static_cast<size_t>(i)] = s;
      }
      return out;
    }
    ComplexGrid c = dft2(to_image(x, width_, height_));
    for (size_t k = 0; k < c.data.size(); ++k) c.data[k] *= scale[k];
    return idft2_real(c).data;
  }

  void update_bounds() {
    lambda_lo_ = std::numeric_limits<double>::infinity();
    lambda_hi_ = -std::numeric_limits<double>::infinity();
    for (double v : eigenvalues_) {
      lambda_lo_ = std::min(lambda_lo_, v);
      lambda_hi_ = std::max(lambda_hi_, v);
    }
  }

  DenoiserRep rep_ = DenoiserRep::dft_symbol;
  int width_ = 0, height_ = 0;
  double lambda_lo_ = 0.0, lambda_hi_ = 0.0;
  std::vector<double> eigenvalues_;
  std::shared_ptr<const std::vector<double>> matrix_;   // dense only, raw
  std::shared_ptr<const std::vector<double>> eigvecs_;  // dense only, of the symmetric part
};

// ---------------------------------------------------------------------------
// spectral filtering

/// Eigenvalue filter g_tau controlling the regularization strength of a
/// linear denoiser: g_tau(D) = prox_{tau J}. The canonical family is
///   g_tau(lambda) = lambda / (tau - lambda (tau - 1)),
/// which equals (tau D^{-1} - (tau-1) Id)^{-1} by the functional calculus.
struct SpectralFilter {
  double tau = 1.0;
  std::function<double(double lambda, double tau)> g;

  double operator()(double lambda) const { return g(lambda, tau); }
};

inline SpectralFilter canonical_filter(double tau) {
  if (tau < 0.0) throw FilterDomainViolation("canonical_filter: tau must be nonnegative");
  SpectralFilter f;
  f.tau = tau;
  f.g = [](double lambda, double t) {
    const double denom = t - lambda * (t - 1.0);
    if (denom <= 0.0) throw FilterDomainViolation("canonical filter: tau - lambda*(tau-1) <= 0");
    return lambda / denom;
  };
  return f;
}

/// Filter given by a tabulated lambda -> g curve (linear interpolation),
/// sharing tau across the family only through the table itself.
inline SpectralFilter tabulated_filter(double tau, std::vector<std::pair<double, double>> table) {
  if (table.size() < 2) throw FilterDomainViolation("tabulated_filter: need at least two samples");
  std::sort(table.begin(), table.end());
  SpectralFilter f;
  f.tau = tau;
  f.g = [table = std::move(table)](double lambda, double) {
    if (lambda <= table.front().first) return table.front().second;
    if (lambda >= table.back().first) return table.back().second;
    for (size_t i = 1; i < table.size(); ++i) {
      if (lambda <= table[i].first) {
        const double t = (lambda - table[i - 1].first) / (table[i].first - table[i - 1].first);
        return (1.0 - t) * table[i - 1].second + t * table[i].second;
      }
    }
    return table.back().second;
  };
  return f;
}

struct AdmissibilityReport {
  bool admissible = false;
  double ratio_min = 0.0;  // min over spectrum of (1 - g)/(tau g)
  double ratio_max = 0.0;
  double tau_limit_drift = 0.0;  // change of the ratio between two small tau
};

/// Numerical admissibility check on the denoiser's spectrum grid:
/// (1 - g_tau(lambda)) / (tau g_tau(lambda)) must stay within positive
/// bounds and settle as tau -> 0.
inline AdmissibilityReport check_filter_admissibility(const SpectralFilter& f,
                                                      const std::vector<double>& spectrum) {
  AdmissibilityReport rep;
  if (f.tau == 0.0) {  // tau = 0 is the identity filter; nothing to bound
    rep.admissible = true;
    return rep;
  }
  rep.ratio_min = std::numeric_limits<double>::infinity();
  rep.ratio_max = 0.0;
  rep.admissible = true;
  const double t1 = 1e-6, t2 = 1e-7;
  for (double lambda : spectrum) {
    const double g = f.g(lambda, f.tau);
    if (!(g > 0.0) || !std::isfinite(g)) {
      rep.admissible = false;
      continue;
    }
    const double r = (1.0 - g) / (f.tau * g);
    if (!std::isfinite(r) || r < -1e-12) rep.admissible = false;
    rep.ratio_min = std::min(rep.ratio_min, r);
    rep.ratio_max = std::max(rep.ratio_max, r);
    const double r1 = (1.0 - f.g(lambda, t1)) / (t1 * f.g(lambda, t1));
    const double r2 = (1.0 - f.g(lambda, t2)) / (t2 * f.g(lambda, t2));
    rep.tau_limit_drift = std::max(rep.tau_limit_drift, std::abs(r1 - r2) / (1.0 + std::abs(r2)));
  }
  if (rep.tau_limit_drift > 1e-6) rep.admissible = false;
  return rep;
}

/// g_tau(D): same eigenvectors, filtered eigenvalues. Throws
/// FilterDomainViolation when the filter leaves its domain on the spectrum.
inline LinearDenoiser apply_spectral_filter(const LinearDenoiser& d, const SpectralFilter& f) {
  std::vector<double> filtered(d.eigenvalues().size());
  if (f.tau == 0.0) {
    std::fill(filtered.begin(), filtered.end(), 1.0);  // prox of 0*J is the identity
  } else {
    for (size_t k = 0; k < filtered.size(); ++k) filtered[k] = f.g(d.eigenvalues()[k], f.tau);
  }
  return d.with_eigenvalues(std::move(filtered));
}

// ---------------------------------------------------------------------------
// prox characterization J(x) = 0.5 <x, (D^{-1} - Id) x>

/// J(x) in the eigenbasis: 0.5 * sum ((1 - l_i)/l_i) <x, e_i>^2.
inline double denoiser_regularizer_value(const LinearDenoiser& d, const Vec& x) {
  if (d.lambda_lo() <= 0.0) throw SingularDenoiser("denoiser_regularizer_value: lambda_lo <= 0");
  const Vec c = d.spectral_coefficients_squared(x);
  double s = 0.0;
  for (size_t k = 0; k < c.size(); ++k)
    s += 0.5 * ((1.0 - d.eigenvalues()[k]) / d.eigenvalues()[k]) * c[k];
  return s;
}

struct ProxCharacterizationReport {
  bool pass = false;
  double max_rel_deviation = 0.0;
  double symmetry_residual = 0.0;
  std::string note;
};

/// Checks D = prox_J by solving min_u J(u) + 0.5||u - v||^2 with conjugate
/// gradient (through the symmetrized eigen-representation) and comparing
/// against D applied directly. Symmetric PSD denoisers pass at 1e-8;
/// asymmetric ones are flagged, not thrown.
inline ProxCharacterizationReport verify_prox_characterization(const LinearDenoiser& d,
                                                               int trials = 20,
                                                               std::uint64_t seed = 0x90bULL) {
  ProxCharacterizationReport rep;
  rep.symmetry_residual = d.symmetry_residual();
  if (d.lambda_lo() <= 0.0 || d.lambda_hi() > 1.0 + 1e-12) {
    rep.note = "spectrum outside (0, 1]";
    return rep;
  }
  SplitMix64 rng(seed);
  auto op = [&d](const Vec& x) {
    Vec wx = d.apply_penalty(x);
    for (size_t k = 0; k < x.size(); ++k) wx[k] += x[k];
    return wx;  // (I + W) x
  };
  for (int t = 0; t < trials; ++t) {
    Vec v(static_cast<size_t>(d.dim()));
    for (auto& x : v) x = rng.next_gaussian();
    const Vec solved = linalg::conjugate_gradient(op, v, v, 1e-12, 10000);
    const Vec direct = d.apply(v);
    double diff = 0.0;
    for (size_t k = 0; k < v.size(); ++k) {
      const double e = solved[k] - direct[k];
      diff += e * e;
    }
    rep.max_rel_deviation = std::max(rep.max_rel_deviation, std::sqrt(diff) / norm2(v));
  }
  rep.pass = rep.max_rel_deviation <= 1e-8 && rep.symmetry_residual <= 1e-10;
  return rep;
}

// ---------------------------------------------------------------------------
// PnP reconstruction loops

/// PnP-ADMM for  min_u 0.5||Au - y||^2 + tau_f * J_D(u): the ADMM v-update
/// is replaced by the filtered denoiser. With penalty lambda the exact
/// v-step is prox_{(tau_f/lambda) J} = g_{tau_f/lambda}(D), so the filter
/// parameter is divided by the penalty before filtering.
inline std::pair<Vec, SolverTrace> pnp_admm(const LinearMap& A, const Vec& y,
                                            const LinearDenoiser& d, const SpectralFilter& f,
                                            const SolverConfig& cfg) {
  SpectralFilter scaled = f;
  scaled.tau = f.tau / cfg.lambda;
  const LinearDenoiser filtered = apply_spectral_filter(d, scaled);
  const Fidelity fid = make_fidelity(FidelityKind::l2, y);
  const double tau_f = f.tau;
  const LinearDenoiser* dptr = &d;
  ValueFn r_value;
  if (d.lambda_lo() > 0.0)
    r_value = [dptr, tau_f](const Vec& u) { return tau_f * denoiser_regularizer_value(*dptr, u); };
  VecProx r_prox = [filtered](const Vec& v, double) { return filtered.apply(v); };
  Vec u0(static_cast<size_t>(A.domain.count()), 0.0);
  AdmmResult res = admm(fid, A, r_prox, r_value, std::move(u0), cfg);
  return {std::move(res.u), std::move(res.trace)};
}

// ---------------------------------------------------------------------------
// convergent-regularization sweep

struct SweepRow {
  double delta = 0.0;
  double tau = 0.0;
  std::optional<double> err_vs_udagger;
  double err_vs_utrue = 0.0;
  int iters = 0;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  bool oracle_available = false;

  /// Non-increasing error within 5% slack, on the oracle column when
  /// available and the u_true column otherwise.
  bool monotone(double slack = 0.05) const {
    for (size_t i = 1; i < rows.size(); ++i) {
      const double prev = oracle_available ? *rows[i - 1].err_vs_udagger : rows[i - 1].err_vs_utrue;
      const double cur = oracle_available ? *rows[i].err_vs_udagger : rows[i].err_vs_utrue;
      if (cur > prev * (1.0 + slack)) return false;
    }
    return true;
  }
};

inline void write_sweep_csv(const SweepTable& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_sweep_csv: cannot open " + path);
  out << "delta,tau,err_vs_udagger,err_vs_utrue,iters\n";
  char buf[40];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : t.rows) {
    out << fmt(r.delta) << ',' << fmt(r.tau) << ','
        << (r.err_vs_udagger ? fmt(*r.err_vs_udagger) : std::string()) << ',' << fmt(r.err_vs_utrue)
        << ',' << r.iters << '\n';
  }
  if (!out) throw IoError("write_sweep_csv: write failed for " + path);
}

namespace detail {

/// Dense oracle for the J-minimizing least-squares solution u^dagger:
/// least-squares set parameterized through the eigendecomposition of A*A,
/// then J minimized over the null-space directions. Returns nullopt above
/// the 64x64 instance cap where the dense decomposition is unavailable.
inline std::optional<Vec> j_minimizing_solution(const LinearMap& A, const LinearDenoiser& d,
                                                const Vec& u_true) {
  const int n = A.domain.count();
  if (n > 64 * 64) return std::nullopt;
  // dense A*A from operator applications
  std::vector<double> gram(static_cast<size_t>(n) * n, 0.0);
  for (int j = 0; j < n; ++j) {
    Vec e(static_cast<size_t>(n), 0.0);
    e[static_cast<size_t>(j)] = 1.0;
    const Vec col = A.adjoint(A.apply(e));
    for (int i = 0; i < n; ++i) gram[static_cast<size_t>(i) * n + j] = col[static_cast<size_t>(i)];
  }
  std::vector<double> vectors;
  const std::vector<double> eigs = linalg::jacobi_eigensymmetric(gram, n, &vectors);
  const double lam_max = std::max(std::abs(eigs.front()), std::abs(eigs.back()));
  std::vector<int> null_idx;
  for (int k = 0; k < n; ++k)
    if (eigs[static_cast<size_t>(k)] <= 1e-12 * std::max(1.0, lam_max)) null_idx.push_back(k);
  if (null_idx.empty()) return u_true;  // A injective: the LS solution is unique

  // minimize 0.5 (u_true + Z c)^T W (u_true + Z c) over c
  const int m = static_cast<int>(null_idx.size());
  std::vector<Vec> z(static_cast<size_t>(m), Vec(static_cast<size_t>(n)));
  for (int c = 0; c < m; ++c)
    for (int i = 0; i < n; ++i)
      z[static_cast<size_t>(c)][static_cast<size_t>(i)] =
          vectors[static_cast<size_t>(i) * n + null_idx[static_cast<size_t>(c)]];
  std::vector<Vec> wz(static_cast<size_t>(m));
  for (int c = 0; c < m; ++c) wz[static_cast<size_t>(c)] = d.apply_penalty(z[static_cast<size_t>(c)]);
  std::vector<double> zwz(static_cast<size_t>(m) * m, 0.0);
  Vec rhs(static_cast<size_t>(m), 0.0);
  const Vec wu = d.apply_penalty(u_true);
  for (int a = 0; a < m; ++a) {
    rhs[static_cast<size_t>(a)] = -dot(z[static_cast<size_t>(a)], wu);
    for (int b = 0; b < m; ++b)
      zwz[static_cast<size_t>(a) * m + b] = dot(z[static_cast<size_t>(a)], wz[static_cast<size_t>(b)]);
    zwz[static_cast<size_t>(a) * m + a] += 1e-12;  // harmless ridge for semidefinite W
  }
  const Vec c = linalg::solve_dense(zwz, m, rhs);
  Vec u = u_true;
  for (int a = 0; a < m; ++a)
    for (int i = 0; i < n; ++i) u[static_cast<size_t>(i)] += c[static_cast<size_t>(a)] * z[static_cast<size_t>(a)][static_cast<size_t>(i)];
  return u;
}

}  // namespace detail

/// Runs the parameter-rule sweep: for each noise level delta, draw
/// y_delta = A u_true + n with ||n|| ~ delta (sigma = delta/sqrt(m), stream
/// derived from (seed, level index)), reconstruct with the canonical filter
/// at tau = tau_rule(delta), and record errors against u_true and, on
/// small instances, against the dense u^dagger oracle.
inline SweepTable convergence_sweep(const LinearMap& A, const Vec& u_true, const LinearDenoiser& d,
                                    const std::function<double(double)>& tau_rule,
                                    const std::vector<double>& delta_levels, std::uint64_t seed,
                                    SolverConfig cfg = {}) {
  for (size_t i = 0; i < delta_levels.size(); ++i) {
    if (delta_levels[i] < 0.0) throw DomainViolation("convergence_sweep: delta must be >= 0");
    if (i > 0 && delta_levels[i] >= delta_levels[i - 1])
      throw DomainViolation("convergence_sweep: delta levels must be strictly decreasing");
  }
  if (cfg.max_iters == 1000 && cfg.tol == 1e-8) {  // defaults tuned for the sweep
    cfg.max_iters = 6000;
    cfg.tol = 1e-10;
  }
  // Penalty tracks the regularization strength: the v-step then applies D
  // itself (filter parameter tau/lambda = 1) and both ADMM blocks stay
  // balanced. cfg.lambda acts as the floor for the noiseless levels.
  const double lambda_floor = (cfg.lambda == 1.0) ? 1e-4 : cfg.lambda;
  SweepTable table;
  const std::optional<Vec> udagger = detail::j_minimizing_solution(A, d, u_true);
  table.oracle_available = udagger.has_value();
  const Vec clean = A.apply(u_true);
  const int m = A.range.count();
  const double u_norm = std::max(norm2(u_true), 1e-30);

  for (size_t lvl = 0; lvl < delta_levels.size(); ++lvl) {
    const double delta = delta_levels[lvl];
    Vec y = clean;
    if (delta > 0.0) {
      SplitMix64 rng(derive_seed(seed, lvl));
      const double sigma = delta / std::sqrt(static_cast<double>(m));
      for (auto& v : y) v += sigma * rng.next_gaussian();
    }
    const double tau = tau_rule(delta);
    SolverConfig level_cfg = cfg;
    level_cfg.lambda = std::max(tau, lambda_floor);
    auto [u, trace] = pnp_admm(A, y, d, canonical_filter(tau), level_cfg);
    SweepRow row;
    row.delta = delta;
    row.tau = tau;
    double e_true = 0.0;
    for (size_t k = 0; k < u.size(); ++k) {
      const double e = u[k] - u_true[k];
      e_true += e * e;
    }
    row.err_vs_utrue = std::sqrt(e_true) / u_norm;
    if (udagger) {
      double e_dag = 0.0;
      for (size_t k = 0; k < u.size(); ++k) {
        const double e = u[k] - (*udagger)[k];
        e_dag += e * e;
      }
      row.err_vs_udagger = std::sqrt(e_dag) / u_norm;
    }
    row.iters = trace.iterations();
    table.rows.push_back(row);
  }
  return table;
}

/// Picks the coefficient of the rule tau(delta) = c * delta by a small grid
/// search at the given (smallest) noise level.
inline double calibrate_tau_coefficient(const LinearMap& A, const Vec& u_true,
                                        const LinearDenoiser& d, double delta, std::uint64_t seed,
                                        SolverConfig cfg = {}) {
  if (delta <= 0.0) throw DomainViolation("calibrate_tau_coefficient: delta must be positive");
  if (cfg.max_iters == 1000 && cfg.tol == 1e-8) {
    cfg.max_iters = 4000;
    cfg.tol = 1e-9;
  }
  const double lambda_floor = (cfg.lambda == 1.0) ? 1e-4 : cfg.lambda;
  const Vec clean = A.apply(u_true);
  const int m = A.range.count();
  Vec y = clean;
  SplitMix64 rng(derive_seed(seed, 9999));
  const double sigma = delta / std::sqrt(static_cast<double>(m));
  for (auto& v : y) v += sigma * rng.next_gaussian();

  double best_c = 1.0, best_err = std::numeric_limits<double>::infinity();
  for (double c : {0.05, 0.2, 0.8, 3.2, 12.8, 51.2, 204.8}) {
    SolverConfig level_cfg = cfg;
    level_cfg.lambda = std::max(c * delta, lambda_floor);
    auto [u, trace] = pnp_admm(A, y, d, canonical_filter(c * delta), level_cfg);
    double e = 0.0;
    for (size_t k = 0; k < u.size(); ++k) {
      const double r = u[k] - u_true[k];
      e += r * r;
    }
    if (e < best_err) {
      best_err = e;
      best_c = c;
    }
  }
  return best_c;
}

}  // namespace varipro
