#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "varipro/errors.hpp"
#include "varipro/grid.hpp"
#include "varipro/linalg.hpp"

namespace varipro {

/// Flat-vector shape descriptor. Multi-channel ranges (complex grids,
/// vector fields) are stored planar: channel 0 first, then channel 1.
struct Shape {
  int width = 0;
  int height = 0;
  int channels = 1;

  int count() const { return width * height * channels; }
  bool operator==(const Shape&) const = default;
};

/// A bounded linear forward operator with a numerically matched adjoint.
/// Values are immutable after construction; apply/adjoint are reentrant.
struct LinearMap {
  Shape domain;
  Shape range;
  LinOp apply;
  LinOp adjoint;
  double norm_estimate = 0.0;
};

/// Radon-transform data over (angle, offset), angle-major storage.
struct Sinogram {
  int n_angles = 0;
  int n_offsets = 0;
  double s_max = 0.0;
  std::vector<double> angles;   // radians, uniform on [0, pi)
  std::vector<double> offsets;  // uniform on [-s_max, s_max]
  std::vector<double> data;
};

inline Sinogram make_sinogram_geometry(int n_angles, int n_offsets, double s_max) {
  if (n_angles < 1 || n_offsets < 3) throw DegenerateGeometry("sinogram: need n_angles >= 1, n_offsets >= 3");
  Sinogram s;
  s.n_angles = n_angles;
  s.n_offsets = n_offsets;
  s.s_max = s_max;
  s.angles.resize(static_cast<size_t>(n_angles));
  for (int a = 0; a < n_angles; ++a) s.angles[static_cast<size_t>(a)] = M_PI * a / n_angles;
  s.offsets.resize(static_cast<size_t>(n_offsets));
  for (int o = 0; o < n_offsets; ++o)
    s.offsets[static_cast<size_t>(o)] = -s_max + 2.0 * s_max * o / (n_offsets - 1);
  s.data.assign(static_cast<size_t>(n_angles) * n_offsets, 0.0);
  return s;
}

// ---------------------------------------------------------------------------
// flatten/unflatten between grid types and solver vectors

inline Vec flatten(const GridImage& u) { return u.data; }

inline GridImage to_image(const Vec& v, int w, int h, double spacing = 1.0) {
  if (static_cast<int>(v.size()) != w * h) throw ShapeMismatch("to_image: size mismatch");
  GridImage u(w, h, 0.0, spacing);
  u.data = v;
  return u;
}

inline Vec flatten(const VectorField& f) {
  Vec v(f.px.size() + f.py.size());
  std::copy(f.px.begin(), f.px.end(), v.begin());
  std::copy(f.py.begin(), f.py.end(), v.begin() + static_cast<std::ptrdiff_t>(f.px.size()));
  return v;
}

inline VectorField to_field(const Vec& v, int w, int h) {
  if (static_cast<int>(v.size()) != 2 * w * h) throw ShapeMismatch("to_field: size mismatch");
  VectorField f(w, h);
  std::copy(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(f.px.size()), f.px.begin());
  std::copy(v.begin() + static_cast<std::ptrdiff_t>(f.px.size()), v.end(), f.py.begin());
  return f;
}

inline Vec flatten(const ComplexGrid& c) {
  Vec v(2 * c.data.size());
  for (size_t k = 0; k < c.data.size(); ++k) {
    v[k] = c.data[k].real();
    v[k + c.data.size()] = c.data[k].imag();
  }
  return v;
}

inline ComplexGrid to_complex(const Vec& v, int w, int h) {
  if (static_cast<int>(v.size()) != 2 * w * h) throw ShapeMismatch("to_complex: size mismatch");
  ComplexGrid c(w, h);
  const size_t n = c.data.size();
  for (size_t k = 0; k < n; ++k) c.data[k] = {v[k], v[k + n]};
  return c;
}

// ---------------------------------------------------------------------------
// operator factories

inline LinearMap make_identity(int w, int h) {
  LinearMap m;
  m.domain = m.range = Shape{w, h, 1};
  m.apply = [](const Vec& u) { return u; };
  m.adjoint = [](const Vec& u) { return u; };
  m.norm_estimate = 1.0;
  return m;
}

namespace detail {
inline void require_binary(const GridImage& mask, const char* who) {
  for (double v : mask.data)
    if (v != 0.0 && v != 1.0) throw NonBinaryMask(std::string(who) + ": mask entries must be 0 or 1");
}
}  // namespace detail

/// Pointwise multiplication by a {0,1} mask (inpainting forward operator).
/// Diagonal, hence self-adjoint and idempotent.
inline LinearMap make_mask(const GridImage& mask) {
  detail::require_binary(mask, "make_mask");
  LinearMap m;
  m.domain = m.range = Shape{mask.width, mask.height, 1};
  const std::vector<double> w = mask.data;
  auto mul = [w](const Vec& u) {
    if (u.size() != w.size()) throw ShapeMismatch("mask: size mismatch");
    Vec out(u.size());
    for (size_t k = 0; k < u.size(); ++k) out[k] = w[k] * u[k];
    return out;
  };
  m.apply = mul;
  m.adjoint = mul;
  m.norm_estimate = std::any_of(w.begin(), w.end(), [](double v) { return v != 0.0; }) ? 1.0 : 0.0;
  return m;
}

/// Periodic convolution, diagonalized by the DFT. The adjoint convolves
/// with the flipped kernel, i.e. uses the conjugate symbol. The kernel is
/// normalized to unit sum; `renormalized` reports whether that was needed.
inline LinearMap make_blur(const GridImage& kernel, int w, int h, bool* renormalized = nullptr) {
  if (kernel.size() == 0) throw EmptyKernel("make_blur: empty kernel");
  double sum = 0.0;
  for (double v : kernel.data) {
    if (v < 0.0) throw DomainViolation("make_blur: kernel must be nonnegative");
    sum += v;
  }
  if (sum <= 0.0) throw EmptyKernel("make_blur: kernel sums to zero");
  const bool renorm = std::abs(sum - 1.0) > 1e-12;
  if (renormalized) *renormalized = renorm;

  // embed the kernel centered at the origin with periodic wrap
  GridImage embedded(w, h, 0.0);
  const int ci = kernel.height / 2;
  const int cj = kernel.width / 2;
  for (int i = 0; i < kernel.height; ++i) {
    for (int j = 0; j < kernel.width; ++j) {
      const int di = ((i - ci) % h + h) % h;
      const int dj = ((j - cj) % w + w) % w;
      embedded.at(di, dj) += kernel.at(i, j) / sum;
    }
  }
  ComplexGrid sym = dft2(embedded);
  const double scale = std::sqrt(static_cast<double>(w) * h);
  for (auto& z : sym.data) z *= scale;  // unitary DFT: conv symbol = sqrt(wh) * F(kernel)

  const auto symbol = std::make_shared<const std::vector<std::complex<double>>>(sym.data);
  double max_mod = 0.0;
  for (const auto& z : *symbol) max_mod = std::max(max_mod, std::abs(z));

  LinearMap m;
  m.domain = m.range = Shape{w, h, 1};
  m.apply = [symbol, w, h](const Vec& u) {
    ComplexGrid c = dft2(to_image(u, w, h));
    for (size_t k = 0; k < c.data.size(); ++k) c.data[k] *= (*symbol)[k];
    return idft2_real(c).data;
  };
  m.adjoint = [symbol, w, h](const Vec& u) {
    ComplexGrid c = dft2(to_image(u, w, h));
    for (size_t k = 0; k < c.data.size(); ++k) c.data[k] *= std::conj((*symbol)[k]);
    return idft2_real(c).data;
  };
  m.norm_estimate = max_mod;
  return m;
}

/// Undersampled Fourier acquisition: apply = mask .* dft2, adjoint fills
/// unsampled coefficients with zero and takes the real part of idft2.
/// Range is planar (re, im); unitary DFT makes the operator nonexpansive.
inline LinearMap make_subsampled_fourier(const GridImage& mask) {
  detail::require_binary(mask, "make_subsampled_fourier");
  const int w = mask.width, h = mask.height;
  const auto sel = std::make_shared<const std::vector<double>>(mask.data);
  LinearMap m;
  m.domain = Shape{w, h, 1};
  m.range = Shape{w, h, 2};
  m.apply = [sel, w, h](const Vec& u) {
    ComplexGrid c = dft2(to_image(u, w, h));
    for (size_t k = 0; k < c.data.size(); ++k) c.data[k] *= (*sel)[k];
    return flatten(c);
  };
  m.adjoint = [sel, w, h](const Vec& v) {
    ComplexGrid c = to_complex(v, w, h);
    for (size_t k = 0; k < c.data.size(); ++k) c.data[k] *= (*sel)[k];
    return idft2_real(c).data;
  };
  m.norm_estimate = 1.0;
  return m;
}

// ---------------------------------------------------------------------------
// Radon transform (parallel beam, ray-driven with matched adjoint)

namespace detail {

/// Geometry of the ray-driven discretization. The image lives on the unit
/// square [-1/2, 1/2]^2; rays march with step h/2 and accumulate bilinear
/// interpolation weights times the step, so adjoint weights transpose
/// exactly.
struct RadonGeometry {
  int img_w = 0, img_h = 0;
  int n_angles = 0, n_offsets = 0;
  double s_max = 0.0;
  std::vector<double> cos_t, sin_t, offsets;
  double step = 0.0;

  template <class F>
  void trace_ray(int a, int o, F&& visit) const {
    const double c = cos_t[static_cast<size_t>(a)];
    const double s = sin_t[static_cast<size_t>(a)];
    const double off = offsets[static_cast<size_t>(o)];
    const double hx = 1.0 / img_w;
    const double hy = 1.0 / img_h;
    // clip the march to the ray's intersection with the (padded) square
    double t_lo = -0.5 * std::sqrt(2.0) - step;
    double t_hi = -t_lo;
    const double pad = 0.5 + std::max(hx, hy);
    // x(t) = off*c - t*s in [-pad, pad]; y(t) = off*s + t*c in [-pad, pad]
    auto clip_axis = [&](double origin, double slope) {
      if (std::abs(slope) < 1e-15) return;
      double a0 = (-pad - origin) / slope;
      double a1 = (pad - origin) / slope;
      if (a0 > a1) std::swap(a0, a1);
      t_lo = std::max(t_lo, a0);
      t_hi = std::min(t_hi, a1);
    };
    clip_axis(off * c, -s);
    clip_axis(off * s, c);
    if (t_lo > t_hi) return;
    // snap to the global step lattice so the quadrature is translation-free
    t_lo = std::floor(t_lo / step) * step;
    for (double t = t_lo; t <= t_hi; t += step) {
      const double x = off * c - t * s;
      const double y = off * s + t * c;
      // pixel-center coordinates
      const double fx = (x + 0.5) / hx - 0.5;
      const double fy = (y + 0.5) / hy - 0.5;
      const int j0 = static_cast<int>(std::floor(fx));
      const int i0 = static_cast<int>(std::floor(fy));
      if (j0 < -1 || j0 > img_w - 1 || i0 < -1 || i0 > img_h - 1) continue;
      const double wx = fx - j0;
      const double wy = fy - i0;
      const double w00 = (1.0 - wx) * (1.0 - wy) * step;
      const double w01 = wx * (1.0 - wy) * step;
      const double w10 = (1.0 - wx) * wy * step;
      const double w11 = wx * wy * step;
      if (i0 >= 0 && j0 >= 0) visit(i0 * img_w + j0, w00);
      if (i0 >= 0 && j0 + 1 < img_w) visit(i0 * img_w + j0 + 1, w01);
      if (i0 + 1 < img_h && j0 >= 0) visit((i0 + 1) * img_w + j0, w10);
      if (i0 + 1 < img_h && j0 + 1 < img_w) visit((i0 + 1) * img_w + j0 + 1, w11);
    }
  }
};

}  // namespace detail

/// Parallel-beam Radon transform on the unit square with uniformly spaced
/// angles on [0, pi) and offsets on [-s_max, s_max]. The offset range must
/// cover the image diagonal so no mass leaves the field of view.
inline LinearMap make_radon(int n_angles, int n_offsets, int img_w, int img_h,
                            double s_max = 0.5 * std::sqrt(2.0)) {
  if (n_angles < 1 || n_offsets < 3) throw DegenerateGeometry("make_radon: need n_angles >= 1, n_offsets >= 3");
  if (s_max < 0.5 * std::sqrt(2.0) - 1e-12)
    throw DegenerateGeometry("make_radon: offsets do not cover the image diagonal");

  auto geo = std::make_shared<detail::RadonGeometry>();
  geo->img_w = img_w;
  geo->img_h = img_h;
  geo->n_angles = n_angles;
  geo->n_offsets = n_offsets;
  geo->s_max = s_max;
  geo->step = 0.5 * std::min(1.0 / img_w, 1.0 / img_h);
  geo->cos_t.resize(static_cast<size_t>(n_angles));
  geo->sin_t.resize(static_cast<size_t>(n_angles));
  for (int a = 0; a < n_angles; ++a) {
    const double theta = M_PI * a / n_angles;
    geo->cos_t[static_cast<size_t>(a)] = std::cos(theta);
    geo->sin_t[static_cast<size_t>(a)] = std::sin(theta);
  }
  geo->offsets.resize(static_cast<size_t>(n_offsets));
  for (int o = 0; o < n_offsets; ++o)
    geo->offsets[static_cast<size_t>(o)] = -s_max + 2.0 * s_max * o / (n_offsets - 1);

  LinearMap m;
  m.domain = Shape{img_w, img_h, 1};
  m.range = Shape{n_offsets, n_angles, 1};
  m.apply = [geo](const Vec& u) {
    if (static_cast<int>(u.size()) != geo->img_w * geo->img_h) throw ShapeMismatch("radon: size mismatch");
    Vec out(static_cast<size_t>(geo->n_angles) * geo->n_offsets, 0.0);
    for (int a = 0; a < geo->n_angles; ++a) {
      for (int o = 0; o < geo->n_offsets; ++o) {
        double acc = 0.0;
        geo->trace_ray(a, o, [&](int idx, double w) { acc += w * u[static_cast<size_t>(idx)]; });
        out[static_cast<size_t>(a) * geo->n_offsets + o] = acc;
      }
    }
    return out;
  };
  m.adjoint = [geo](const Vec& f) {
    if (static_cast<int>(f.size()) != geo->n_angles * geo->n_offsets) throw ShapeMismatch("radon adjoint: size mismatch");
    Vec out(static_cast<size_t>(geo->img_w) * geo->img_h, 0.0);
    for (int a = 0; a < geo->n_angles; ++a) {
      for (int o = 0; o < geo->n_offsets; ++o) {
        const double v = f[static_cast<size_t>(a) * geo->n_offsets + o];
        if (v == 0.0) continue;
        geo->trace_ray(a, o, [&](int idx, double w) { out[static_cast<size_t>(idx)] += w * v; });
      }
    }
    return out;
  };
  // Schur-test bound sqrt(max row sum * max column sum): valid because all
  // interpolation weights are nonnegative, and far cheaper than a power
  // iteration at large sizes.
  {
    const Vec ones_img(static_cast<size_t>(img_w) * img_h, 1.0);
    const Vec ones_sino(static_cast<size_t>(n_angles) * n_offsets, 1.0);
    const Vec row_sums = m.apply(ones_img);
    const Vec col_sums = m.adjoint(ones_sino);
    double max_row = 0.0, max_col = 0.0;
    for (double v : row_sums) max_row = std::max(max_row, v);
    for (double v : col_sums) max_col = std::max(max_col, v);
    m.norm_estimate = std::sqrt(max_row * max_col);
  }
  return m;
}

/// Discrete gradient as a LinearMap (range is the planar vector field);
/// the adjoint is -divergence. Norm bound sqrt(8)/h is the classical one.
inline LinearMap make_gradient_map(int w, int h, double spacing = 1.0) {
  LinearMap m;
  m.domain = Shape{w, h, 1};
  m.range = Shape{w, h, 2};
  m.apply = [w, h, spacing](const Vec& u) { return flatten(gradient(to_image(u, w, h, spacing))); };
  m.adjoint = [w, h, spacing](const Vec& p) {
    GridImage d = divergence(to_field(p, w, h), spacing);
    for (auto& v : d.data) v = -v;
    return d.data;
  };
  m.norm_estimate = std::sqrt(8.0) / spacing;
  return m;
}

/// Vertical stack [A; B] of two maps with a common domain.
inline LinearMap make_stacked(const LinearMap& a, const LinearMap& b) {
  if (!(a.domain == b.domain)) throw ShapeMismatch("make_stacked: domain mismatch");
  LinearMap m;
  m.domain = a.domain;
  m.range = Shape{a.range.count() + b.range.count(), 1, 1};
  const int na = a.range.count();
  m.apply = [a, b, na](const Vec& u) {
    Vec va = a.apply(u);
    Vec vb = b.apply(u);
    Vec out(va.size() + vb.size());
    std::copy(va.begin(), va.end(), out.begin());
    std::copy(vb.begin(), vb.end(), out.begin() + na);
    return out;
  };
  m.adjoint = [a, b, na](const Vec& p) {
    Vec pa(p.begin(), p.begin() + na);
    Vec pb(p.begin() + na, p.end());
    Vec out = a.adjoint(pa);
    Vec out_b = b.adjoint(pb);
    for (size_t k = 0; k < out.size(); ++k) out[k] += out_b[k];
    return out;
  };
  m.norm_estimate = std::sqrt(a.norm_estimate * a.norm_estimate + b.norm_estimate * b.norm_estimate);
  return m;
}

/// Top-k singular values of A by block power iteration on A*A, descending.
inline std::vector<double> singular_spectrum_probe(const LinearMap& A, int k, int max_iters = 300,
                                                   double tol = 1e-6) {
  if (k < 1) throw DomainViolation("singular_spectrum_probe: k >= 1 required");
  const size_t n = static_cast<size_t>(A.domain.count());
  SplitMix64 rng(0xb10c5ULL);
  std::vector<Vec> basis(static_cast<size_t>(k), Vec(n));
  for (auto& col : basis)
    for (auto& x : col) x = rng.next_gaussian();
  linalg::orthonormalize(basis, rng);

  std::vector<double> ritz(static_cast<size_t>(k), 0.0);
  for (int it = 0; it < max_iters; ++it) {
    std::vector<Vec> w(static_cast<size_t>(k));
    for (int c = 0; c < k; ++c) w[static_cast<size_t>(c)] = A.adjoint(A.apply(basis[static_cast<size_t>(c)]));
    // Rayleigh-Ritz on the current block
    std::vector<double> b(static_cast<size_t>(k) * k, 0.0);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) b[static_cast<size_t>(i) * k + j] = dot(basis[static_cast<size_t>(i)], w[static_cast<size_t>(j)]);
    // symmetrize against rounding
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) {
        const double m = 0.5 * (b[static_cast<size_t>(i) * k + j] + b[static_cast<size_t>(j) * k + i]);
        b[static_cast<size_t>(i) * k + j] = b[static_cast<size_t>(j) * k + i] = m;
      }
    std::vector<double> eig = linalg::jacobi_eigensymmetric(b, k);
    std::vector<double> ritz_new(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) ritz_new[static_cast<size_t>(i)] = std::sqrt(std::max(0.0, eig[static_cast<size_t>(k - 1 - i)]));
    double change = 0.0;
    for (int i = 0; i < k; ++i)
      change = std::max(change, std::abs(ritz_new[static_cast<size_t>(i)] - ritz[static_cast<size_t>(i)]));
    ritz = ritz_new;
    basis = std::move(w);
    linalg::orthonormalize(basis, rng);
    if (it > 0 && change <= tol * std::max(1.0, ritz[0])) return ritz;
  }
  throw ConvergenceFailure("singular_spectrum_probe: iteration cap reached");
}

}  // namespace varipro
