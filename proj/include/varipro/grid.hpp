#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <vector>

#include "varipro/errors.hpp"

namespace varipro {

/// Dense 2D scalar field on a uniform pixel grid, row-major storage.
/// `spacing` is the grid step h used by the discrete differential operators.
struct GridImage {
  int width = 0;
  int height = 0;
  double spacing = 1.0;
  std::vector<double> data;

  GridImage() = default;
  GridImage(int w, int h, double fill = 0.0, double step = 1.0)
      : width(w), height(h), spacing(step), data(static_cast<size_t>(w) * h, fill) {}

  int size() const { return width * height; }
  double& at(int i, int j) { return data[static_cast<size_t>(i) * width + j]; }
  double at(int i, int j) const { return data[static_cast<size_t>(i) * width + j]; }
};

/// Row-major complex-valued grid (Fourier coefficients and k-space data).
struct ComplexGrid {
  int width = 0;
  int height = 0;
  std::vector<std::complex<double>> data;

  ComplexGrid() = default;
  ComplexGrid(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h) {}

  int size() const { return width * height; }
  std::complex<double>& at(int i, int j) { return data[static_cast<size_t>(i) * width + j]; }
  std::complex<double> at(int i, int j) const { return data[static_cast<size_t>(i) * width + j]; }
};

/// Two-channel field (px, py) paired with a GridImage of the same shape.
/// Holds discrete gradients and the dual variable of the TV problem.
struct VectorField {
  int width = 0;
  int height = 0;
  std::vector<double> px, py;

  VectorField() = default;
  VectorField(int w, int h)
      : width(w), height(h), px(static_cast<size_t>(w) * h, 0.0), py(static_cast<size_t>(w) * h, 0.0) {}

  int size() const { return width * height; }
};

enum class NoiseKind { gaussian, poisson, impulse };

/// Noise model descriptor. `level` is the standard deviation for gaussian,
/// the count scaling for poisson, and the corruption fraction for impulse.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::gaussian;
  double level = 0.0;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// small vector helpers shared across modules

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeMismatch("dot: size mismatch");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline double dot(const GridImage& a, const GridImage& b) { return dot(a.data, b.data); }
inline double norm2(const GridImage& a) { return norm2(a.data); }

inline double dot(const VectorField& a, const VectorField& b) {
  return dot(a.px, b.px) + dot(a.py, b.py);
}
inline double norm2(const VectorField& a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// ---------------------------------------------------------------------------
// deterministic random streams

/// SplitMix64 stream; the single RNG used everywhere so traces are
/// reproducible across platforms up to floating-point rounding.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in (0, 1].
  double next_unit() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

  /// Standard normal via Box-Muller, consuming two uniforms per pair.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Poisson by CDF inversion; falls back to a rounded normal for very
  /// large means where the pmf underflows.
  long long next_poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean > 500.0) {
      const double z = next_gaussian();
      return std::max(0LL, static_cast<long long>(std::llround(mean + std::sqrt(mean) * z)));
    }
    const double u = next_unit();
    double p = std::exp(-mean);
    double cdf = p;
    long long k = 0;
    const long long cap = static_cast<long long>(mean + 12.0 * std::sqrt(mean) + 60.0);
    while (u > cdf && k < cap) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Derives an independent substream seed, e.g. one per sweep level.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  SplitMix64 s(seed ^ (0xA0761D6478BD642FULL * (index + 1)));
  return s.next();
}

// ---------------------------------------------------------------------------
// discrete differential operators

/// Forward differences with Neumann boundary: px[i,j] = (u[i,j+1]-u[i,j])/h
/// for j < width-1 and 0 in the last column; py analogously in rows.
inline VectorField gradient(const GridImage& u) {
  VectorField g(u.width, u.height);
  const double inv_h = 1.0 / u.spacing;
  for (int i = 0; i < u.height; ++i) {
    for (int j = 0; j < u.width; ++j) {
      const size_t k = static_cast<size_t>(i) * u.width + j;
      if (j < u.width - 1) g.px[k] = (u.data[k + 1] - u.data[k]) * inv_h;
      if (i < u.height - 1) g.py[k] = (u.data[k + u.width] - u.data[k]) * inv_h;
    }
  }
  return g;
}

/// Negative adjoint of `gradient` under the plain Euclidean inner product:
/// <gradient(u), p> + <u, divergence(p)> = 0 for all u, p. The last column
/// of px and last row of py are ignored, matching the range of `gradient`.
inline GridImage divergence(const VectorField& p, double spacing = 1.0) {
  GridImage d(p.width, p.height, 0.0, spacing);
  const double inv_h = 1.0 / spacing;
  for (int i = 0; i < p.height; ++i) {
    for (int j = 0; j < p.width; ++j) {
      const size_t k = static_cast<size_t>(i) * p.width + j;
      double v = 0.0;
      if (j < p.width - 1) v += p.px[k];
      if (j > 0) v -= p.px[k - 1];
      if (i < p.height - 1) v += p.py[k];
      if (i > 0) v -= p.py[k - p.width];
      d.data[k] = v * inv_h;
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// unitary 2D DFT

namespace detail {

using cvec = std::vector<std::complex<double>>;

inline bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 FFT, unnormalized. `inverse` flips the sign
/// of the twiddle exponent only.
inline void fft_pow2(cvec& a, bool inverse) {
  const size_t n = a.size();
  if (n <= 1) return;
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> x = a[i + j];
        const std::complex<double> y = a[i + j + len / 2] * w;
        a[i + j] = x + y;
        a[i + j + len / 2] = x - y;
        w *= wlen;
      }
    }
  }
}

/// Unnormalized DFT of arbitrary length via Bluestein's chirp transform.
inline void dft_bluestein(cvec& a, bool inverse) {
  const size_t n = a.size();
  if (n <= 1) return;
  size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;
  cvec chirp(n);
  for (size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the phase argument small and accurate
    const long long q = static_cast<long long>((static_cast<unsigned long long>(k) * k) % (2 * n));
    const double ang = (inverse ? 1.0 : -1.0) * M_PI * static_cast<double>(q) / static_cast<double>(n);
    chirp[k] = std::complex<double>(std::cos(ang), std::sin(ang));
  }
  cvec fa(m, {0.0, 0.0}), fb(m, {0.0, 0.0});
  for (size_t k = 0; k < n; ++k) fa[k] = a[k] * chirp[k];
  fb[0] = std::conj(chirp[0]);
  for (size_t k = 1; k < n; ++k) fb[k] = fb[m - k] = std::conj(chirp[k]);
  fft_pow2(fa, false);
  fft_pow2(fb, false);
  for (size_t k = 0; k < m; ++k) fa[k] *= fb[k];
  fft_pow2(fa, true);
  const double scale = 1.0 / static_cast<double>(m);
  for (size_t k = 0; k < n; ++k) a[k] = fa[k] * scale * chirp[k];
}

inline void dft_any(cvec& a, bool inverse) {
  if (is_pow2(a.size()))
    fft_pow2(a, inverse);
  else
    dft_bluestein(a, inverse);
}

/// 2D transform on a row-major w x h grid; unnormalized in both directions.
inline void dft2_inplace(cvec& a, int w, int h, bool inverse) {
  cvec row(static_cast<size_t>(w));
  for (int i = 0; i < h; ++i) {
    std::copy_n(a.begin() + static_cast<size_t>(i) * w, w, row.begin());
    dft_any(row, inverse);
    std::copy_n(row.begin(), w, a.begin() + static_cast<size_t>(i) * w);
  }
  cvec col(static_cast<size_t>(h));
  for (int j = 0; j < w; ++j) {
    for (int i = 0; i < h; ++i) col[i] = a[static_cast<size_t>(i) * w + j];
    dft_any(col, inverse);
    for (int i = 0; i < h; ++i) a[static_cast<size_t>(i) * w + j] = col[i];
  }
}

}  // namespace detail

/// Unitary 2D DFT: both directions carry the 1/sqrt(wh) factor, so the
/// transform is an isometry and masked-Fourier operators are nonexpansive.
inline ComplexGrid dft2(const GridImage& u) {
  if (u.width < 1 || u.height < 1) throw ShapeMismatch("dft2: empty grid");
  ComplexGrid c(u.width, u.height);
  for (int k = 0; k < u.size(); ++k) c.data[k] = {u.data[k], 0.0};
  detail::dft2_inplace(c.data, u.width, u.height, false);
  const double s = 1.0 / std::sqrt(static_cast<double>(u.size()));
  for (auto& z : c.data) z *= s;
  return c;
}

inline ComplexGrid dft2(const ComplexGrid& u) {
  if (u.width < 1 || u.height < 1) throw ShapeMismatch("dft2: empty grid");
  ComplexGrid c = u;
  detail::dft2_inplace(c.data, u.width, u.height, false);
  const double s = 1.0 / std::sqrt(static_cast<double>(u.size()));
  for (auto& z : c.data) z *= s;
  return c;
}

inline ComplexGrid idft2(const ComplexGrid& c) {
  if (c.width < 1 || c.height < 1) throw ShapeMismatch("idft2: empty grid");
  ComplexGrid u = c;
  detail::dft2_inplace(u.data, c.width, c.height, true);
  const double s = 1.0 / std::sqrt(static_cast<double>(c.size()));
  for (auto& z : u.data) z *= s;
  return u;
}

/// Real part of the inverse transform, for real-image domains.
inline GridImage idft2_real(const ComplexGrid& c, double spacing = 1.0) {
  ComplexGrid u = idft2(c);
  GridImage out(c.width, c.height, 0.0, spacing);
  for (int k = 0; k < c.size(); ++k) out.data[k] = u.data[k].real();
  return out;
}

// ---------------------------------------------------------------------------
// noise generation

/// Deterministic noise: a pure function of (u, spec). Gaussian adds
/// level * z with z from Box-Muller; poisson draws Poisson(u/level)*level
/// per pixel; impulse replaces a `level` share of pixels by min/max of u.
inline GridImage add_noise(const GridImage& u, const NoiseSpec& spec) {
  if (spec.level < 0.0) throw DomainViolation("add_noise: negative noise level");
  GridImage out = u;
  SplitMix64 rng(spec.seed);
  switch (spec.kind) {
    case NoiseKind::gaussian: {
      if (spec.level == 0.0) return out;
      for (auto& v : out.data) v += spec.level * rng.next_gaussian();
      break;
    }
    case NoiseKind::poisson: {
      for (double v : u.data)
        if (v < 0.0) throw NegativeIntensity("add_noise: poisson requires nonnegative input");
      if (spec.level == 0.0) return out;
      for (auto& v : out.data) v = static_cast<double>(rng.next_poisson(v / spec.level)) * spec.level;
      break;
    }
    case NoiseKind::impulse: {
      if (spec.level > 1.0) throw DomainViolation("add_noise: impulse fraction must be in [0,1]");
      const auto [lo_it, hi_it] = std::minmax_element(u.data.begin(), u.data.end());
      const double lo = u.data.empty() ? 0.0 : *lo_it;
      const double hi = u.data.empty() ? 0.0 : *hi_it;
      const long long n = u.size();
      const long long m = std::llround(spec.level * static_cast<double>(n));
      std::vector<int> idx(static_cast<size_t>(n));
      std::iota(idx.begin(), idx.end(), 0);
      for (long long t = 0; t < m; ++t) {
        const long long j = t + static_cast<long long>(rng.next() % static_cast<std::uint64_t>(n - t));
        std::swap(idx[static_cast<size_t>(t)], idx[static_cast<size_t>(j)]);
        out.data[static_cast<size_t>(idx[static_cast<size_t>(t)])] = (rng.next() & 1ULL) ? hi : lo;
      }
      break;
    }
  }
  return out;
}

}  // namespace varipro
