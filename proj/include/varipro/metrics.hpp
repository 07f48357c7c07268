#pragma once

#include <array>
#include <cmath>

#include "varipro/errors.hpp"
#include "varipro/grid.hpp"

namespace varipro {

/// Peak signal-to-noise ratio 10*log10(peak^2 / MSE), capped at 99 dB
/// (the MSE = 0 sentinel).
inline double psnr(const GridImage& u, const GridImage& ref, double peak = 1.0) {
  if (u.width != ref.width || u.height != ref.height) throw ShapeMismatch("psnr: shape mismatch");
  if (peak <= 0.0) throw DomainViolation("psnr: peak must be positive");
  double mse = 0.0;
  for (size_t k = 0; k < u.data.size(); ++k) {
    const double d = u.data[k] - ref.data[k];
    mse += d * d;
  }
  mse /= static_cast<double>(u.size());
  if (mse == 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(peak * peak / mse));
}

inline double relative_error(const GridImage& u, const GridImage& ref) {
  if (u.width != ref.width || u.height != ref.height) throw ShapeMismatch("relative_error: shape mismatch");
  double num = 0.0, den = 0.0;
  for (size_t k = 0; k < u.data.size(); ++k) {
    const double d = u.data[k] - ref.data[k];
    num += d * d;
    den += ref.data[k] * ref.data[k];
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(num / den);
}

/// Dice coefficient 2|A and B| / (|A| + |B|); 1 when both masks are empty.
/// Entries above 0.5 count as members.
inline double dice(const GridImage& a, const GridImage& b) {
  if (a.width != b.width || a.height != b.height) throw ShapeMismatch("dice: shape mismatch");
  long long inter = 0, na = 0, nb = 0;
  for (size_t k = 0; k < a.data.size(); ++k) {
    const bool in_a = a.data[k] > 0.5;
    const bool in_b = b.data[k] > 0.5;
    na += in_a;
    nb += in_b;
    inter += (in_a && in_b);
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

enum class PhantomKind { disk, rectangles, shepp_like };

namespace detail {

// Ten-ellipse head phantom with the usual geometry and rescaled
// intensities so values stay in [0, 1]: (value, a, b, x0, y0, phi_deg).
inline constexpr std::array<std::array<double, 6>, 10> shepp_like_ellipses = {{
    {1.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0},
    {-0.80, 0.6624, 0.8740, 0.00, -0.0184, 0.0},
    {-0.20, 0.1100, 0.3100, 0.22, 0.0000, -18.0},
    {-0.20, 0.1600, 0.4100, -0.22, 0.0000, 18.0},
    {0.10, 0.2100, 0.2500, 0.00, 0.3500, 0.0},
    {0.10, 0.0460, 0.0460, 0.00, 0.1000, 0.0},
    {0.10, 0.0460, 0.0460, 0.00, -0.1000, 0.0},
    {0.10, 0.0460, 0.0230, -0.08, -0.6050, 0.0},
    {0.10, 0.0230, 0.0230, 0.00, -0.6060, 0.0},
    {0.10, 0.0230, 0.0460, 0.06, -0.6050, 0.0},
}};

}  // namespace detail

/// Deterministic analytic phantoms on the unit square:
///   disk:       intensity 1 inside radius 0.4;
///   rectangles: three axis-aligned blocks, intensities 0.3 / 0.6 / 1.0;
///   shepp_like: the ten-ellipse head phantom (table in detail::).
inline GridImage make_phantom(PhantomKind kind, int size) {
  if (size < 16) throw DomainViolation("make_phantom: size must be >= 16");
  GridImage img(size, size, 0.0);
  switch (kind) {
    case PhantomKind::disk: {
      const double r2 = 0.4 * 0.4;
      for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
          const double x = (j + 0.5) / size - 0.5;
          const double y = (i + 0.5) / size - 0.5;
          if (x * x + y * y <= r2) img.at(i, j) = 1.0;
        }
      }
      break;
    }
    case PhantomKind::rectangles: {
      auto block = [&](double r0, double r1, double c0, double c1, double value) {
        const int i0 = static_cast<int>(std::lround(r0 * size));
        const int i1 = static_cast<int>(std::lround(r1 * size));
        const int j0 = static_cast<int>(std::lround(c0 * size));
        const int j1 = static_cast<int>(std::lround(c1 * size));
        for (int i = i0; i < i1; ++i)
          for (int j = j0; j < j1; ++j) img.at(i, j) = value;
      };
      block(0.125, 0.375, 0.125, 0.4375, 0.3);
      block(0.125, 0.4375, 0.5625, 0.875, 0.6);
      block(0.5625, 0.875, 0.1875, 0.8125, 1.0);
      break;
    }
    case PhantomKind::shepp_like: {
      for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
          const double x = 2.0 * ((j + 0.5) / size - 0.5);  // ellipse table lives on [-1,1]^2
          const double y = -2.0 * ((i + 0.5) / size - 0.5);
          double v = 0.0;
          for (const auto& e : detail::shepp_like_ellipses) {
            const double phi = e[5] * M_PI / 180.0;
            const double xr = std::cos(phi) * (x - e[3]) + std::sin(phi) * (y - e[4]);
            const double yr = -std::sin(phi) * (x - e[3]) + std::cos(phi) * (y - e[4]);
            if ((xr * xr) / (e[1] * e[1]) + (yr * yr) / (e[2] * e[2]) <= 1.0) v += e[0];
          }
          img.at(i, j) = std::clamp(v, 0.0, 1.0);
        }
      }
      break;
    }
  }
  return img;
}

}  // namespace varipro
