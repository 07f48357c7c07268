#include <catch2/catch_amalgamated.hpp>

#include "oracle_utils.hpp"
#include "varipro/grid.hpp"

using namespace varipro;

TEST_CASE("gradient of a constant image is zero") {
  GridImage u(5, 4, 3.7);
  const VectorField g = gradient(u);
  for (size_t k = 0; k < g.px.size(); ++k) {
    REQUIRE(g.px[k] == 0.0);
    REQUIRE(g.py[k] == 0.0);
  }
}

TEST_CASE("gradient of a 1x2 image is a single forward difference") {
  GridImage u(2, 1, 0.0);
  u.at(0, 1) = 2.5;
  const VectorField g = gradient(u);
  REQUIRE(g.px[0] == Catch::Approx(2.5));
  REQUIRE(g.px[1] == 0.0);  // Neumann boundary
}

TEST_CASE("divergence is the exact negative adjoint of gradient") {
  // double-sum oracle on one fixed pair
  const GridImage u = oracle::random_image(8, 8, 42);
  const VectorField p = oracle::random_field(8, 8, 43);
  const double lhs = oracle::gradient_inner_product_sum(u, p);
  const double rhs = -dot(u, divergence(p));
  REQUIRE(lhs == Catch::Approx(rhs).margin(1e-12));

  SECTION("all-ones field vs random image") {
    VectorField ones(3, 3);
    std::fill(ones.px.begin(), ones.px.end(), 1.0);
    std::fill(ones.py.begin(), ones.py.end(), 1.0);
    const GridImage v = oracle::random_image(3, 3, 7);
    REQUIRE(oracle::gradient_inner_product_sum(v, ones) ==
            Catch::Approx(-dot(v, divergence(ones))).margin(1e-12));
  }

  SECTION("quantified over 100 random pairs") {
    for (int t = 0; t < 100; ++t) {
      const int w = 2 + static_cast<int>(t % 7);
      const int h = 2 + static_cast<int>((t / 7) % 5);
      GridImage a = oracle::random_image(w, h, 100 + t);
      a.spacing = 0.5 + 0.1 * (t % 3);
      const VectorField b = oracle::random_field(w, h, 200 + t);
      const double gp = dot(gradient(a), b);
      const double ud = dot(a, divergence(b, a.spacing));
      REQUIRE(std::abs(gp + ud) <= 1e-12 * std::max(1.0, std::abs(gp)));
    }
  }
}

TEST_CASE("divergence of gradient matches the 5-point Laplacian on interior pixels") {
  const GridImage u = oracle::random_image(4, 4, 11);
  const GridImage lap = divergence(gradient(u));
  for (int i = 1; i < 3; ++i) {
    for (int j = 1; j < 3; ++j) {
      const double stencil = u.at(i, j + 1) + u.at(i, j - 1) + u.at(i + 1, j) + u.at(i - 1, j) - 4.0 * u.at(i, j);
      REQUIRE(lap.at(i, j) == Catch::Approx(stencil).margin(1e-12));
    }
  }
}

TEST_CASE("zero field maps to zero image") {
  const VectorField z(6, 3);
  const GridImage d = divergence(z);
  for (double v : d.data) REQUIRE(v == 0.0);
}

TEST_CASE("dft2 of a delta is a constant-modulus spectrum") {
  GridImage u(8, 4, 0.0);
  u.at(0, 0) = 1.0;
  const ComplexGrid c = dft2(u);
  const double expected = 1.0 / std::sqrt(32.0);
  for (const auto& z : c.data) REQUIRE(std::abs(z) == Catch::Approx(expected).margin(1e-12));
}

TEST_CASE("dft2 of a constant concentrates at zero frequency") {
  const double value = 0.75;
  GridImage u(6, 6, value);
  const ComplexGrid c = dft2(u);
  REQUIRE(c.at(0, 0).real() == Catch::Approx(value * 6.0).margin(1e-10));
  for (int k = 1; k < c.size(); ++k) REQUIRE(std::abs(c.data[static_cast<size_t>(k)]) < 1e-10);
}

TEST_CASE("dft2 satisfies Parseval and the round trip") {
  const GridImage u = oracle::random_image(16, 16, 5);
  const ComplexGrid c = dft2(u);
  double spec_norm = 0.0;
  for (const auto& z : c.data) spec_norm += std::norm(z);
  REQUIRE(std::sqrt(spec_norm) == Catch::Approx(norm2(u)).margin(1e-10));

  const ComplexGrid back = idft2(c);
  double max_err = 0.0;
  for (int k = 0; k < u.size(); ++k) {
    max_err = std::max(max_err, std::abs(back.data[static_cast<size_t>(k)].real() - u.data[static_cast<size_t>(k)]));
    max_err = std::max(max_err, std::abs(back.data[static_cast<size_t>(k)].imag()));
  }
  REQUIRE(max_err < 1e-10);
}

TEST_CASE("dft2 round trip on non-power-of-two sizes") {
  const GridImage u = oracle::random_image(12, 7, 9);
  const ComplexGrid back = idft2(dft2(u));
  for (int k = 0; k < u.size(); ++k)
    REQUIRE(back.data[static_cast<size_t>(k)].real() == Catch::Approx(u.data[static_cast<size_t>(k)]).margin(1e-10));
}

TEST_CASE("gaussian noise with sigma 0 returns the input") {
  const GridImage u = oracle::random_image(9, 9, 3);
  const GridImage out = add_noise(u, {NoiseKind::gaussian, 0.0, 77});
  REQUIRE(out.data == u.data);
}

TEST_CASE("noise is a pure function of (input, spec)") {
  const GridImage u = oracle::random_image(10, 10, 21);
  for (NoiseKind kind : {NoiseKind::gaussian, NoiseKind::impulse}) {
    const NoiseSpec spec{kind, 0.1, 123456};
    REQUIRE(add_noise(u, spec).data == add_noise(u, spec).data);
  }
  GridImage pos = u;
  for (auto& v : pos.data) v = std::abs(v) + 0.1;
  const NoiseSpec pspec{NoiseKind::poisson, 0.05, 99};
  REQUIRE(add_noise(pos, pspec).data == add_noise(pos, pspec).data);
}

TEST_CASE("gaussian noise has the requested sample deviation") {
  GridImage zeros(64, 64, 0.0);
  const GridImage noisy = add_noise(zeros, {NoiseKind::gaussian, 0.1, 2024});
  double mean = 0.0;
  for (double v : noisy.data) mean += v;
  mean /= noisy.size();
  double var = 0.0;
  for (double v : noisy.data) var += (v - mean) * (v - mean);
  var /= (noisy.size() - 1);
  const double sd = std::sqrt(var);
  REQUIRE(sd > 0.09);
  REQUIRE(sd < 0.11);
}

TEST_CASE("poisson noise rejects negative intensities") {
  GridImage u(4, 4, -1.0);
  REQUIRE_THROWS_AS(add_noise(u, {NoiseKind::poisson, 1.0, 5}), NegativeIntensity);
}

TEST_CASE("impulse noise corrupts the requested share with min/max values") {
  GridImage u(32, 32, 0.5);
  u.at(0, 0) = 0.0;
  u.at(0, 1) = 1.0;
  const GridImage out = add_noise(u, {NoiseKind::impulse, 0.25, 31});
  int changed = 0;
  for (int k = 0; k < u.size(); ++k) {
    if (out.data[static_cast<size_t>(k)] != u.data[static_cast<size_t>(k)]) {
      ++changed;
      REQUIRE((out.data[static_cast<size_t>(k)] == 0.0 || out.data[static_cast<size_t>(k)] == 1.0));
    }
  }
  // corrupted count is the requested share up to pixels already at min/max
  REQUIRE(changed <= 256);
  REQUIRE(changed >= 240);
}

TEST_CASE("all grid operations return finite values on random input") {
  const GridImage u = oracle::random_image(13, 11, 8);
  REQUIRE(all_finite(gradient(u).px));
  REQUIRE(all_finite(divergence(gradient(u)).data));
  REQUIRE(all_finite(add_noise(u, {NoiseKind::gaussian, 0.3, 17}).data));
  const ComplexGrid c = dft2(u);
  for (const auto& z : c.data) REQUIRE((std::isfinite(z.real()) && std::isfinite(z.imag())));
}
