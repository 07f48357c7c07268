#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <map>

#include "oracle_utils.hpp"
#include "varipro/metrics.hpp"
#include "varipro/regularizers.hpp"

using namespace varipro;

TEST_CASE("psnr") {
  const GridImage u = oracle::random_image(10, 10, 240);
  SECTION("identical images hit the 99 dB cap") { REQUIRE(psnr(u, u) == 99.0); }
  SECTION("MSE equal to peak^2 gives 0 dB") {
    GridImage off = u;
    for (auto& v : off.data) v += 1.0;
    REQUIRE(psnr(off, u, 1.0) == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("constant offset 0.1 at peak 1 gives 20 dB") {
    GridImage off = u;
    for (auto& v : off.data) v += 0.1;
    REQUIRE(psnr(off, u, 1.0) == Catch::Approx(20.0).margin(1e-10));
  }
  SECTION("symmetric in its arguments") {
    const GridImage w = oracle::random_image(10, 10, 241);
    REQUIRE(psnr(u, w) == psnr(w, u));
  }
  SECTION("shape mismatch raises") {
    REQUIRE_THROWS_AS(psnr(u, GridImage(9, 10, 0.0)), ShapeMismatch);
  }
}

TEST_CASE("dice") {
  GridImage a(8, 8, 0.0), b(8, 8, 0.0);
  SECTION("identical masks score 1") {
    a.at(2, 2) = a.at(3, 3) = 1.0;
    REQUIRE(dice(a, a) == 1.0);
  }
  SECTION("disjoint non-empty masks score 0") {
    a.at(0, 0) = 1.0;
    b.at(7, 7) = 1.0;
    REQUIRE(dice(a, b) == 0.0);
  }
  SECTION("half-overlap counting oracle: |A and B| = |A|, |B| = 2|A| gives 2/3") {
    for (int j = 0; j < 4; ++j) a.at(1, j) = 1.0;       // |A| = 4
    for (int j = 0; j < 8; ++j) b.at(1, j) = 1.0;       // |B| = 8, contains A
    REQUIRE(dice(a, b) == Catch::Approx(2.0 / 3.0));
    REQUIRE(dice(b, a) == Catch::Approx(2.0 / 3.0));
  }
  SECTION("both empty scores 1 by convention") { REQUIRE(dice(a, b) == 1.0); }
}

TEST_CASE("phantoms") {
  SECTION("disk mass matches pi r^2 within 2 percent") {
    for (int size : {64, 128}) {
      const GridImage d = make_phantom(PhantomKind::disk, size);
      double mass = 0.0;
      for (double v : d.data) mass += v;
      const double expected = M_PI * 0.4 * 0.4 * size * size;
      REQUIRE(mass == Catch::Approx(expected).epsilon(0.02));
    }
  }
  SECTION("rectangles: anisotropic TV equals the perimeter-times-intensity sum") {
    const int size = 32;
    const GridImage img = make_phantom(PhantomKind::rectangles, size);
    // counting oracle: bounding box of each distinct intensity
    std::map<double, std::array<int, 4>> boxes;  // value -> i0, i1, j0, j1
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) {
        const double v = img.at(i, j);
        if (v == 0.0) continue;
        auto it = boxes.find(v);
        if (it == boxes.end()) {
          boxes[v] = {i, i, j, j};
        } else {
          it->second[0] = std::min(it->second[0], i);
          it->second[1] = std::max(it->second[1], i);
          it->second[2] = std::min(it->second[2], j);
          it->second[3] = std::max(it->second[3], j);
        }
      }
    REQUIRE(boxes.size() == 3);
    double expected = 0.0;
    int covered = 0;
    for (const auto& [value, box] : boxes) {
      const int bh = box[1] - box[0] + 1;
      const int bw = box[3] - box[2] + 1;
      expected += value * 2.0 * (bh + bw);
      covered += bh * bw;
    }
    // blocks fill their bounding boxes (no holes), so the oracle is exact
    int nonzero = 0;
    for (double v : img.data) nonzero += (v != 0.0);
    REQUIRE(covered == nonzero);
    const Regularizer tv = make_regularizer(RegKind::tv_aniso, 1.0);
    REQUIRE(reg_value(tv, img) == Catch::Approx(expected).margin(1e-10));
  }
  SECTION("shepp-like phantom has head structure and unit range") {
    const GridImage s = make_phantom(PhantomKind::shepp_like, 64);
    REQUIRE(s.at(0, 0) == 0.0);
    REQUIRE(s.at(0, 63) == 0.0);
    REQUIRE(s.at(32, 32) > 0.0);  // interior tissue
    double mx = 0.0;
    for (double v : s.data) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
      mx = std::max(mx, v);
    }
    REQUIRE(mx == Catch::Approx(1.0));  // skull rim
  }
  SECTION("phantom generation is deterministic") {
    for (PhantomKind kind : {PhantomKind::disk, PhantomKind::rectangles, PhantomKind::shepp_like}) {
      REQUIRE(make_phantom(kind, 32).data == make_phantom(kind, 32).data);
    }
  }
  SECTION("sizes below 16 are rejected") {
    REQUIRE_THROWS_AS(make_phantom(PhantomKind::disk, 8), DomainViolation);
  }
}
