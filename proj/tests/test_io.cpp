#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "oracle_utils.hpp"
#include "varipro/io.hpp"
#include "varipro/solvers.hpp"

using namespace varipro;
namespace fs = std::filesystem;

namespace {
struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("varipro_io_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};
}  // namespace

TEST_CASE("pgm round trip preserves values up to quantization") {
  TempDir tmp;
  const GridImage img = oracle::random_image(17, 9, 300);
  for (bool binary : {false, true}) {
    const std::string p = tmp.file(binary ? "a.pgm" : "b.pgm");
    write_pgm(img, p, binary);
    const GridImage back = read_pgm(p);
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    const auto [mn, mx] = std::minmax_element(img.data.begin(), img.data.end());
    const double q = (*mx - *mn) / 255.0;  // one quantization step
    for (int k = 0; k < img.size(); ++k)
      REQUIRE(back.data[static_cast<size_t>(k)] ==
              Catch::Approx(img.data[static_cast<size_t>(k)]).margin(0.51 * q));
  }
}

TEST_CASE("pgm with explicit unit range maps {0,1} masks to {0,255}") {
  TempDir tmp;
  GridImage mask(4, 2, 0.0);
  mask.at(0, 0) = 1.0;
  mask.at(1, 3) = 1.0;
  write_pgm(mask, tmp.file("mask.pgm"), false, {{0.0, 1.0}});
  std::ifstream in(tmp.file("mask.pgm"));
  std::string magic;
  in >> magic;
  REQUIRE(magic == "P2");
  const GridImage back = read_pgm(tmp.file("mask.pgm"));
  REQUIRE(back.data == mask.data);
}

TEST_CASE("csv image round trip is exact") {
  TempDir tmp;
  const GridImage img = oracle::random_image(7, 5, 301);
  write_csv(img, tmp.file("img.csv"));
  const GridImage back = read_csv(tmp.file("img.csv"));
  REQUIRE(back.width == img.width);
  REQUIRE(back.height == img.height);
  REQUIRE(back.data == img.data);
}

TEST_CASE("sinogram csv round trip keeps header and data") {
  TempDir tmp;
  Sinogram s = make_sinogram_geometry(6, 9, 0.75);
  SplitMix64 rng(8);
  for (auto& v : s.data) v = rng.next_gaussian();
  write_sinogram_csv(s, tmp.file("sino.csv"));
  const Sinogram back = read_sinogram_csv(tmp.file("sino.csv"));
  REQUIRE(back.n_angles == 6);
  REQUIRE(back.n_offsets == 9);
  REQUIRE(back.s_max == Catch::Approx(0.75));
  REQUIRE(back.data == s.data);
  for (int a = 1; a < back.n_angles; ++a)
    REQUIRE(back.angles[static_cast<size_t>(a)] > back.angles[static_cast<size_t>(a - 1)]);
}

TEST_CASE("prototype directories load in filename order") {
  TempDir tmp;
  GridImage a(4, 4, 0.25);
  GridImage b(4, 4, 0.5);
  write_csv(a, tmp.file("0_a.csv"));
  write_pgm(b, tmp.file("1_b.pgm"), false, {{0.0, 1.0}});
  const auto protos = load_image_directory(tmp.path.string());
  REQUIRE(protos.size() == 2);
  REQUIRE(protos[0].data[0] == Catch::Approx(0.25));
  REQUIRE(protos[1].data[0] == Catch::Approx(0.5).margin(1e-2));
}

TEST_CASE("missing files raise IoError") {
  REQUIRE_THROWS_AS(read_pgm("/nonexistent/file.pgm"), IoError);
  REQUIRE_THROWS_AS(read_csv("/nonexistent/file.csv"), IoError);
}

TEST_CASE("trace csv carries the fixed column layout") {
  TempDir tmp;
  SolverTrace trace;
  TraceRecord a;
  a.iter = 1;
  a.energy = 2.5;
  a.gap = 0.125;
  a.primal_res = 1e-3;
  a.dual_res = 2e-3;
  trace.records.push_back(a);
  TraceRecord b = a;
  b.iter = 2;
  b.gap.reset();  // absent gap becomes an empty field
  trace.records.push_back(b);
  write_trace_csv(trace, tmp.file("trace.csv"));
  std::ifstream in(tmp.file("trace.csv"));
  std::string header, row1, row2;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  REQUIRE(header == "iter,energy,gap,primal_res,dual_res");
  REQUIRE(row1 == "1,2.5,0.125,0.001,0.002");
  REQUIRE(row2 == "2,2.5,,0.001,0.002");
}
