#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "varipro/io.hpp"

using namespace varipro;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("varipro_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(VARIPRO_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("denoise with alpha 0 returns the noisy input bit-exactly") {
  TempDir tmp("alpha0");
  write_text(tmp.file("cfg.json"), R"({
    "seed": 5,
    "image": {"phantom": "rectangles", "size": 24},
    "regularizer": {"kind": "tv_iso", "alpha": 0.0},
    "noise": {"kind": "gaussian", "level": 0.07}
  })");
  const int code = run_cli("run denoise --config " + tmp.file("cfg.json") + " --out " + tmp.file("out"));
  REQUIRE(code == 0);
  REQUIRE(slurp(tmp.file("out/recon.pgm")) == slurp(tmp.file("out/noisy.pgm")));
  REQUIRE(slurp(tmp.file("out/recon.csv")) == slurp(tmp.file("out/noisy.csv")));
}

TEST_CASE("repeated runs with the same config and seed are byte-identical") {
  TempDir tmp("determinism");
  write_text(tmp.file("cfg.json"), R"({
    "seed": 11,
    "image": {"phantom": "rectangles", "size": 16},
    "regularizer": {"kind": "tv_iso", "alpha": 0.08},
    "noise": {"kind": "gaussian", "level": 0.05},
    "solver": {"max_iters": 2000, "tol": 1e-6}
  })");
  REQUIRE(run_cli("run denoise --config " + tmp.file("cfg.json") + " --out " + tmp.file("a")) == 0);
  REQUIRE(run_cli("run denoise --config " + tmp.file("cfg.json") + " --out " + tmp.file("b")) == 0);
  REQUIRE(slurp(tmp.file("a/trace.csv")) == slurp(tmp.file("b/trace.csv")));
  REQUIRE(slurp(tmp.file("a/recon.csv")) == slurp(tmp.file("b/recon.csv")));
}

TEST_CASE("the seed flag overrides the config seed") {
  TempDir tmp("seedflag");
  write_text(tmp.file("cfg.json"), R"({
    "seed": 11,
    "image": {"phantom": "rectangles", "size": 16},
    "regularizer": {"kind": "tv_iso", "alpha": 0.0},
    "noise": {"kind": "gaussian", "level": 0.05}
  })");
  REQUIRE(run_cli("run denoise --config " + tmp.file("cfg.json") + " --out " + tmp.file("a")) == 0);
  REQUIRE(run_cli("run denoise --config " + tmp.file("cfg.json") + " --out " + tmp.file("b") + " --seed 12") == 0);
  REQUIRE(slurp(tmp.file("a/noisy.csv")) != slurp(tmp.file("b/noisy.csv")));
}

TEST_CASE("dry run validates without producing outputs") {
  TempDir tmp("dry");
  write_text(tmp.file("cfg.json"), R"({
    "seed": 3,
    "image": {"phantom": "disk", "size": 32},
    "regularizer": {"kind": "tv_iso", "alpha": 0.05}
  })");
  REQUIRE(run_cli("run denoise --config " + tmp.file("cfg.json") + " --out " + tmp.file("out") + " --dry-run") == 0);
  REQUIRE_FALSE(fs::exists(tmp.file("out/recon.pgm")));
}

TEST_CASE("config errors exit with code 1") {
  TempDir tmp("bad");
  SECTION("unparsable json") {
    write_text(tmp.file("broken.json"), "{ not json");
    REQUIRE(run_cli("run denoise --config " + tmp.file("broken.json") + " --out " + tmp.file("out")) == 1);
  }
  SECTION("missing file") {
    REQUIRE(run_cli("run denoise --config " + tmp.file("absent.json") + " --out " + tmp.file("out")) == 1);
  }
  SECTION("bad field value") {
    write_text(tmp.file("field.json"), R"({
      "image": {"phantom": "hexagons", "size": 32}
    })");
    REQUIRE(run_cli("run denoise --config " + tmp.file("field.json") + " --out " + tmp.file("out")) == 1);
  }
  SECTION("image file that does not exist") {
    write_text(tmp.file("nofile.json"), R"({
      "image": {"file": "/nonexistent/u.pgm"}
    })");
    REQUIRE(run_cli("run denoise --config " + tmp.file("nofile.json") + " --out " + tmp.file("out") + " --dry-run") == 1);
  }
}

TEST_CASE("mri with a full mask and no noise recovers the phantom above 80 dB") {
  TempDir tmp("mrifull");
  write_text(tmp.file("cfg.json"), R"({
    "seed": 9,
    "image": {"phantom": "shepp_like", "size": 32},
    "operator": {"mask": "full"},
    "regularizer": {"kind": "tv_iso", "alpha": 1e-6},
    "noise": {"kind": "gaussian", "level": 0.0},
    "solver": {"max_iters": 3000, "tol": 1e-10}
  })");
  REQUIRE(run_cli("run mri --config " + tmp.file("cfg.json") + " --out " + tmp.file("out")) == 0);
  const std::string metrics = slurp(tmp.file("out/metrics.json"));
  double psnr_value = 0.0;
  REQUIRE(std::sscanf(metrics.c_str() + metrics.find("\"psnr\""), "\"psnr\": %lf", &psnr_value) == 1);
  REQUIRE(psnr_value >= 80.0);
}

TEST_CASE("pnp_sweep with a single level reports monotone by convention") {
  TempDir tmp("sweep1");
  write_text(tmp.file("cfg.json"), R"({
    "seed": 7,
    "image": {"phantom": "rectangles", "size": 16, "smooth_with_denoiser": 2},
    "operator": {"kernel_size": 3, "kernel_sigma": 0.7},
    "denoiser": {"kernel_size": 3, "kernel_sigma": 1.0},
    "sweep": {"delta0": 0.1, "levels": 1, "factor": 0.5, "tau_rule": {"c": 1.0}}
  })");
  const std::string cmd = std::string(VARIPRO_CLI_PATH) + " run pnp_sweep --config " +
                          tmp.file("cfg.json") + " --out " + tmp.file("out") + " > " +
                          tmp.file("stdout.txt") + " 2>&1";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  REQUIRE(slurp(tmp.file("stdout.txt")).find("monotone=true") != std::string::npos);
  // one data row after the header
  const std::string csv = slurp(tmp.file("out/sweep.csv"));
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 2);
}

TEST_CASE("segment on a constant image flags the degenerate region and omits dice") {
  TempDir tmp("segconst");
  GridImage constant(24, 24, 0.5);
  write_csv(constant, tmp.file("const.csv"));
  write_text(tmp.file("cfg.json"), R"({
    "seed": 1,
    "image": {"file": ")" + tmp.file("const.csv") + R"("},
    "segment": {"alpha": 0.1}
  })");
  REQUIRE(run_cli("run segment --config " + tmp.file("cfg.json") + " --out " + tmp.file("out")) == 0);
  const std::string metrics = slurp(tmp.file("out/metrics.json"));
  REQUIRE(metrics.find("\"degenerate_region\": true") != std::string::npos);
  REQUIRE(metrics.find("\"dice\"") == std::string::npos);
}

TEST_CASE("segment on the shipped two-phase config reports dice") {
  TempDir tmp("segdisk");
  write_text(tmp.file("cfg.json"), R"({
    "seed": 2026,
    "image": {"phantom": "disk", "size": 32, "two_phase": {"inside": 1.0, "outside": 0.0}},
    "noise": {"kind": "gaussian", "level": 0.1},
    "segment": {"alpha": 0.1},
    "ground_truth": "phantom"
  })");
  REQUIRE(run_cli("run segment --config " + tmp.file("cfg.json") + " --out " + tmp.file("out")) == 0);
  const std::string metrics = slurp(tmp.file("out/metrics.json"));
  double dice_value = 0.0;
  REQUIRE(std::sscanf(metrics.c_str() + metrics.find("\"dice\""), "\"dice\": %lf", &dice_value) == 1);
  REQUIRE(dice_value >= 0.98);
  REQUIRE(fs::exists(tmp.file("out/mask.pgm")));
}
