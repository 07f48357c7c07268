// varipro: variational and plug-and-play inverse-problem reconstruction CLI.
//
//   varipro run <denoise|deblur|mri|ct|pnp_sweep|segment>
//       --config <path.json> --out <dir> [--seed N] [--dry-run]
//
// One JSON config per run (sections: image, operator, fidelity, regularizer,
// noise, solver, output; see README). All randomness derives from a single
// top-level seed. Exit codes: 0 ok, 1 error, 2 iteration cap reached.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "varipro/varipro.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace varipro;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
}

template <typename T>
T field(const json& j, const std::string& key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config field '" + key + "': " + e.what());
  }
}

template <typename T>
T required_field(const json& j, const std::string& section, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("config section '" + section + "' misses field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config field '" + section + "." + key + "': " + e.what());
  }
}

GridImage gaussian_kernel(int size, double sigma) {
  if (size < 1 || size % 2 == 0) throw ConfigError("kernel_size must be odd and positive");
  if (sigma <= 0.0) throw ConfigError("kernel_sigma must be positive");
  GridImage k(size, size, 0.0);
  const int c = size / 2;
  double sum = 0.0;
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      const double v = std::exp(-((i - c) * (i - c) + (j - c) * (j - c)) / (2.0 * sigma * sigma));
      k.at(i, j) = v;
      sum += v;
    }
  for (auto& v : k.data) v /= sum;
  return k;
}

GridImage load_image_section(const json& cfg) {
  const json img = cfg.value("image", json::object());
  if (img.contains("file")) {
    const std::string path = img.at("file").get<std::string>();
    if (!fs::exists(path)) throw ConfigError("image.file does not exist: " + path);
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") return read_csv(path);
    return read_pgm(path);
  }
  const std::string kind = field<std::string>(img, "phantom", "shepp_like");
  const int size = field<int>(img, "size", 64);
  PhantomKind pk;
  if (kind == "disk")
    pk = PhantomKind::disk;
  else if (kind == "rectangles")
    pk = PhantomKind::rectangles;
  else if (kind == "shepp_like")
    pk = PhantomKind::shepp_like;
  else
    throw ConfigError("image.phantom must be disk, rectangles or shepp_like");
  GridImage out = make_phantom(pk, size);
  if (img.contains("two_phase")) {
    const json tp = img.at("two_phase");
    const double inside = field<double>(tp, "inside", 1.0);
    const double outside = field<double>(tp, "outside", 0.0);
    for (auto& v : out.data) v = v > 0.5 ? inside : outside;
  }
  return out;
}

FidelityKind parse_fidelity_kind(const json& cfg) {
  const std::string kind = field<std::string>(cfg.value("fidelity", json::object()), "kind",
                                              std::string("l2"));
  if (kind == "l2") return FidelityKind::l2;
  if (kind == "kl") return FidelityKind::kl;
  if (kind == "l1") return FidelityKind::l1;
  throw ConfigError("fidelity.kind must be l2, kl or l1");
}

NoiseSpec parse_noise(const json& cfg, std::uint64_t seed) {
  const json n = cfg.value("noise", json::object());
  NoiseSpec spec;
  const std::string kind = field<std::string>(n, "kind", std::string("gaussian"));
  if (kind == "gaussian")
    spec.kind = NoiseKind::gaussian;
  else if (kind == "poisson")
    spec.kind = NoiseKind::poisson;
  else if (kind == "impulse")
    spec.kind = NoiseKind::impulse;
  else
    throw ConfigError("noise.kind must be gaussian, poisson or impulse");
  spec.level = field<double>(n, "level", 0.0);
  if (spec.level < 0.0) throw ConfigError("noise.level must be nonnegative");
  spec.seed = derive_seed(seed, 1);
  return spec;
}

SolverConfig parse_solver(const json& cfg) {
  const json s = cfg.value("solver", json::object());
  SolverConfig out;
  out.max_iters = field<int>(s, "max_iters", 2000);
  out.tol = field<double>(s, "tol", 1e-8);
  out.tau = field<double>(s, "tau", 0.0);
  out.sigma = field<double>(s, "sigma", 0.0);
  out.lambda = field<double>(s, "lambda", 1.0);
  const std::string crit = field<std::string>(s, "criterion", std::string("fixed_point"));
  if (crit == "gap")
    out.criterion = StopCriterion::gap;
  else if (crit == "fixed_point")
    out.criterion = StopCriterion::fixed_point_residual;
  else if (crit == "energy_delta")
    out.criterion = StopCriterion::energy_delta;
  else
    throw ConfigError("solver.criterion must be gap, fixed_point or energy_delta");
  if (out.max_iters < 1) throw ConfigError("solver.max_iters must be >= 1");
  return out;
}

struct RegSection {
  std::string kind = "tv_iso";
  double alpha = 0.1;
};

RegSection parse_regularizer(const json& cfg) {
  const json r = cfg.value("regularizer", json::object());
  RegSection out;
  out.kind = field<std::string>(r, "kind", std::string("tv_iso"));
  out.alpha = field<double>(r, "alpha", 0.1);
  if (out.kind != "tv_iso" && out.kind != "tv_aniso")
    throw ConfigError("regularizer.kind must be tv_iso or tv_aniso for reconstruction commands");
  if (out.alpha < 0.0) throw ConfigError("regularizer.alpha must be nonnegative");
  return out;
}

int env_thread_cap() {
  // parallelism cap; the current solvers are single-threaded, so the value
  // is recorded but never exceeded
  if (const char* v = std::getenv("VARIPRO_THREADS")) {
    const int n = std::atoi(v);
    if (n >= 1) return n;
  }
  return 1;
}

void write_metrics_json(const std::string& path, const json& metrics) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << metrics.dump(2) << "\n";
}

struct RunPaths {
  fs::path out_dir;
  std::string file(const std::string& name) const { return (out_dir / name).string(); }
};

/// Denoising  min_u alpha TV(u) + D(u, y)  by PDHG on the classic split
/// A = grad, H = fidelity: H is proximable for all three noise models and
/// strongly convex for l2, which keeps the iteration fast.
std::pair<Vec, SolverTrace> solve_rof_denoise(const Vec& y, const Fidelity& fid,
                                              const RegSection& reg, int w, int h,
                                              SolverConfig cfg) {
  const LinearMap grad_map = make_gradient_map(w, h);
  const double alpha = reg.alpha;
  const bool iso = reg.kind == "tv_iso";

  DualTerm J;
  J.value = [alpha, iso, w, h](const Vec& z) {
    const VectorField f = to_field(z, w, h);
    double tv = 0.0;
    for (size_t k = 0; k < f.px.size(); ++k)
      tv += iso ? std::hypot(f.px[k], f.py[k]) : (std::abs(f.px[k]) + std::abs(f.py[k]));
    return alpha * tv;
  };
  J.conj_prox = [alpha, iso, w, h](const Vec& q, double) {
    if (iso) return flatten(project_ball(to_field(q, w, h), alpha));
    Vec out = q;
    for (auto& x : out) x = std::clamp(x, -alpha, alpha);
    return out;
  };
  J.conj_value = [alpha, iso, w, h](const Vec& q) {
    const VectorField f = to_field(q, w, h);
    for (size_t k = 0; k < f.px.size(); ++k) {
      const double m = iso ? std::hypot(f.px[k], f.py[k])
                           : std::max(std::abs(f.px[k]), std::abs(f.py[k]));
      if (m > alpha * (1.0 + 1e-10) + 1e-14) return std::numeric_limits<double>::infinity();
    }
    return 0.0;
  };

  PrimalTerm H;
  H.value = [&fid](const Vec& u) { return fid_value(fid, u); };
  H.prox = [&fid](const Vec& z, double t) { return fid_prox(fid, z, t); };
  if (fid.kind == FidelityKind::l2)
    H.conj_value = [&fid](const Vec& q) { return *fid_conj_value(fid, q); };

  // default to the fixed-point residual; the gap is still recorded in the
  // trace for l2, but its tail decay is slow (degenerate dual certificates)
  if (cfg.criterion == StopCriterion::gap && fid.kind == FidelityKind::l2) {
    cfg.tol *= std::max(1.0, dot(y, y));  // the gap scales with the squared data norm
  } else if (cfg.criterion == StopCriterion::energy_delta) {
    cfg.tol *= std::max(1.0, dot(y, y));
  } else {
    cfg.criterion = StopCriterion::fixed_point_residual;
    cfg.tol *= std::max(1.0, norm2(y));
  }
  PdhgResult res = pdhg(J, H, grad_map, y, Vec(static_cast<size_t>(2) * w * h, 0.0), cfg);
  return {std::move(res.u), std::move(res.trace)};
}

/// Composite reconstruction  min_u D(Au, y) + alpha TV(u)  by PDHG on the
/// stacked operator K = [A; grad]. The gap needs the conjugate of H = 0,
/// so stopping uses the fixed-point residual, scaled to the data norm.
std::pair<Vec, SolverTrace> solve_composite_tv(const LinearMap& A, const Vec& y,
                                               const Fidelity& fid, const RegSection& reg,
                                               int w, int h, SolverConfig cfg,
                                               bool record_energy = true) {
  const LinearMap grad_map = make_gradient_map(w, h);
  const LinearMap K = make_stacked(A, grad_map);
  const int na = A.range.count();
  const double alpha = reg.alpha;
  const bool iso = reg.kind == "tv_iso";

  DualTerm J;
  // the energy column costs one extra K apply per iteration; heavy
  // operators (radon) skip it
  if (record_energy)
    J.value = [na, &fid, alpha, iso, w, h](const Vec& z) {
      const Vec zf(z.begin(), z.begin() + na);
      const VectorField f = to_field(Vec(z.begin() + na, z.end()), w, h);
      double tv = 0.0;
      for (size_t k = 0; k < f.px.size(); ++k)
        tv += iso ? std::hypot(f.px[k], f.py[k]) : (std::abs(f.px[k]) + std::abs(f.py[k]));
      return fid_value(fid, zf) + alpha * tv;
    };
  J.conj_prox = [na, &fid, alpha, iso, w, h](const Vec& q, double sigma) {
    const Vec qf(q.begin(), q.begin() + na);
    Vec head = fid_conj_prox(fid, qf, sigma);
    Vec tail(q.begin() + na, q.end());
    if (iso) {
      tail = flatten(project_ball(to_field(tail, w, h), alpha));
    } else {
      for (auto& x : tail) x = std::clamp(x, -alpha, alpha);
    }
    Vec out(q.size());
    std::copy(head.begin(), head.end(), out.begin());
    std::copy(tail.begin(), tail.end(), out.begin() + na);
    return out;
  };

  PrimalTerm H;
  H.value = [](const Vec&) { return 0.0; };
  H.prox = [](const Vec& z, double) { return z; };

  cfg.criterion = StopCriterion::fixed_point_residual;
  cfg.tol *= std::max(1.0, norm2(y));
  Vec u0 = A.adjoint(y);  // zero-fill style start
  Vec p0(static_cast<size_t>(K.range.count()), 0.0);
  PdhgResult res = pdhg(J, H, K, std::move(u0), std::move(p0), cfg);
  return {std::move(res.u), std::move(res.trace)};
}

int finish_reconstruction(const RunPaths& paths, const GridImage& recon, const GridImage& truth,
                          const SolverTrace& trace, double wall_ms, json extra = json::object()) {
  write_pgm(recon, paths.file("recon.pgm"));
  write_csv(recon, paths.file("recon.csv"));
  write_trace_csv(trace, paths.file("trace.csv"));
  json metrics = std::move(extra);
  metrics["psnr"] = psnr(recon, truth);
  metrics["rel_err"] = relative_error(recon, truth);
  metrics["iters"] = trace.iterations();
  metrics["wall_ms"] = wall_ms;
  metrics["threads"] = env_thread_cap();
  metrics["converged"] = trace.status == SolverStatus::converged;
  write_metrics_json(paths.file("metrics.json"), metrics);
  return trace.status == SolverStatus::converged ? 0 : 2;
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_denoise(const json& cfg, const RunPaths& paths, std::uint64_t seed, bool dry_run) {
  const GridImage truth = load_image_section(cfg);
  const RegSection reg = parse_regularizer(cfg);
  const FidelityKind fk = parse_fidelity_kind(cfg);
  const NoiseSpec noise = parse_noise(cfg, seed);
  SolverConfig scfg = parse_solver(cfg);
  if (dry_run) return 0;

  const auto t0 = std::chrono::steady_clock::now();
  const GridImage y = add_noise(truth, noise);
  write_pgm(y, paths.file("noisy.pgm"));
  write_csv(y, paths.file("noisy.csv"));

  if (reg.alpha == 0.0) {
    // no regularization: the model returns the data unchanged
    SolverTrace trace;
    trace.status = SolverStatus::converged;
    TraceRecord rec;
    rec.iter = 1;
    rec.energy = 0.0;
    rec.primal_res = 0.0;
    rec.iterate_norm = norm2(y);
    trace.records.push_back(rec);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return finish_reconstruction(paths, y, truth, trace, ms);
  }

  const Fidelity fid = make_fidelity(fk, y.data);
  auto [u, trace] = solve_rof_denoise(y.data, fid, reg, y.width, y.height, scfg);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return finish_reconstruction(paths, to_image(u, y.width, y.height), truth, trace, ms);
}

int cmd_deblur(const json& cfg, const RunPaths& paths, std::uint64_t seed, bool dry_run) {
  const GridImage truth = load_image_section(cfg);
  const json op = cfg.value("operator", json::object());
  const GridImage kernel = gaussian_kernel(field<int>(op, "kernel_size", 5),
                                           field<double>(op, "kernel_sigma", 1.0));
  const RegSection reg = parse_regularizer(cfg);
  const FidelityKind fk = parse_fidelity_kind(cfg);
  const NoiseSpec noise = parse_noise(cfg, seed);
  SolverConfig scfg = parse_solver(cfg);
  if (dry_run) return 0;

  const auto t0 = std::chrono::steady_clock::now();
  const LinearMap A = make_blur(kernel, truth.width, truth.height);
  const GridImage blurred = to_image(A.apply(truth.data), truth.width, truth.height);
  const GridImage y = add_noise(blurred, noise);
  write_pgm(y, paths.file("noisy.pgm"));

  const Fidelity fid = make_fidelity(fk, y.data);
  auto [u, trace] = solve_composite_tv(A, y.data, fid, reg, truth.width, truth.height, scfg);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return finish_reconstruction(paths, to_image(u, truth.width, truth.height), truth, trace, ms);
}

GridImage mri_mask(const json& op, int w, int h, std::uint64_t seed) {
  const std::string kind = field<std::string>(op, "mask", std::string("full"));
  GridImage mask(w, h, 0.0);
  if (kind == "full") {
    std::fill(mask.data.begin(), mask.data.end(), 1.0);
  } else if (kind == "half") {
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w / 2; ++j) mask.at(i, j) = 1.0;
  } else if (kind == "rows") {
    const int stride = std::max(1, field<int>(op, "stride", 2));
    for (int i = 0; i < h; i += stride)
      for (int j = 0; j < w; ++j) mask.at(i, j) = 1.0;
    for (int j = 0; j < w; ++j) mask.at(0, j) = 1.0;  // keep the DC row
  } else if (kind == "random") {
    const double keep = field<double>(op, "keep_fraction", 0.4);
    if (keep <= 0.0 || keep > 1.0) throw ConfigError("operator.keep_fraction must be in (0,1]");
    SplitMix64 rng(derive_seed(seed, 2));
    for (auto& v : mask.data) v = rng.next_unit() < keep ? 1.0 : 0.0;
    mask.at(0, 0) = 1.0;  // always sample DC
  } else {
    throw ConfigError("operator.mask must be full, half, rows or random");
  }
  return mask;
}

int cmd_mri(const json& cfg, const RunPaths& paths, std::uint64_t seed, bool dry_run) {
  const GridImage truth = load_image_section(cfg);
  const json op = cfg.value("operator", json::object());
  const RegSection reg = parse_regularizer(cfg);
  if (parse_fidelity_kind(cfg) != FidelityKind::l2)
    throw ConfigError("mri supports the l2 fidelity only (complex-valued data)");
  const NoiseSpec noise = parse_noise(cfg, seed);
  if (noise.level > 0.0 && noise.kind != NoiseKind::gaussian)
    throw ConfigError("mri supports gaussian measurement noise only");
  SolverConfig scfg = parse_solver(cfg);
  const GridImage mask = mri_mask(op, truth.width, truth.height, seed);
  if (dry_run) return 0;

  const auto t0 = std::chrono::steady_clock::now();
  const LinearMap A = make_subsampled_fourier(mask);
  Vec y = A.apply(truth.data);
  if (noise.level > 0.0) {
    SplitMix64 rng(noise.seed);
    for (size_t k = 0; k < y.size(); ++k)
      if (mask.data[k % mask.data.size()] > 0.5) y[k] += noise.level * rng.next_gaussian();
  }
  // zero-fill baseline A*y
  const GridImage baseline = to_image(A.adjoint(y), truth.width, truth.height);
  write_pgm(baseline, paths.file("baseline.pgm"));

  const Fidelity fid = make_fidelity(FidelityKind::l2, y);
  auto [u, trace] = solve_composite_tv(A, y, fid, reg, truth.width, truth.height, scfg);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  json extra;
  extra["psnr_baseline"] = psnr(baseline, truth);
  return finish_reconstruction(paths, to_image(u, truth.width, truth.height), truth, trace, ms,
                               std::move(extra));
}

int cmd_ct(const json& cfg, const RunPaths& paths, std::uint64_t seed, bool dry_run) {
  const GridImage truth = load_image_section(cfg);
  const json op = cfg.value("operator", json::object());
  const int angles = field<int>(op, "angles", 30);
  const int offsets = field<int>(op, "offsets", 0) > 0
                          ? field<int>(op, "offsets", 0)
                          : (static_cast<int>(std::ceil(truth.width * std::sqrt(2.0))) | 1);
  const RegSection reg = parse_regularizer(cfg);
  const FidelityKind fk = parse_fidelity_kind(cfg);
  const NoiseSpec noise = parse_noise(cfg, seed);
  SolverConfig scfg = parse_solver(cfg);
  if (angles < 1 || offsets < 3) throw ConfigError("operator.angles/offsets out of range");
  if (dry_run) return 0;

  const auto t0 = std::chrono::steady_clock::now();
  const LinearMap A = make_radon(angles, offsets, truth.width, truth.height);
  GridImage sino_img = to_image(A.apply(truth.data), offsets, angles);
  sino_img = add_noise(sino_img, noise);
  const Vec y = sino_img.data;

  Sinogram sino = make_sinogram_geometry(angles, offsets, 0.5 * std::sqrt(2.0));
  sino.data = y;
  write_sinogram_csv(sino, paths.file("sinogram.csv"));

  const GridImage baseline = to_image(A.adjoint(y), truth.width, truth.height);
  write_pgm(baseline, paths.file("baseline.pgm"));

  const Fidelity fid = make_fidelity(fk, y);
  auto [u, trace] = solve_composite_tv(A, y, fid, reg, truth.width, truth.height, scfg,
                                       /*record_energy=*/false);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  json extra;
  extra["psnr_baseline"] = psnr(baseline, truth);
  return finish_reconstruction(paths, to_image(u, truth.width, truth.height), truth, trace, ms,
                               std::move(extra));
}

int cmd_pnp_sweep(const json& cfg, const RunPaths& paths, std::uint64_t seed, bool dry_run) {
  GridImage truth = load_image_section(cfg);
  const json op = cfg.value("operator", json::object());
  const GridImage kernel = gaussian_kernel(field<int>(op, "kernel_size", 5),
                                           field<double>(op, "kernel_sigma", 1.0));
  const json dn = cfg.value("denoiser", json::object());
  const GridImage dkernel = gaussian_kernel(field<int>(dn, "kernel_size", 5),
                                            field<double>(dn, "kernel_sigma", 1.5));
  const double floor = field<double>(dn, "floor", 1e-3);
  const json sw = cfg.value("sweep", json::object());
  const double delta0 = field<double>(sw, "delta0", 0.4);
  const int levels = field<int>(sw, "levels", 6);
  const double factor = field<double>(sw, "factor", 0.5);
  const int smooth_truth = field<int>(cfg.value("image", json::object()), "smooth_with_denoiser", 0);
  if (delta0 <= 0.0 || levels < 1 || factor <= 0.0 || factor >= 1.0)
    throw ConfigError("sweep.delta0/levels/factor out of range");
  if (dry_run) return 0;

  const auto t0 = std::chrono::steady_clock::now();
  const LinearMap A = make_blur(kernel, truth.width, truth.height);
  const LinearDenoiser den = LinearDenoiser::convolution(dkernel, truth.width, truth.height, floor);
  for (int s = 0; s < smooth_truth; ++s) truth.data = den.apply(truth.data);

  std::vector<double> deltas;
  for (int k = 0; k < levels; ++k) deltas.push_back(delta0 * std::pow(factor, k));

  std::function<double(double)> tau_rule;
  double c = 0.0;
  const json rule = sw.value("tau_rule", json::object());
  if (rule.contains("constant") && rule.at("constant").is_number()) {
    const double t = rule.at("constant").get<double>();
    tau_rule = [t](double) { return t; };
  } else if (rule.contains("c") && rule.at("c").is_number()) {
    c = rule.at("c").get<double>();
    tau_rule = [c](double d) { return c * d; };
  } else {
    c = calibrate_tau_coefficient(A, truth.data, den, deltas.back(), seed);
    tau_rule = [c](double d) { return c * d; };
  }
  const SweepTable table = convergence_sweep(A, truth.data, den, tau_rule, deltas, seed);
  write_sweep_csv(table, paths.file("sweep.csv"));
  // the summary flag asks for genuine convergent behavior: errors
  // non-increasing within 5% slack AND substantially smaller at the end
  // (a schedule stuck at its bias floor plateaus and reports false);
  // a single level is monotone by convention
  const double first = table.oracle_available ? *table.rows.front().err_vs_udagger
                                              : table.rows.front().err_vs_utrue;
  const double last = table.oracle_available ? *table.rows.back().err_vs_udagger
                                             : table.rows.back().err_vs_utrue;
  const bool monotone = table.rows.size() <= 1 || (table.monotone(0.05) && last < 0.5 * first);
  std::cout << "monotone=" << (monotone ? "true" : "false") << "\n";

  json metrics;
  metrics["monotone"] = monotone;
  metrics["tau_rule_c"] = c;
  metrics["levels"] = levels;
  metrics["oracle_available"] = table.oracle_available;
  metrics["first_err"] = table.oracle_available ? *table.rows.front().err_vs_udagger
                                                : table.rows.front().err_vs_utrue;
  metrics["final_err"] = table.oracle_available ? *table.rows.back().err_vs_udagger
                                                : table.rows.back().err_vs_utrue;
  metrics["wall_ms"] =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  metrics["threads"] = env_thread_cap();
  write_metrics_json(paths.file("metrics.json"), metrics);
  return 0;
}

int cmd_segment(const json& cfg, const RunPaths& paths, std::uint64_t seed, bool dry_run) {
  const GridImage truth = load_image_section(cfg);
  const json seg = cfg.value("segment", json::object());
  SegOptions opts;
  opts.alpha = field<double>(seg, "alpha", 0.1);
  opts.threshold = field<double>(seg, "threshold", 0.5);
  opts.outer_iters = field<int>(seg, "outer_iters", 5);
  const NoiseSpec noise = parse_noise(cfg, seed);
  const std::string gt = field<std::string>(cfg, "ground_truth", std::string(""));
  if (!gt.empty() && gt != "phantom" && !fs::exists(gt))
    throw ConfigError("ground_truth file does not exist: " + gt);
  if (dry_run) return 0;

  const auto t0 = std::chrono::steady_clock::now();
  const GridImage y = add_noise(truth, noise);
  write_pgm(y, paths.file("noisy.pgm"));
  const SegResult res = chan_vese(y, opts);

  GridImage mask_out = res.mask;  // {0,1} -> {0,255} via the explicit unit range
  write_pgm(mask_out, paths.file("mask.pgm"), false, {{0.0, 1.0}});
  write_csv(res.v, paths.file("relaxed.csv"));

  json metrics;
  metrics["c1"] = res.c1;
  metrics["c2"] = res.c2;
  metrics["energy"] = res.energy;
  metrics["degenerate_region"] = res.degenerate_region;
  metrics["wall_ms"] =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  metrics["threads"] = env_thread_cap();
  if (gt == "phantom") {
    // the phantom thresholded at mid-range is the reference region
    GridImage ref = truth;
    const auto [mn, mx] = std::minmax_element(ref.data.begin(), ref.data.end());
    const double mid = 0.5 * (*mn + *mx);
    for (auto& v : ref.data) v = v > mid ? 1.0 : 0.0;
    metrics["dice"] = dice(res.mask, ref);
  } else if (!gt.empty()) {
    metrics["dice"] = dice(res.mask, read_pgm(gt));
  }
  write_metrics_json(paths.file("metrics.json"), metrics);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"variational and plug-and-play inverse-problem reconstruction"};
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "run an experiment from a JSON config");
  run->require_subcommand(1);

  std::string config_path, out_dir;
  std::int64_t seed_flag = -1;
  bool dry_run = false;

  const std::vector<std::string> names = {"denoise", "deblur", "mri", "ct", "pnp_sweep", "segment"};
  for (const auto& name : names) {
    CLI::App* sub = run->add_subcommand(name);
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--seed", seed_flag, "override the config seed");
    sub->add_flag("--dry-run", dry_run, "validate the config without computing");
  }

  CLI11_PARSE(app, argc, argv);

  std::string chosen;
  for (const auto& name : names)
    if (run->get_subcommand(name)->parsed()) chosen = name;

  try {
    const json cfg = load_config(config_path);
    const std::uint64_t seed =
        seed_flag >= 0 ? static_cast<std::uint64_t>(seed_flag) : field<std::uint64_t>(cfg, "seed", 0);
    RunPaths paths{fs::path(out_dir)};
    if (!dry_run) fs::create_directories(paths.out_dir);

    if (chosen == "denoise") return cmd_denoise(cfg, paths, seed, dry_run);
    if (chosen == "deblur") return cmd_deblur(cfg, paths, seed, dry_run);
    if (chosen == "mri") return cmd_mri(cfg, paths, seed, dry_run);
    if (chosen == "ct") return cmd_ct(cfg, paths, seed, dry_run);
    if (chosen == "pnp_sweep") return cmd_pnp_sweep(cfg, paths, seed, dry_run);
    if (chosen == "segment") return cmd_segment(cfg, paths, seed, dry_run);
    std::cerr << "error: unknown subcommand\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
