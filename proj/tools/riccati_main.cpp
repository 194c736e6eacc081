#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "riccati/analysis_io.hpp"
#include "riccati/cascade.hpp"
#include "riccati/grid.hpp"
#include "riccati/invariants.hpp"
#include "riccati/monte_carlo.hpp"
#include "riccati/parallel.hpp"

namespace fs = std::filesystem;
using namespace riccati;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

struct CliConfig {
  std::optional<double> alpha;
  double t_max = 8.0;
  double step = 0.01;
  int depth = 10;
  int picard_k = 5;
  std::size_t samples = 10000;
  std::optional<std::uint64_t> seed;
  double eps_tail = 1e-6;
  std::size_t max_nodes = std::size_t{1} << 16;
  std::string out = "riccati-out";
  unsigned workers = 1;
};

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::string number(double x) { return nlohmann::json(x).dump(); }

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// One subcommand run: resolves the output directory from the configuration
// digest and writes the manifest once all files exist.
class Run {
 public:
  Run(const CliConfig& cfg, std::string subcommand, std::map<std::string, std::string> extra,
      bool needs_alpha = true)
      : cfg_(cfg) {
    if (needs_alpha && !cfg.alpha) throw UsageError(subcommand + " requires --alpha");
    manifest_.tool_version = tool_version();
    manifest_.command = std::move(subcommand);
    manifest_.alpha = needs_alpha ? cfg.alpha : std::nullopt;
    manifest_.t_max = cfg.t_max;
    manifest_.step = cfg.step;
    manifest_.eps_tail = cfg.eps_tail;
    manifest_.max_nodes = cfg.max_nodes;
    manifest_.depth = cfg.depth;
    manifest_.picard_k = cfg.picard_k;
    manifest_.samples = cfg.samples;
    manifest_.seed = *cfg.seed;
    manifest_.workers = resolve_workers(cfg.workers);
    manifest_.extra = std::move(extra);
    dir_ = fs::path(cfg.out) / manifest_.command / manifest_.config_digest();
    fs::create_directories(dir_);
  }

  double alpha() const { return *cfg_.alpha; }
  UniformGrid grid() const { return UniformGrid(cfg_.t_max, cfg_.step); }
  TailOptions tail() const { return {cfg_.eps_tail, cfg_.max_nodes, true}; }
  McConfig mc() const {
    return {cfg_.samples, cfg_.depth, *cfg_.seed, manifest_.workers};
  }
  const fs::path& dir() const { return dir_; }
  RunManifest& manifest() { return manifest_; }

  fs::path file(const std::string& name) {
    files_.push_back(name);
    return dir_ / name;
  }

  void finish() {
    manifest_.timestamp = utc_timestamp();
    write_manifest(manifest_, dir_ / "manifest.json", files_);
    std::cout << "output: " << dir_.string() << '\n';
  }

 private:
  const CliConfig& cfg_;
  RunManifest manifest_;
  fs::path dir_;
  std::vector<std::string> files_;
};

std::ofstream open_csv(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  return out;
}

void report_tail(const IterationReport& report) {
  if (report.forced_tail_error > 0.0) {
    std::cerr << "warning: node cap forced a tail cut with surrogate "
              << report.forced_tail_error << " above eps-tail\n";
  }
}

int cmd_hist(const CliConfig& cfg, double t) {
  Run run(cfg, "hist", {{"t", number(t)}});
  const Histogram h = estimate_leaf_histogram(run.alpha(), t, cfg.depth, run.mc());
  write_histogram_csv(h, run.file("histogram.csv"));
  std::cout << "total " << h.total << ", truncated " << h.truncated_count << ", max "
            << h.max_observed << '\n';
  run.finish();
  return kExitOk;
}

int cmd_vcurve(const CliConfig& cfg, double point_step) {
  Run run(cfg, "vcurve", {{"point_step", number(point_step)}});
  const UniformGrid grid = run.grid();
  IterationReport report;
  const GridFunction v0 = picard_v0(run.alpha(), grid, cfg.picard_k, run.tail(), &report);
  report_tail(report);
  const GridFunction vn = iterate_vn(run.alpha(), grid, cfg.depth, v0, run.tail());
  const auto points = time_points(cfg.t_max, point_step);
  const EstimateSeries mc = estimate_v_curve(run.alpha(), points, cfg.depth, v0, run.mc());
  write_series_csv(mc, run.file("vcurve.csv"));
  write_series_csv(vn.restrict_to(grid), run.file("vn.csv"));
  const ComparisonReport cmp = compare_series(mc, vn);
  std::cout << "within 4 sigma: " << cmp.fraction_within << " (median |z| "
            << cmp.median_abs_z << ", max |z| " << cmp.max_abs_z << ")\n";
  run.finish();
  return kExitOk;
}

int cmd_v0(const CliConfig& cfg) {
  Run run(cfg, "v0", {});
  IterationReport report;
  const GridFunction u = picard_v0(run.alpha(), run.grid(), cfg.picard_k, run.tail(), &report);
  report_tail(report);
  write_grid_function(u, run.file("u_k.csv"));
  run.file("u_k.json");
  std::cout << "peak working nodes " << report.peak_nodes << '\n';
  run.finish();
  return kExitOk;
}

int cmd_qn(const CliConfig& cfg, bool converged_q0) {
  Run run(cfg, "qn", {{"q0", converged_q0 ? "converged" : "picard"}});
  const UniformGrid grid = run.grid();
  const GridFunction v0 = converged_q0
                              ? picard_v0_converged(run.alpha(), grid, 1e-10, 400, run.tail())
                              : picard_v0(run.alpha(), grid, cfg.picard_k, run.tail());
  const GridFunction q0 = longest_path_tail(run.alpha(), v0);
  IterationReport report;
  const GridFunction q = iterate_qn(run.alpha(), grid, cfg.depth, q0, run.tail(), &report);
  report_tail(report);
  write_grid_function(q.restrict_to(grid), run.file("q_n.csv"));
  run.file("q_n.json");
  run.finish();
  return kExitOk;
}

int cmd_paths(const CliConfig& cfg, double point_step) {
  Run run(cfg, "paths", {{"point_step", number(point_step)}});
  const auto points = time_points(cfg.t_max, point_step);
  write_series_csv(estimate_S_tail(run.alpha(), points, cfg.depth, run.mc()),
                   run.file("s_tail.csv"));
  write_series_csv(estimate_L_tail(run.alpha(), points, cfg.depth, run.mc()),
                   run.file("l_tail.csv"));
  run.finish();
  return kExitOk;
}

int cmd_residual(const CliConfig& cfg) {
  Run run(cfg, "residual", {});
  const UniformGrid grid = run.grid();
  const GridFunction v0 = picard_v0(run.alpha(), grid, cfg.picard_k, run.tail());
  const GridFunction v = iterate_vn(run.alpha(), grid, cfg.depth, v0, run.tail());
  const ResidualReport r = riccati_residual(v, run.alpha());
  auto out = open_csv(run.file("residual.csv"));
  out << "t,residual,interior\n";
  for (std::size_t i = 0; i < r.residual.size(); ++i) {
    out << format_double(grid.node(i)) << ',' << format_double(r.residual[i]) << ','
        << (i < r.interior_nodes ? 1 : 0) << '\n';
  }
  out.close();
  std::cout << "max |residual| on [0, " << r.interior_end << "]: " << r.max_abs_residual << '\n';
  run.finish();
  return kExitOk;
}

int cmd_check(const CliConfig& cfg, std::size_t check_samples) {
  if (cfg.alpha && *cfg.alpha <= 0.0) throw UsageError("check requires --alpha > 0");
  Run run(cfg, "check", {{"check_samples", std::to_string(check_samples)}});
  SuiteConfig suite{run.alpha(), *cfg.seed, check_samples, resolve_workers(cfg.workers),
                    cfg.t_max,   cfg.step,  cfg.picard_k, run.tail()};
  const auto results = run_invariant_suite(suite);
  auto out = open_csv(run.file("check.csv"));
  out << "module,invariant,passed\n";
  bool all = true;
  for (const auto& r : results) {
    out << r.module << ',' << r.name << ',' << (r.passed ? 1 : 0) << '\n';
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.module << ": " << r.name;
    if (!r.passed) std::cout << " (" << r.detail << ')';
    std::cout << '\n';
    all = all && r.passed;
  }
  out.close();
  run.finish();
  return all ? kExitOk : kExitCheckFailed;
}

int cmd_figures(const CliConfig& cfg, const std::string& preset_name) {
  FigurePreset preset;
  try {
    preset = figure_preset(preset_name);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  CliConfig with_alpha = cfg;
  with_alpha.alpha = preset.alpha;
  Run run(with_alpha, "figures", {{"preset", preset.name}});
  BundleConfig bundle;
  bundle.seed = *cfg.seed;
  bundle.workers = resolve_workers(cfg.workers);
  bundle.samples = cfg.samples;
  bundle.depth = cfg.depth;
  bundle.picard_k = cfg.picard_k;
  bundle.t_max = cfg.t_max;
  bundle.step = cfg.step;
  bundle.tail = run.tail();
  const BundleResult result = figure_bundle(preset, bundle, run.dir());
  std::cout << "output: " << result.directory.string() << '\n';
  return kExitOk;
}

struct SweepRow {
  double alpha;
  double q_low;
  double q_high;
};

int cmd_sweep(const CliConfig& cfg, const std::vector<double>& alphas, double t, int n_low,
              int n_high) {
  if (alphas.empty()) throw UsageError("sweep requires --alpha-list");
  if (!(n_low >= 1 && n_high > n_low)) throw UsageError("sweep needs 1 <= --n-low < --n-high");
  std::string list;
  for (const double a : alphas) list += (list.empty() ? "" : ",") + number(a);
  Run run(cfg, "sweep",
          {{"alpha_list", list}, {"t", number(t)}, {"n_low", std::to_string(n_low)},
           {"n_high", std::to_string(n_high)}},
          false);
  const UniformGrid grid = run.grid();
  if (t > grid.end()) throw UsageError("--t must lie within [0, t-max]");

  auto out = open_csv(run.file("sweep.csv"));
  out << "alpha,t,q_low,q_high,gap,limit,regime,slow_convergence\n";
  for (const double alpha : alphas) {
    CascadeParams{alpha, 0}.validate();
    if (alpha == 0.0) throw UsageError("sweep requires alpha > 0");
    const GridFunction v0 = alpha > 1.0
                                ? picard_v0_converged(alpha, grid, 1e-10, 1000, run.tail())
                                : GridFunction::constant(grid, 1.0);
    const GridFunction q0 = longest_path_tail(alpha, v0);
    const double low = iterate_qn(alpha, grid, n_low, q0, run.tail()).evaluate(t);
    const double high = iterate_qn(alpha, grid, n_high, q0, run.tail()).evaluate(t);
    const double gap = std::abs(high - low);
    const bool positive = high > 5.0 * gap;
    const bool slow = std::abs(alpha - 1.0) < 1e-9 || std::abs(alpha - 2.0) < 1e-9;
    out << format_double(alpha) << ',' << format_double(t) << ',' << format_double(low) << ','
        << format_double(high) << ',' << format_double(gap) << ',' << format_double(high)
        << ',' << (positive ? "positive" : "near_zero") << ',' << (slow ? 1 : 0) << '\n';
    std::cout << "alpha " << alpha << ": q_" << n_high << "(" << t << ") = " << high << " ("
              << (positive ? "positive" : "near zero") << (slow ? ", slow convergence" : "")
              << ")\n";
  }
  out.close();
  run.finish();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and numerics for the alpha-Riccati branching cascade", "riccati"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version());

  CliConfig cfg;
  std::uint64_t seed_value = 0;
  const auto env = [](const char* name) { return std::string("RICCATI_") + name; };
  double alpha_value = 0.0;
  app.add_option("--alpha", alpha_value, "Branching scale alpha >= 0")->envname(env("ALPHA"));
  app.add_option("--t-max", cfg.t_max, "End of the time grid")->envname(env("T_MAX"))->capture_default_str();
  app.add_option("--step", cfg.step, "Grid step h")->envname(env("STEP"))->capture_default_str();
  app.add_option("--depth", cfg.depth, "Truncation depth n")->envname(env("DEPTH"))->capture_default_str();
  app.add_option("--picard-k", cfg.picard_k, "Picard iterations k for the v0 surrogate")
      ->envname(env("PICARD_K"))->capture_default_str();
  app.add_option("--samples", cfg.samples, "Monte Carlo samples per point")
      ->envname(env("SAMPLES"))->capture_default_str();
  app.add_option("--seed", seed_value, "RNG seed (generated and printed if absent)")
      ->envname(env("SEED"));
  app.add_option("--eps-tail", cfg.eps_tail, "Tail clamp tolerance")
      ->envname(env("EPS_TAIL"))->capture_default_str();
  app.add_option("--max-nodes", cfg.max_nodes, "Working-grid node cap")
      ->envname(env("MAX_NODES"))->capture_default_str();
  app.add_option("--out", cfg.out, "Output root directory")->envname(env("OUT"))->capture_default_str();
  app.add_option("--workers", cfg.workers, "Worker threads (0 = all cores)")
      ->envname(env("WORKERS"))->capture_default_str();

  double hist_t = 2.0;
  double point_step = 0.5;
  bool converged_q0 = false;
  std::size_t check_samples = 2000;
  std::string preset;
  std::vector<double> alpha_list;
  double sweep_t = 4.0;
  int n_low = 15;
  int n_high = 20;

  auto* hist = app.add_subcommand("hist", "Histogram of W_n(t)")->fallthrough();
  hist->add_option("--t", hist_t, "Horizon t")->capture_default_str();
  auto* vcurve = app.add_subcommand("vcurve", "Monte Carlo v_n curve with deterministic reference")
                     ->fallthrough();
  vcurve->add_option("--point-step", point_step, "Spacing of estimate points")->capture_default_str();
  auto* v0 = app.add_subcommand("v0", "Picard surrogate U_k")->fallthrough();
  auto* qn = app.add_subcommand("qn", "Deterministic q_n")->fallthrough();
  qn->add_flag("--converged-q0", converged_q0, "Start from the converged Picard limit");
  auto* paths = app.add_subcommand("paths", "Tails of the shortest and longest path")->fallthrough();
  paths->add_option("--point-step", point_step, "Spacing of estimate points")->capture_default_str();
  auto* residual = app.add_subcommand("residual", "Riccati residual of v_n")->fallthrough();
  auto* check = app.add_subcommand("check", "Run the invariant suite")->fallthrough();
  check->add_option("--check-samples", check_samples, "Samples per Monte Carlo check")
      ->capture_default_str();
  auto* figures = app.add_subcommand("figures", "Data bundle for a figure preset")->fallthrough();
  figures->add_option("--preset", preset, "fig1 | fig2 | fig3")->required();
  auto* sweep = app.add_subcommand("sweep", "Limiting q_n(t) across alpha")->fallthrough();
  sweep->add_option("--alpha-list", alpha_list, "Comma-separated alpha values")
      ->delimiter(',')->required();
  sweep->add_option("--t", sweep_t, "Evaluation time")->capture_default_str();
  sweep->add_option("--n-low", n_low, "Lower iteration count")->capture_default_str();
  sweep->add_option("--n-high", n_high, "Upper iteration count")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (app.count("--alpha") > 0) cfg.alpha = alpha_value;
  if (app.count("--seed") > 0) {
    cfg.seed = seed_value;
  } else {
    std::random_device rd;
    cfg.seed = (static_cast<std::uint64_t>(rd()) << 32) | rd();
    std::cerr << "seed: " << *cfg.seed << '\n';
  }

  try {
    if (!(cfg.step > 0.0) || !(cfg.t_max >= cfg.step)) {
      throw UsageError("need --step > 0 and --t-max >= --step");
    }
    if (cfg.depth < 0 || cfg.picard_k < 0) throw UsageError("depths must be >= 0");
    if (cfg.alpha) CascadeParams{*cfg.alpha, 0}.validate();
    if (*hist) return cmd_hist(cfg, hist_t);
    if (*vcurve) return cmd_vcurve(cfg, point_step);
    if (*v0) return cmd_v0(cfg);
    if (*qn) return cmd_qn(cfg, converged_q0);
    if (*paths) return cmd_paths(cfg, point_step);
    if (*residual) return cmd_residual(cfg);
    if (*check) return cmd_check(cfg, check_samples);
    if (*figures) return cmd_figures(cfg, preset);
    if (*sweep) return cmd_sweep(cfg, alpha_list, sweep_t, n_low, n_high);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
  return kExitUsage;
}
