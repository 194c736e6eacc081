#include "riccati/invariants.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>

#include "riccati/analysis_io.hpp"
#include "riccati/cascade.hpp"
#include "riccati/monte_carlo.hpp"

namespace riccati {
namespace {

namespace fs = std::filesystem;

// Slack for comparisons between iterates that are equal in exact arithmetic.
constexpr double kRoundoff = 1e-12;

class Suite {
 public:
  explicit Suite(const SuiteConfig& cfg) : cfg_(cfg), grid_(cfg.t_max, cfg.step) {}

  // `check` returns an empty string on success, otherwise the failure detail.
  void run(const std::string& module, const std::string& name,
           const std::function<std::string()>& check) {
    InvariantResult r{module, name, false, {}};
    try {
      r.detail = check();
      r.passed = r.detail.empty();
    } catch (const std::exception& e) {
      r.detail = std::string("exception: ") + e.what();
    }
    results_.push_back(std::move(r));
  }

  std::vector<InvariantResult> take() { return std::move(results_); }

  const SuiteConfig& cfg() const { return cfg_; }
  const UniformGrid& grid() const { return grid_; }
  McConfig mc(std::size_t samples, unsigned workers) const {
    return {samples, 10, cfg_.seed, workers};
  }

 private:
  SuiteConfig cfg_;
  UniformGrid grid_;
  std::vector<InvariantResult> results_;
};

std::string describe(const char* what, double t, double lhs, double rhs) {
  std::ostringstream out;
  out.precision(10);
  out << what << " at t=" << t << ": " << lhs << " vs " << rhs;
  return out.str();
}

// First node where a(t) > b(t) + slack, reported as a failure detail.
std::string check_le(const GridFunction& a, const GridFunction& b, const char* what) {
  const auto va = a.values();
  const auto vb = b.values();
  for (std::size_t i = 0; i < std::min(va.size(), vb.size()); ++i) {
    if (va[i] > vb[i] + kRoundoff) return describe(what, a.grid().node(i), va[i], vb[i]);
  }
  return {};
}

std::string check_unit_range(const GridFunction& f, const char* what) {
  for (std::size_t i = 0; i < f.values().size(); ++i) {
    const double v = f.values()[i];
    if (!(v >= 0.0 && v <= 1.0)) return describe(what, f.grid().node(i), v, 0.0);
  }
  if (!(f.tail_value() >= 0.0 && f.tail_value() <= 1.0)) return std::string(what) + ": tail";
  return {};
}

void cascade_checks(Suite& s) {
  const SuiteConfig& cfg = s.cfg();
  const CascadeParams params{cfg.alpha, cfg.seed};
  const ClockSource clocks = ClockSource::exponential();
  const std::size_t n = cfg.samples;

  s.run("cascade_core", "exponential clocks have mean one", [&] {
    const Substream stream(cfg.seed, 0);
    constexpr std::uint64_t kDraws = 1'000'000;
    double sum = 0.0;
    for (std::uint64_t i = 0; i < kDraws; ++i) sum += stream.exponential(i);
    const double mean = sum / static_cast<double>(kDraws);
    const double z = (mean - 1.0) * std::sqrt(static_cast<double>(kDraws));
    return std::abs(z) <= 5.0 ? std::string{} : describe("clock mean", 0.0, mean, 1.0);
  });

  s.run("cascade_core", "samplers are deterministic", [&] {
    for (std::uint64_t i = 0; i < 50; ++i) {
      const auto a = sample_truncated_leaf_count(params, 2.0, 10, clocks, derive_stream(params, i));
      const auto b = sample_truncated_leaf_count(params, 2.0, 10, clocks, derive_stream(params, i));
      if (a.count != b.count || a.truncated != b.truncated) return std::string("leaf count differs");
      const auto x0 = [](double t) { return std::exp(-t); };
      const double xa = sample_product_indicator(params, 3.0, 5, x0, clocks, derive_stream(params, i));
      const double xb = sample_product_indicator(params, 3.0, 5, x0, clocks, derive_stream(params, i));
      if (xa != xb) return std::string("product indicator differs");
      if (cfg.alpha > 0.0) {
        const auto pa = sample_path_extrema(params, 8, clocks, derive_stream(params, i));
        const auto pb = sample_path_extrema(params, 8, clocks, derive_stream(params, i));
        if (pa.s_partial != pb.s_partial || pa.l_partial != pb.l_partial) {
          return std::string("path extrema differ");
        }
      }
    }
    return std::string{};
  });

  s.run("cascade_core", "leaf counts bounded and coupled in depth", [&] {
    for (std::uint64_t i = 0; i < n; ++i) {
      const Substream stream = derive_stream(params, i);
      std::uint64_t previous = 0;
      for (const int depth : {0, 5, 10, 15}) {
        const auto w = sample_truncated_leaf_count(params, 2.0, depth, clocks, stream);
        if (w.count > (std::uint64_t{1} << depth)) return std::string("count exceeds 2^depth");
        if (w.count == 0 && !w.truncated) return std::string("zero count without truncation");
        if (w.count < previous) return std::string("W_n decreased with depth");
        previous = w.count;
      }
    }
    return std::string{};
  });

  s.run("cascade_core", "path extrema ordered and increasing in depth", [&] {
    if (cfg.alpha <= 0.0) return std::string{};
    for (std::uint64_t i = 0; i < std::min<std::size_t>(n, 500); ++i) {
      const Substream stream = derive_stream(params, i);
      double s_prev = 0.0;
      double l_prev = 0.0;
      for (int depth = 0; depth <= 12; ++depth) {
        const auto p = sample_path_extrema(params, depth, clocks, stream);
        if (p.s_partial > p.l_partial) return std::string("S_n > L_n");
        if (!(p.s_partial > s_prev) || !(p.l_partial > l_prev)) {
          return std::string("extrema not increasing in depth");
        }
        s_prev = p.s_partial;
        l_prev = p.l_partial;
      }
    }
    return std::string{};
  });

  s.run("cascade_core", "S tail tends to one for alpha <= 1", [&] {
    const double t = 2.0;
    const std::vector<double> points{t};
    double previous = 0.0;
    double last = 0.0;
    for (const int depth : {5, 10, 20, 30}) {
      last = estimate_S_tail(0.66, points, depth, s.mc(n, cfg.workers)).points[0].mean;
      if (last < previous) return describe("P(S_n > t) decreased", t, last, previous);
      previous = last;
    }
    return last >= 0.99 ? std::string{} : describe("P(S_30 > t)", t, last, 1.0);
  });

  s.run("cascade_core", "E X_n matches the v_n recursion", [&] {
    const GridFunction v0 = picard_v0(cfg.alpha, s.grid(), cfg.picard_k, cfg.tail);
    const GridFunction vn = iterate_vn(cfg.alpha, s.grid(), 5, v0, cfg.tail);
    const auto points = time_points(cfg.t_max, 1.0);
    // Far-tail means at large alpha hinge on rare low products; fewer samples
    // leave the sample standard error unreliable there.
    const std::size_t samples = std::max<std::size_t>(n, 50000);
    const auto mc = estimate_v_curve(cfg.alpha, points, 5, v0, s.mc(samples, cfg.workers));
    const auto report = compare_series(mc, vn);
    std::ostringstream out;
    if (!report.passed) out << "fraction within 4 sigma " << report.fraction_within;
    return out.str();
  });
}

void grid_checks(Suite& s) {
  const SuiteConfig& cfg = s.cfg();
  const UniformGrid& grid = s.grid();

  s.run("grid_numerics", "Picard iterates nonincreasing in k and in [0,1]", [&] {
    GridFunction previous = picard_v0(cfg.alpha, grid, 0, cfg.tail);
    for (int k = 1; k <= 8; ++k) {
      const GridFunction u = picard_v0(cfg.alpha, grid, k, cfg.tail);
      if (auto d = check_unit_range(u, "U_k range"); !d.empty()) return d;
      if (auto d = check_le(u, previous, "U_k > U_{k-1}"); !d.empty()) return d;
      previous = u;
    }
    return std::string{};
  });

  s.run("grid_numerics", "q_n nonincreasing, dominated by q_0, in [0,1]", [&] {
    const GridFunction v0 =
        cfg.alpha > 1.0 ? picard_v0_converged(cfg.alpha, grid, 1e-10, 400, cfg.tail)
                        : GridFunction::constant(grid, 1.0);
    const GridFunction q0 = longest_path_tail(cfg.alpha, v0);
    GridFunction previous = q0;
    for (int j = 1; j <= 6; ++j) {
      const GridFunction q = iterate_qn(cfg.alpha, grid, j, q0, cfg.tail);
      if (auto d = check_unit_range(q, "q_n range"); !d.empty()) return d;
      if (auto d = check_le(q, previous, "q_n > q_{n-1}"); !d.empty()) return d;
      if (auto d = check_le(q, q0, "q_n > q_0"); !d.empty()) return d;
      if (q.values()[0] != 0.0) return describe("q_n(0)", 0.0, q.values()[0], 0.0);
      previous = q;
    }
    return std::string{};
  });

  s.run("grid_numerics", "v_n in [0,1] with v_n(0) = 1", [&] {
    const GridFunction v0 = picard_v0(cfg.alpha, grid, cfg.picard_k, cfg.tail);
    for (const int n : {1, 3, 10}) {
      const GridFunction v = iterate_vn(cfg.alpha, grid, n, v0, cfg.tail);
      if (auto d = check_unit_range(v, "v_n range"); !d.empty()) return d;
      if (v.values()[0] != 1.0) return describe("v_n(0)", 0.0, v.values()[0], 1.0);
    }
    return std::string{};
  });

  s.run("grid_numerics", "trapezoid error shrinks by ~4 when h halves", [&] {
    const auto error = [&](double h) {
      const UniformGrid g(cfg.t_max, h);
      const GridFunction one = GridFunction::constant(g, 1.0);
      const GridFunction conv = convolve_kernel(one, cfg.alpha, g);
      double worst = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        worst = std::max(worst, std::abs(conv.values()[i] - (1.0 - std::exp(-g.node(i)))));
      }
      return worst;
    };
    const double ratio = error(2.0 * cfg.step) / error(cfg.step);
    return ratio >= 3.5 && ratio <= 4.5 ? std::string{} : describe("error ratio", 0.0, ratio, 4.0);
  });

  s.run("grid_numerics", "v_n = 1 - q_n up to quadrature error", [&] {
    const GridFunction v0 = picard_v0(cfg.alpha, grid, cfg.picard_k, cfg.tail);
    const double deviation = check_identity_v_q(cfg.alpha, grid, 5, v0, cfg.tail);
    return deviation < 1e-4 ? std::string{} : describe("max deviation", 0.0, deviation, 1e-4);
  });

  s.run("grid_numerics", "constant one solves the Riccati equation", [&] {
    const auto report = riccati_residual(GridFunction::constant(grid, 1.0), cfg.alpha);
    return report.max_abs_residual == 0.0
               ? std::string{}
               : describe("residual", 0.0, report.max_abs_residual, 0.0);
  });
}

void monte_carlo_checks(Suite& s) {
  const SuiteConfig& cfg = s.cfg();
  const std::size_t n = cfg.samples;

  s.run("monte_carlo", "estimates independent of worker count", [&] {
    const GridFunction v0 = picard_v0(cfg.alpha, s.grid(), cfg.picard_k, cfg.tail);
    const auto points = time_points(cfg.t_max, 2.0);
    const auto h1 = estimate_leaf_histogram(cfg.alpha, 2.0, 10, s.mc(n, 1));
    const auto h3 = estimate_leaf_histogram(cfg.alpha, 2.0, 10, s.mc(n, 3));
    if (!(h1 == h3)) return std::string("histograms differ");
    const auto c1 = estimate_v_curve(cfg.alpha, points, 10, v0, s.mc(n, 1));
    const auto c3 = estimate_v_curve(cfg.alpha, points, 10, v0, s.mc(n, 3));
    for (std::size_t i = 0; i < c1.points.size(); ++i) {
      if (c1.points[i].mean != c3.points[i].mean ||
          c1.points[i].std_error != c3.points[i].std_error) {
        return std::string("v-curve estimates differ");
      }
    }
    return std::string{};
  });

  s.run("monte_carlo", "histogram totals consistent", [&] {
    const auto h = estimate_leaf_histogram(cfg.alpha, 2.0, 10, s.mc(n, cfg.workers));
    std::uint64_t sum = 0;
    for (const auto& bin : h.bins) sum += bin.count;
    if (sum != h.total || h.total != n) return std::string("bin counts do not sum to total");
    if (h.bins.empty() || h.bins.back().lo != h.max_observed) {
      return std::string("max_observed disagrees with bins");
    }
    return std::string{};
  });

  s.run("monte_carlo", "stderr zero for constant samples, means in [0,1]", [&] {
    const GridFunction one = GridFunction::constant(s.grid(), 1.0);
    const auto points = time_points(cfg.t_max, 1.0);
    for (const auto& p : estimate_v_curve(cfg.alpha, points, 10, one, s.mc(n, cfg.workers)).points) {
      if (p.mean != 1.0 || p.std_error != 0.0) return describe("v0 = 1 curve", p.t, p.mean, 1.0);
    }
    const GridFunction v0 = picard_v0(cfg.alpha, s.grid(), cfg.picard_k, cfg.tail);
    for (const auto& p : estimate_v_curve(cfg.alpha, points, 10, v0, s.mc(n, cfg.workers)).points) {
      if (!(p.mean >= 0.0 && p.mean <= 1.0)) return describe("mean range", p.t, p.mean, 0.0);
    }
    return std::string{};
  });

  s.run("monte_carlo", "3-sigma intervals cover known values", [&] {
    constexpr int kRepetitions = 100;
    constexpr std::size_t kSamples = 400;
    const double t = 2.0;
    const double truth = std::exp(-t);
    const UniformGrid grid(cfg.t_max, cfg.step);
    const GridFunction zero = GridFunction::constant(grid, 0.0);
    const std::vector<double> points{t};
    int covered_v = 0;
    int covered_h = 0;
    for (int r = 0; r < kRepetitions; ++r) {
      const McConfig mc{kSamples, 1, cfg.seed + 1000 + static_cast<std::uint64_t>(r), cfg.workers};
      const auto p = estimate_v_curve(cfg.alpha, points, 1, zero, mc).points[0];
      if (std::abs(p.mean - truth) <= 3.0 * p.std_error) ++covered_v;
      const auto h = estimate_leaf_histogram(0.0, t, 1, mc);
      const double ones = static_cast<double>(h.total - h.count_at_least(2));
      const double freq = ones / static_cast<double>(h.total);
      const double se = std::sqrt(freq * (1.0 - freq) / static_cast<double>(h.total - 1));
      if (std::abs(freq - truth) <= 3.0 * se) ++covered_h;
    }
    std::ostringstream out;
    if (covered_v < 99) out << "v-curve coverage " << covered_v << "/100 ";
    if (covered_h < 99) out << "histogram coverage " << covered_h << "/100";
    return out.str();
  });

  s.run("monte_carlo", "L tail grows with depth and dominates S tail", [&] {
    if (cfg.alpha <= 0.0) return std::string{};
    const auto points = time_points(cfg.t_max, 1.0);
    const McConfig mc = s.mc(std::min<std::size_t>(n, 1000), cfg.workers);
    std::vector<double> previous(points.size(), 0.0);
    for (const int depth : {5, 10, 15}) {
      const auto l = estimate_L_tail(cfg.alpha, points, depth, mc);
      const auto st = estimate_S_tail(cfg.alpha, points, depth, mc);
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (l.points[i].mean < previous[i]) {
          return describe("L tail decreased", points[i], l.points[i].mean, previous[i]);
        }
        if (st.points[i].mean > l.points[i].mean) {
          return describe("S tail above L tail", points[i], st.points[i].mean, l.points[i].mean);
        }
        previous[i] = l.points[i].mean;
      }
    }
    return std::string{};
  });

  s.run("monte_carlo", "E W_n(2) increases with n at alpha 1.5", [&] {
    const McConfig mc = s.mc(n, cfg.workers);
    EstimatePoint previous{};
    for (const int depth : {5, 10, 15}) {
      const EstimatePoint p = estimate_leaf_histogram(1.5, 2.0, depth, mc).mean(2.0);
      if (depth > 5) {
        const double margin = std::hypot(p.std_error, previous.std_error);
        if (!(p.mean - previous.mean > margin)) {
          return describe("E W_n not increasing", 2.0, p.mean, previous.mean);
        }
      }
      previous = p;
    }
    return std::string{};
  });
}

void io_checks(Suite& s) {
  const SuiteConfig& cfg = s.cfg();
  s.run("analysis_io", "files round-trip and manifests verify", [&] {
    const fs::path dir = fs::temp_directory_path() /
                         ("riccati-check-" + sha256_hex(std::to_string(cfg.seed) + "/" +
                                                        std::to_string(cfg.alpha)).substr(0, 12));
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto cleanup = [&] { fs::remove_all(dir); };

    const McConfig mc = s.mc(200, cfg.workers);
    const auto hist = estimate_leaf_histogram(cfg.alpha, 2.0, 10, mc);
    write_histogram_csv(hist, dir / "h.csv");
    if (!(read_histogram_csv(dir / "h.csv") == hist)) {
      cleanup();
      return std::string("histogram round-trip");
    }

    const GridFunction u = picard_v0(cfg.alpha, s.grid(), cfg.picard_k, cfg.tail);
    write_grid_function(u, dir / "u.csv");
    const GridFunction back = read_grid_function(dir / "u.csv");
    if (!std::equal(u.values().begin(), u.values().end(), back.values().begin(),
                    back.values().end()) ||
        u.tail_value() != back.tail_value()) {
      cleanup();
      return std::string("grid function round-trip");
    }

    const auto series = estimate_v_curve(cfg.alpha, time_points(cfg.t_max, 2.0), 3, u, mc);
    write_series_csv(series, dir / "s.csv");
    const auto rows = read_series_csv(dir / "s.csv");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& p = series.points[i];
      if (rows[i].t != p.t || rows[i].mean != p.mean || rows[i].std_error != p.std_error ||
          rows[i].n_samples != p.n_samples) {
        cleanup();
        return std::string("series round-trip");
      }
    }

    RunManifest m;
    m.tool_version = tool_version();
    m.command = "check";
    m.alpha = cfg.alpha;
    m.seed = cfg.seed;
    write_manifest(m, dir / "manifest.json", {"h.csv", "u.csv", "u.json", "s.csv"});
    const bool verified = verify_manifest(dir / "manifest.json").empty();
    const bool same_config =
        read_manifest(dir / "manifest.json").config_digest() == m.config_digest();
    cleanup();
    if (!verified) return std::string("manifest digests do not verify");
    if (!same_config) return std::string("manifest configuration changed on reload");
    return std::string{};
  });
}

}  // namespace

std::vector<InvariantResult> run_invariant_suite(const SuiteConfig& cfg) {
  CascadeParams{cfg.alpha, cfg.seed}.validate();
  if (cfg.alpha == 0.0) throw std::invalid_argument("the invariant suite needs alpha > 0");
  Suite suite(cfg);
  cascade_checks(suite);
  grid_checks(suite);
  monte_carlo_checks(suite);
  io_checks(suite);
  return suite.take();
}

}  // namespace riccati
