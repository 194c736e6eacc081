#include "riccati/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "json.hpp"

namespace riccati {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Kernel weights e^{-s} below e^{-45} (< 3e-20) are dropped from the sums.
constexpr double kKernelCutoff = 45.0;

enum class Recursion { kPicard, kV, kQ };

bool is_v_type(Recursion r) { return r != Recursion::kQ; }

// Distance to the tail clamp value: 1 - v for v-type, q for q-type.
double surrogate(Recursion r, double value) {
  return is_v_type(r) ? 1.0 - value : value;
}

double clamp_value(Recursion r) { return is_v_type(r) ? 1.0 : 0.0; }

// Beyond this position the function's tail surrogate is below eps
// (+inf if the tail itself is not).
double tail_cut(const GridFunction& f, Recursion r, double eps) {
  if (surrogate(r, f.tail_value()) >= eps) return kInf;
  const auto values = f.values();
  for (std::size_t i = values.size(); i-- > 0;) {
    if (surrogate(r, values[i]) >= eps) return f.grid().node(i + 1);
  }
  return 0.0;
}

std::size_t nodes_for(double extent, double step) {
  const double count = std::ceil(extent / step - 1e-9) + 1.0;
  if (!(count < 1e18)) return std::numeric_limits<std::size_t>::max();
  return static_cast<std::size_t>(count);
}

double lerp_bounded(double a, double b, double frac) {
  const double v = a + frac * (b - a);
  return std::clamp(v, std::min(a, b), std::max(a, b));
}

// Trapezoid weights for int_0^{t_i} e^{-s} F(t_i - s) ds: kernel[j] = e^{-j h}.
class Kernel {
 public:
  Kernel(double step, std::size_t nodes) : step_(step) {
    const auto limit = static_cast<std::size_t>(std::ceil(kKernelCutoff / step)) + 1;
    decay_.resize(std::min(nodes, limit));
    for (std::size_t j = 0; j < decay_.size(); ++j) {
      decay_[j] = std::exp(-static_cast<double>(j) * step);
    }
  }

  std::size_t reach() const { return decay_.size(); }

  // `samples[m]` holds F(t_m); returns the trapezoid sum at node i.
  double apply(std::span<const double> samples, std::size_t i) const {
    if (i == 0) return 0.0;
    const std::size_t last_interior = std::min(i - 1, decay_.size() - 1);
    double sum = 0.5 * samples[i];
    for (std::size_t j = 1; j <= last_interior; ++j) sum += decay_[j] * samples[i - j];
    if (i < decay_.size()) sum += 0.5 * decay_[i] * samples[0];
    return step_ * sum;
  }

 private:
  double step_;
  std::vector<double> decay_;
};

// A working iterate: node values with step h, constant tail beyond.
struct Working {
  std::vector<double> values;
  double tail = 1.0;

  double at(double position) const {  // position in units of nodes
    const std::size_t last = values.size() - 1;
    if (position > static_cast<double>(last)) return tail;
    const auto i = std::min(static_cast<std::size_t>(position), last == 0 ? 0 : last - 1);
    if (last == 0) return values[0];
    return lerp_bounded(values[i], values[i + 1], position - static_cast<double>(i));
  }
};

class RecursionRunner {
 public:
  RecursionRunner(Recursion recursion, double alpha, const UniformGrid& grid,
                  const GridFunction& initial, const TailOptions& options)
      : recursion_(recursion),
        alpha_(alpha),
        grid_(grid),
        initial_(initial),
        options_(options),
        expands_(alpha > 1.0),
        cut_(tail_cut(initial, recursion, options.eps_tail)),
        tail_reach_(std::log(3.0 / options.eps_tail)) {
    if (grid.size() > options.max_nodes) {
      throw CapacityError("grid with " + std::to_string(grid.size()) +
                          " nodes exceeds the memory cap of " +
                          std::to_string(options.max_nodes));
    }
    if (!(options.eps_tail > 0.0 && options.eps_tail < 1.0)) {
      throw std::invalid_argument("eps_tail must lie in (0, 1)");
    }
  }

  // Computes the next iterate on at least [0, need] (less when the tail
  // bound allows it, or when the memory cap forces it).
  void advance(double need) {
    const double h = grid_.step();
    double extent = expands_ ? std::max(need, grid_.end()) : grid_.end();
    if (expands_ && options_.tail_capping) {
      // Beyond cut/alpha + log(3/eps) the next iterate's surrogate is < eps.
      extent = std::min(extent, std::max(grid_.end(), cut_ / alpha_ + tail_reach_));
    }
    std::size_t nodes = std::max(nodes_for(extent, h), grid_.size());
    bool forced = false;
    if (nodes > options_.max_nodes) {
      if (!options_.tail_capping) {
        throw CapacityError("working grid needs " +
                            (nodes == std::numeric_limits<std::size_t>::max()
                                 ? std::string("unboundedly many")
                                 : std::to_string(nodes)) +
                            " nodes (> cap " + std::to_string(options_.max_nodes) +
                            ") and tail capping is disabled");
      }
      nodes = options_.max_nodes;
      forced = true;
    }

    std::vector<double> samples(nodes);
    for (std::size_t m = 0; m < nodes; ++m) {
      const double p = previous(static_cast<double>(m));
      samples[m] = recursion_ == Recursion::kQ ? p * (2.0 - p) : p * p;
    }
    if (kernel_.reach() == 0 || kernel_nodes_ < nodes) {
      kernel_ = Kernel(h, nodes);
      kernel_nodes_ = nodes;
      if (recursion_ == Recursion::kV) {
        // e^{-t} = 1 - int_0^t e^{-s} ds, integrated by the same rule so that
        // v = 1 stays an exact fixed point.
        const std::vector<double> ones(nodes, 1.0);
        forcing_.resize(nodes);
        for (std::size_t i = 0; i < nodes; ++i) forcing_[i] = 1.0 - kernel_.apply(ones, i);
      }
    }

    Working next;
    next.values.resize(nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
      double value = kernel_.apply(samples, i);
      if (recursion_ == Recursion::kV) value += forcing_[i];
      next.values[i] = std::clamp(value, 0.0, 1.0);
    }

    next.tail = expands_ ? clamp_value(recursion_) : next.values.back();
    if (expands_ && options_.tail_capping) trim(next, forced);
    current_ = std::move(next);
    has_current_ = true;
    ++report.iterations;
    report.peak_nodes = std::max(report.peak_nodes, nodes);
    report.support_end = grid_.node(current_.values.size() - 1);
  }

  std::span<const double> current() const { return current_.values; }

  // The final iterate on its whole working support, which extends past the
  // requested grid when alpha > 1.
  GridFunction result() const {
    const std::size_t n = current_.values.size();
    const UniformGrid support =
        n == grid_.size() ? grid_ : UniformGrid(grid_.node(n - 1), grid_.step(), n);
    return GridFunction(support, current_.values, current_.tail, true);
  }

  IterationReport report;

 private:
  double previous(double m) const {
    if (has_current_) return current_.at(alpha_ * m);
    return initial_.evaluate(alpha_ * m * grid_.step());
  }

  void trim(Working& next, bool forced) {
    const double eps = options_.eps_tail;
    std::size_t keep = next.values.size();
    std::size_t last_significant = keep;  // none
    for (std::size_t i = keep; i-- > 0;) {
      if (surrogate(recursion_, next.values[i]) >= eps) {
        last_significant = i;
        break;
      }
    }
    if (last_significant == next.values.size()) {
      cut_ = 0.0;
      keep = grid_.size();
    } else if (last_significant + 1 < next.values.size()) {
      cut_ = grid_.node(last_significant + 1);
      keep = std::max(last_significant + 2, grid_.size());
    } else {
      // Still significant at the last node.
      cut_ = kInf;
      if (forced) {
        report.forced_tail_error = std::max(
            report.forced_tail_error, surrogate(recursion_, next.values.back()));
        next.tail = next.values.back();
      }
    }
    keep = std::min(keep, next.values.size());
    next.values.resize(keep);
  }

  Recursion recursion_;
  double alpha_;
  UniformGrid grid_;
  const GridFunction& initial_;
  TailOptions options_;
  bool expands_;
  double cut_;
  double tail_reach_;
  Kernel kernel_{1.0, 0};
  std::size_t kernel_nodes_ = 0;
  std::vector<double> forcing_;
  Working current_;
  bool has_current_ = false;
};

void check_alpha(double alpha) {
  if (!(alpha > 0.0) || std::isinf(alpha)) {
    throw std::invalid_argument("alpha must be finite and > 0");
  }
}

void check_probability_input(const GridFunction& f, const char* name) {
  if (!f.range_bounded()) {
    throw std::invalid_argument(std::string(name) + " must be range-bounded in [0, 1]");
  }
}

GridFunction run(Recursion recursion, double alpha, const UniformGrid& grid,
                 int iterations, const GridFunction& initial,
                 const TailOptions& options, IterationReport* report) {
  RecursionRunner runner(recursion, alpha, grid, initial, options);
  for (int j = 1; j <= iterations; ++j) {
    const double need = alpha > 1.0 ? grid.end() * std::pow(alpha, iterations - j)
                                    : grid.end();
    runner.advance(need);
  }
  if (report) *report = runner.report;
  return runner.result();
}

std::string format_double(double x) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", x);
  return buffer;
}

}  // namespace

UniformGrid::UniformGrid(double t_max, double step, std::size_t max_nodes)
    : t_max_(t_max), step_(step), size_(0) {
  if (!(step > 0.0) || std::isinf(step)) {
    throw std::invalid_argument("grid step must be finite and > 0");
  }
  if (!(t_max >= step) || std::isinf(t_max)) {
    throw std::invalid_argument("grid t_max must be finite and >= step");
  }
  size_ = nodes_for(t_max, step);
  if (size_ > max_nodes) {
    throw CapacityError("grid [0, " + format_double(t_max) + "] with step " +
                        format_double(step) + " exceeds the node cap " +
                        std::to_string(max_nodes));
  }
}

GridFunction::GridFunction(UniformGrid grid, std::vector<double> values,
                           double tail_value, bool range_bounded)
    : grid_(grid),
      values_(std::move(values)),
      tail_value_(tail_value),
      range_bounded_(range_bounded) {
  if (values_.size() != grid_.size()) {
    throw std::invalid_argument("grid function has " + std::to_string(values_.size()) +
                                " values for " + std::to_string(grid_.size()) +
                                " nodes");
  }
  const auto bad = [&](double v) {
    return std::isnan(v) || (range_bounded_ && (v < 0.0 || v > 1.0));
  };
  if (bad(tail_value_) || std::any_of(values_.begin(), values_.end(), bad)) {
    throw std::invalid_argument(range_bounded_
                                    ? "grid function value outside [0, 1]"
                                    : "grid function value is NaN");
  }
}

GridFunction GridFunction::constant(const UniformGrid& grid, double value,
                                    bool range_bounded) {
  return GridFunction(grid, std::vector<double>(grid.size(), value), value,
                      range_bounded);
}

GridFunction GridFunction::sample(const UniformGrid& grid,
                                  const std::function<double(double)>& f,
                                  double tail_value, bool range_bounded) {
  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = f(grid.node(i));
  return GridFunction(grid, std::move(values), tail_value, range_bounded);
}

double GridFunction::evaluate(double t) const {
  if (!(t >= 0.0)) {
    throw std::invalid_argument("grid function evaluated at negative t");
  }
  if (t > grid_.end()) return tail_value_;
  const double x = t / grid_.step();
  const std::size_t i = std::min(static_cast<std::size_t>(x), values_.size() - 2);
  const double frac = std::clamp(x - static_cast<double>(i), 0.0, 1.0);
  return lerp_bounded(values_[i], values_[i + 1], frac);
}

GridFunction GridFunction::transform(const std::function<double(double)>& f,
                                     bool range_bounded) const {
  std::vector<double> out(values_.size());
  std::transform(values_.begin(), values_.end(), out.begin(), f);
  return GridFunction(grid_, std::move(out), f(tail_value_), range_bounded);
}

GridFunction GridFunction::restrict_to(const UniformGrid& grid) const {
  if (grid.step() != grid_.step()) {
    throw std::invalid_argument("restrict_to needs grids with the same step");
  }
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = i < values_.size() ? values_[i] : tail_value_;
  }
  return GridFunction(grid, std::move(out), tail_value_, range_bounded_);
}

GridFunction convolve_kernel(const GridFunction& f, double alpha,
                             const UniformGrid& grid) {
  if (!(alpha >= 0.0) || std::isinf(alpha)) {
    throw std::invalid_argument("alpha must be finite and >= 0");
  }
  std::vector<double> samples(grid.size());
  for (std::size_t m = 0; m < samples.size(); ++m) {
    samples[m] = f.evaluate(alpha * grid.node(m));
  }
  const Kernel kernel(grid.step(), grid.size());
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = kernel.apply(samples, i);
  const double tail = out.back();
  return GridFunction(grid, std::move(out), tail, false);
}

GridFunction picard_v0(double alpha, const UniformGrid& grid, int k,
                       const TailOptions& options, IterationReport* report) {
  check_alpha(alpha);
  if (k < 0) throw std::invalid_argument("Picard depth k must be >= 0");
  const GridFunction one = GridFunction::constant(grid, 1.0);
  if (k == 0) {
    if (report) *report = IterationReport{0, grid.size(), grid.end(), 0.0};
    return one;
  }
  return run(Recursion::kPicard, alpha, grid, k, one, options, report);
}

GridFunction picard_v0_converged(double alpha, const UniformGrid& grid,
                                 double tolerance, int max_iterations,
                                 const TailOptions& options, IterationReport* report) {
  check_alpha(alpha);
  const GridFunction one = GridFunction::constant(grid, 1.0);
  RecursionRunner runner(Recursion::kPicard, alpha, grid, one, options);
  std::vector<double> last(grid.size(), 1.0);
  for (int k = 1; k <= max_iterations; ++k) {
    runner.advance(kInf);
    const auto now = runner.current();
    double change = 0.0;
    for (std::size_t i = 0; i < last.size(); ++i) {
      change = std::max(change, std::abs(now[i] - last[i]));
      last[i] = now[i];
    }
    if (change < tolerance) break;
  }
  if (report) *report = runner.report;
  return runner.result();
}

GridFunction iterate_vn(double alpha, const UniformGrid& grid, int n,
                        const GridFunction& v0, const TailOptions& options,
                        IterationReport* report) {
  check_alpha(alpha);
  check_probability_input(v0, "v0");
  if (n < 0) throw std::invalid_argument("iteration count n must be >= 0");
  if (n == 0) return v0;
  return run(Recursion::kV, alpha, grid, n, v0, options, report);
}

GridFunction iterate_qn(double alpha, const UniformGrid& grid, int n,
                        const GridFunction& q0, const TailOptions& options,
                        IterationReport* report) {
  check_alpha(alpha);
  check_probability_input(q0, "q0");
  if (n < 0) throw std::invalid_argument("iteration count n must be >= 0");
  if (n == 0) return q0;
  return run(Recursion::kQ, alpha, grid, n, q0, options, report);
}

GridFunction longest_path_tail(double alpha, const GridFunction& v0) {
  if (alpha <= 1.0) return GridFunction::constant(v0.grid(), 1.0);
  return v0.transform([](double v) { return 1.0 - v; }, true);
}

ResidualReport riccati_residual(const GridFunction& v, double alpha) {
  check_alpha(alpha);
  const UniformGrid& grid = v.grid();
  const auto values = v.values();
  const std::size_t n = values.size();
  if (n < 3) throw std::invalid_argument("residual needs at least 3 grid nodes");
  const double h = grid.step();

  ResidualReport report{grid, std::vector<double>(n), 0.0, 0.0, 0};
  report.interior_end = std::min(grid.end(), grid.end() / alpha);
  for (std::size_t i = 0; i < n; ++i) {
    double derivative;
    if (i == 0) {
      derivative = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    } else if (i == n - 1) {
      derivative = (3.0 * values[i] - 4.0 * values[i - 1] + values[i - 2]) / (2.0 * h);
    } else {
      derivative = (values[i + 1] - values[i - 1]) / (2.0 * h);
    }
    const double t = grid.node(i);
    const double advanced = v.evaluate(alpha * t);
    report.residual[i] = derivative + values[i] - advanced * advanced;
    if (alpha * t <= grid.end() * (1.0 + 1e-12)) {
      ++report.interior_nodes;
      report.max_abs_residual =
          std::max(report.max_abs_residual, std::abs(report.residual[i]));
    }
  }
  return report;
}

TailIntegral integrate_tail(const GridFunction& f) {
  const auto values = f.values();
  double sum = 0.5 * (values.front() + values.back());
  for (std::size_t i = 1; i + 1 < values.size(); ++i) sum += values[i];
  TailIntegral out;
  out.finite_part = sum * f.grid().step();
  out.tail_value = f.tail_value();
  out.infinite_tail = f.tail_value() != 0.0;
  return out;
}

double check_identity_v_q(double alpha, const UniformGrid& grid, int n,
                          const GridFunction& v0, const TailOptions& options) {
  if (n < 1) throw std::invalid_argument("identity check needs n >= 1");
  const GridFunction v = iterate_vn(alpha, grid, n, v0, options);
  const GridFunction q0 = v0.transform([](double x) { return 1.0 - x; }, true);
  const GridFunction q = iterate_qn(alpha, grid, n, q0, options);
  double deviation = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    deviation = std::max(deviation, std::abs(v.values()[i] - (1.0 - q.values()[i])));
  }
  return deviation;
}

std::filesystem::path grid_sidecar_path(const std::filesystem::path& csv_path) {
  auto sidecar = csv_path;
  sidecar.replace_extension(".json");
  return sidecar;
}

void write_grid_function(const GridFunction& f, const std::filesystem::path& csv_path) {
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw std::runtime_error("cannot open " + csv_path.string() + " for writing");
  csv << "t,value\n";
  for (std::size_t i = 0; i < f.values().size(); ++i) {
    csv << format_double(f.grid().node(i)) << ',' << format_double(f.values()[i]) << '\n';
  }
  if (!csv) throw std::runtime_error("write failed: " + csv_path.string());

  nlohmann::json sidecar = {{"t_max", f.grid().t_max()},
                            {"step", f.grid().step()},
                            {"tail_value", f.tail_value()},
                            {"range_bounds", f.range_bounded()}};
  const auto sidecar_path = grid_sidecar_path(csv_path);
  std::ofstream json(sidecar_path, std::ios::binary);
  if (!json) throw std::runtime_error("cannot open " + sidecar_path.string());
  json << sidecar.dump(2) << '\n';
  if (!json) throw std::runtime_error("write failed: " + sidecar_path.string());
}

GridFunction read_grid_function(const std::filesystem::path& csv_path) {
  const auto sidecar_path = grid_sidecar_path(csv_path);
  std::ifstream json(sidecar_path);
  if (!json) throw std::runtime_error("cannot open " + sidecar_path.string());
  nlohmann::json meta;
  try {
    json >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(sidecar_path.string() + ": " + e.what());
  }
  const UniformGrid grid(meta.at("t_max").get<double>(), meta.at("step").get<double>());

  std::ifstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot open " + csv_path.string());
  std::string line;
  std::getline(csv, line);
  if (line != "t,value") {
    throw std::runtime_error(csv_path.string() + ": expected header 't,value'");
  }
  std::vector<double> values;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::runtime_error(csv_path.string() + ": malformed row '" + line + "'");
    }
    values.push_back(std::stod(line.substr(comma + 1)));
  }
  return GridFunction(grid, std::move(values), meta.at("tail_value").get<double>(),
                      meta.at("range_bounds").get<bool>());
}

}  // namespace riccati
