#pragma once

// Deterministic evaluation of the integral recursions on uniform grids:
//
//   U_k(t) = int_0^t e^{-s} U_{k-1}^2(alpha(t-s)) ds,              U_0 = 1
//   v_n(t) = e^{-t} + int_0^t e^{-s} v_{n-1}^2(alpha(t-s)) ds
//   q_n(t) = int_0^t e^{-(t-s)} (2 q_{n-1} - q_{n-1}^2)(alpha s) ds
//
// All integrals use the composite trapezoid rule on the grid nodes with the
// kernel e^{-s} evaluated exactly at the nodes. The forcing term e^{-t} is
// taken as 1 - int_0^t e^{-s} ds under the same rule, which keeps v = 1 - q
// exact between the discrete v and q recursions.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace riccati {

class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Nodes t_i = i * step, i = 0..ceil(t_max / step).
class UniformGrid {
 public:
  static constexpr std::size_t kDefaultMaxNodes = std::size_t{1} << 22;

  UniformGrid(double t_max, double step, std::size_t max_nodes = kDefaultMaxNodes);

  double t_max() const noexcept { return t_max_; }
  double step() const noexcept { return step_; }
  std::size_t size() const noexcept { return size_; }
  double node(std::size_t i) const noexcept { return static_cast<double>(i) * step_; }
  /// Position of the last node (>= t_max).
  double end() const noexcept { return node(size_ - 1); }

  friend bool operator==(const UniformGrid&, const UniformGrid&) = default;

 private:
  double t_max_;
  double step_;
  std::size_t size_;
};

/// A real function on a uniform grid: piecewise linear on [0, end], constant
/// `tail_value` beyond.
class GridFunction {
 public:
  GridFunction(UniformGrid grid, std::vector<double> values, double tail_value,
               bool range_bounded);

  static GridFunction constant(const UniformGrid& grid, double value,
                               bool range_bounded = true);
  static GridFunction sample(const UniformGrid& grid,
                             const std::function<double(double)>& f,
                             double tail_value, bool range_bounded);

  const UniformGrid& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  double tail_value() const noexcept { return tail_value_; }
  bool range_bounded() const noexcept { return range_bounded_; }

  double evaluate(double t) const;
  double operator()(double t) const { return evaluate(t); }

  /// Applies `f` node-wise and to the tail.
  GridFunction transform(const std::function<double(double)>& f,
                         bool range_bounded) const;

  /// Re-samples onto `grid` (which must share the step); nodes beyond this
  /// function's support take the tail value.
  GridFunction restrict_to(const UniformGrid& grid) const;

 private:
  UniformGrid grid_;
  std::vector<double> values_;
  double tail_value_;
  bool range_bounded_;
};

/// Limits on the working grid used when alpha > 1 pushes arguments past
/// t_max. `eps_tail` is the tolerated tail-clamp error per evaluation.
struct TailOptions {
  double eps_tail = 1e-6;
  std::size_t max_nodes = std::size_t{1} << 16;
  bool tail_capping = true;
};

struct IterationReport {
  std::size_t iterations = 0;
  std::size_t peak_nodes = 0;
  /// Support end of the final working function; the tail clamp applies beyond.
  double support_end = 0.0;
  /// Largest tail surrogate at a point where the memory cap forced a cut
  /// (0 when every cut happened below eps_tail).
  double forced_tail_error = 0.0;
};

/// g(t_i) = int_0^{t_i} e^{-s} f(alpha (t_i - s)) ds, composite trapezoid.
GridFunction convolve_kernel(const GridFunction& f, double alpha,
                             const UniformGrid& grid);

// The recursions below return their final iterate on the working support:
// `grid` itself for alpha <= 1, otherwise a same-step grid that may run past
// grid.end() up to where the tail clamp takes over. Use restrict_to(grid)
// for exactly the requested nodes.

GridFunction picard_v0(double alpha, const UniformGrid& grid, int k,
                       const TailOptions& options = {},
                       IterationReport* report = nullptr);

/// Iterates Picard until the sup-norm change on `grid` drops below
/// `tolerance` (or `max_iterations` is reached; see report->iterations).
GridFunction picard_v0_converged(double alpha, const UniformGrid& grid,
                                 double tolerance = 1e-10, int max_iterations = 400,
                                 const TailOptions& options = {},
                                 IterationReport* report = nullptr);

GridFunction iterate_vn(double alpha, const UniformGrid& grid, int n,
                        const GridFunction& v0, const TailOptions& options = {},
                        IterationReport* report = nullptr);

GridFunction iterate_qn(double alpha, const UniformGrid& grid, int n,
                        const GridFunction& q0, const TailOptions& options = {},
                        IterationReport* report = nullptr);

/// The q_0 surrogate: 1 for alpha <= 1 (L = infinity a.s.), else 1 - v0.
GridFunction longest_path_tail(double alpha, const GridFunction& v0);

struct ResidualReport {
  UniformGrid grid;
  std::vector<double> residual;
  double max_abs_residual = 0.0;
  /// Residuals are meaningful on [0, interior_end]: alpha t_i stays inside
  /// the grid there.
  double interior_end = 0.0;
  std::size_t interior_nodes = 0;
};

/// r(t_i) = D_h v(t_i) + v(t_i) - v(alpha t_i)^2, second-order differences.
ResidualReport riccati_residual(const GridFunction& v, double alpha);

struct TailIntegral {
  double finite_part = 0.0;  // trapezoid over [0, end]
  double tail_value = 0.0;
  bool infinite_tail = false;  // tail_value > 0 integrates to infinity
};

TailIntegral integrate_tail(const GridFunction& f);

/// max_i |v_n(t_i) - (1 - q_n(t_i))| with q_0 = 1 - v0.
double check_identity_v_q(double alpha, const UniformGrid& grid, int n,
                          const GridFunction& v0, const TailOptions& options = {});

/// `t,value` CSV plus a JSON sidecar (same stem, .json) holding
/// {t_max, step, tail_value, range_bounds}.
void write_grid_function(const GridFunction& f, const std::filesystem::path& csv_path);
GridFunction read_grid_function(const std::filesystem::path& csv_path);
std::filesystem::path grid_sidecar_path(const std::filesystem::path& csv_path);

}  // namespace riccati
