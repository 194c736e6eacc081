#include "riccati/cascade.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace riccati {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Relative slack on pruning bounds; far above accumulated rounding of a
// 63-term sum, far below anything a clock draw can resolve.
constexpr double kBoundSlack = 1e-9;

using DepthTable = std::array<double, kMaxDepth + 2>;

void check_depth(int depth) {
  if (depth < 0 || depth > kMaxDepth) {
    throw std::invalid_argument("depth " + std::to_string(depth) +
                                " outside [0, " + std::to_string(kMaxDepth) +
                                "]: 2^depth would overflow the count type");
  }
}

void check_horizon(double t) {
  if (!(t >= 0.0) || std::isinf(t)) {
    throw std::invalid_argument("horizon t must be finite and >= 0, got " +
                                std::to_string(t));
  }
}

void check_positive_alpha(const CascadeParams& params) {
  params.validate();
  if (params.alpha == 0.0) {
    throw std::invalid_argument("path sums need alpha > 0 (alpha^{-j} undefined)");
  }
}

// Scaled-clock weights alpha^{-j} and the largest possible remaining path
// sum from generation j through `depth`.
struct PathTables {
  DepthTable scale{};
  DepthTable remaining{};

  PathTables(double alpha, int depth, double clock_bound) {
    scale[0] = 1.0;
    for (int j = 1; j <= depth; ++j) scale[j] = scale[j - 1] / alpha;
    remaining[depth + 1] = 0.0;
    for (int j = depth; j >= 0; --j) {
      remaining[j] = remaining[j + 1] + clock_bound * scale[j];
    }
  }

  // No path through a vertex with this partial sum (before generation j)
  // can exceed t.
  bool cannot_exceed(double partial_before, int j, double t) const {
    return (partial_before + remaining[j]) * (1.0 + kBoundSlack) <= t;
  }
};

class LeafCounter {
 public:
  LeafCounter(double alpha, int depth, const ClockSource& clocks,
              const Substream& stream)
      : alpha_(alpha), clocks_(clocks), stream_(stream) {
    // quiet_[m]: a subtree with m further generations and local horizon at
    // least quiet_[m] has no crossing vertex.
    double geometric = 0.0;
    double weight = 1.0;
    for (int m = 0; m <= depth; ++m) {
      geometric += weight;
      weight = alpha > 0.0 ? weight / alpha : kInf;
      quiet_[m] = alpha > 0.0 ? clocks.upper_bound() * geometric * (1.0 + kBoundSlack)
                              : kInf;
    }
  }

  LeafCountSample visit(std::uint64_t vertex, double horizon, int remaining) const {
    // V(0) = {root}: a zero horizon is crossed by any positive clock.
    if (horizon == 0.0) return {1, false};
    if (horizon >= quiet_[remaining]) return {0, true};
    const double clock = clocks_.draw(stream_, vertex);
    if (clock > horizon) return {1, false};
    if (remaining == 0) return {0, true};
    const double child_horizon = alpha_ * (horizon - clock);
    const LeafCountSample left = visit(2 * vertex, child_horizon, remaining - 1);
    const LeafCountSample right = visit(2 * vertex + 1, child_horizon, remaining - 1);
    return {left.count + right.count, left.truncated || right.truncated};
  }

 private:
  double alpha_;
  const ClockSource& clocks_;
  const Substream& stream_;
  DepthTable quiet_{};
};

class ExtremaSearch {
 public:
  ExtremaSearch(const PathTables& tables, int depth, const ClockSource& clocks,
                const Substream& stream)
      : tables_(tables), depth_(depth), clocks_(clocks), stream_(stream) {}

  // Branch and bound: any partial sum already >= best cannot improve.
  void minimize(std::uint64_t vertex, int j, double partial_before, double clock) {
    const double sum = partial_before + tables_.scale[j] * clock;
    if (sum >= best_min) return;
    if (j == depth_) {
      best_min = sum;
      return;
    }
    visit_children<true>(vertex, j, sum);
  }

  void maximize(std::uint64_t vertex, int j, double partial_before, double clock) {
    const double sum = partial_before + tables_.scale[j] * clock;
    if (j == depth_) {
      best_max = std::max(best_max, sum);
      return;
    }
    if ((sum + tables_.remaining[j + 1]) * (1.0 + kBoundSlack) <= best_max) return;
    visit_children<false>(vertex, j, sum);
  }

  double best_min = kInf;
  double best_max = -kInf;

 private:
  template <bool kMin>
  void visit_children(std::uint64_t vertex, int j, double sum) {
    std::uint64_t first = 2 * vertex;
    std::uint64_t second = first + 1;
    double first_clock = clocks_.draw(stream_, first);
    double second_clock = clocks_.draw(stream_, second);
    // Visit the more promising child first to tighten the bound early.
    if (kMin ? second_clock < first_clock : second_clock > first_clock) {
      std::swap(first, second);
      std::swap(first_clock, second_clock);
    }
    if constexpr (kMin) {
      minimize(first, j + 1, sum, first_clock);
      minimize(second, j + 1, sum, second_clock);
    } else {
      maximize(first, j + 1, sum, first_clock);
      maximize(second, j + 1, sum, second_clock);
    }
  }

  const PathTables& tables_;
  int depth_;
  const ClockSource& clocks_;
  const Substream& stream_;
};

class CrossingSearch {
 public:
  CrossingSearch(const PathTables& tables, int depth, double t,
                 const ClockSource& clocks, const Substream& stream)
      : tables_(tables), depth_(depth), t_(t), clocks_(clocks), stream_(stream) {}

  // Some vertex at generation <= depth has partial sum > t.
  bool any_exceeds(std::uint64_t vertex, int j, double partial_before,
                   double clock) const {
    if (tables_.cannot_exceed(partial_before, j, t_)) return false;
    const double sum = partial_before + tables_.scale[j] * clock;
    if (sum > t_) return true;
    if (j == depth_) return false;
    const auto [first, first_clock, second, second_clock] = children(vertex, false);
    return any_exceeds(first, j + 1, sum, first_clock) ||
           any_exceeds(second, j + 1, sum, second_clock);
  }

  // Some complete depth-n path has total sum <= t.
  bool any_within(std::uint64_t vertex, int j, double partial_before,
                  double clock) const {
    const double sum = partial_before + tables_.scale[j] * clock;
    if (sum > t_) return false;
    if (j == depth_) return true;
    const auto [first, first_clock, second, second_clock] = children(vertex, true);
    return any_within(first, j + 1, sum, first_clock) ||
           any_within(second, j + 1, sum, second_clock);
  }

 private:
  struct Ordered {
    std::uint64_t first;
    double first_clock;
    std::uint64_t second;
    double second_clock;
  };

  Ordered children(std::uint64_t vertex, bool smaller_first) const {
    Ordered o{2 * vertex, clocks_.draw(stream_, 2 * vertex), 2 * vertex + 1,
              clocks_.draw(stream_, 2 * vertex + 1)};
    if (smaller_first ? o.second_clock < o.first_clock
                      : o.second_clock > o.first_clock) {
      std::swap(o.first, o.second);
      std::swap(o.first_clock, o.second_clock);
    }
    return o;
  }

  const PathTables& tables_;
  int depth_;
  double t_;
  const ClockSource& clocks_;
  const Substream& stream_;
};

class ProductIndicator {
 public:
  ProductIndicator(double alpha, const InitialProcess& x0, const ClockSource& clocks,
                   const Substream& stream)
      : alpha_(alpha), x0_(x0), clocks_(clocks), stream_(stream) {}

  double visit(std::uint64_t vertex, double horizon, int n) const {
    if (n == 0) {
      const double value = x0_(horizon);
      if (!(value >= 0.0 && value <= 1.0)) {
        throw ContractViolation("initial process returned " + std::to_string(value) +
                                " at t=" + std::to_string(horizon) +
                                ", outside [0, 1]");
      }
      return value;
    }
    const double clock = clocks_.draw(stream_, vertex);
    if (clock > horizon) return 1.0;
    const double child_horizon = alpha_ * (horizon - clock);
    const double left = visit(2 * vertex, child_horizon, n - 1);
    if (left == 0.0) return 0.0;
    return left * visit(2 * vertex + 1, child_horizon, n - 1);
  }

 private:
  double alpha_;
  const InitialProcess& x0_;
  const ClockSource& clocks_;
  const Substream& stream_;
};

constexpr std::uint64_t kRoot = 1;

}  // namespace

void CascadeParams::validate() const {
  if (!(alpha >= 0.0) || std::isinf(alpha)) {
    throw std::invalid_argument("alpha must be finite and >= 0, got " +
                                std::to_string(alpha));
  }
}

ClockSource ClockSource::constant(double value) {
  if (!(value > 0.0) || std::isinf(value)) {
    throw std::invalid_argument("constant clock must be finite and > 0");
  }
  return ClockSource(value);
}

Substream derive_stream(const CascadeParams& params, std::uint64_t sample_index) {
  return Substream(params.seed, sample_index);
}

LeafCountSample sample_truncated_leaf_count(const CascadeParams& params, double t,
                                            int depth, const ClockSource& clocks,
                                            const Substream& stream) {
  params.validate();
  check_horizon(t);
  check_depth(depth);
  const LeafCounter counter(params.alpha, depth, clocks, stream);
  return counter.visit(kRoot, t, depth);
}

PathExtrema sample_path_extrema(const CascadeParams& params, int depth,
                                const ClockSource& clocks, const Substream& stream) {
  check_positive_alpha(params);
  check_depth(depth);
  const PathTables tables(params.alpha, depth, clocks.upper_bound());
  ExtremaSearch search(tables, depth, clocks, stream);
  const double root_clock = clocks.draw(stream, kRoot);
  search.minimize(kRoot, 0, 0.0, root_clock);
  search.maximize(kRoot, 0, 0.0, root_clock);
  return {search.best_min, search.best_max, depth};
}

bool longest_path_exceeds(const CascadeParams& params, double t, int depth,
                          const ClockSource& clocks, const Substream& stream) {
  check_positive_alpha(params);
  check_horizon(t);
  check_depth(depth);
  const PathTables tables(params.alpha, depth, clocks.upper_bound());
  const CrossingSearch search(tables, depth, t, clocks, stream);
  return search.any_exceeds(kRoot, 0, 0.0, clocks.draw(stream, kRoot));
}

bool shortest_path_exceeds(const CascadeParams& params, double t, int depth,
                           const ClockSource& clocks, const Substream& stream) {
  check_positive_alpha(params);
  check_horizon(t);
  check_depth(depth);
  const PathTables tables(params.alpha, depth, clocks.upper_bound());
  const CrossingSearch search(tables, depth, t, clocks, stream);
  return !search.any_within(kRoot, 0, 0.0, clocks.draw(stream, kRoot));
}

double sample_product_indicator(const CascadeParams& params, double t, int n,
                                const InitialProcess& x0, const ClockSource& clocks,
                                const Substream& stream) {
  params.validate();
  check_horizon(t);
  check_depth(n);
  if (!x0) throw std::invalid_argument("initial process is empty");
  const ProductIndicator indicator(params.alpha, x0, clocks, stream);
  return indicator.visit(kRoot, t, n);
}

}  // namespace riccati
