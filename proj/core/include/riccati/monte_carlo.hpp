#pragma once

// Monte Carlo estimators over the cascade samplers.
//
// Sample i of point p draws its tree from substream
//   (seed, tag << 56 | p * samples + i)
// so every estimate is a pure function of the configuration, independent of
// the worker count. Per-sample values are reduced in index order.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "riccati/grid.hpp"

namespace riccati {

struct McConfig {
  std::size_t samples = 10000;
  int depth = 10;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

struct EstimatePoint {
  double t = 0.0;
  double mean = 0.0;
  double std_error = 0.0;  // sample sd / sqrt(n); exactly 0 if all samples agree
  std::size_t n_samples = 0;
};

struct EstimateSeries {
  std::vector<EstimatePoint> points;
};

/// Mean and standard error of `values`, reduced deterministically.
EstimatePoint summarize(double t, std::span<const double> values);

/// Unit-width integer bins; only occupied bins are stored, in increasing order.
struct Histogram {
  struct Bin {
    std::uint64_t lo = 0;
    std::uint64_t hi = 0;  // exclusive
    std::uint64_t count = 0;
    friend bool operator==(const Bin&, const Bin&) = default;
  };

  std::vector<Bin> bins;
  std::uint64_t total = 0;
  std::uint64_t truncated_count = 0;
  std::uint64_t max_observed = 0;

  std::uint64_t count_at_least(std::uint64_t threshold) const noexcept;
  EstimatePoint mean(double t) const;

  friend bool operator==(const Histogram&, const Histogram&) = default;
};

/// Sub-stream tags; estimators sharing a tag see the same trees.
enum class StreamTag : std::uint64_t { kLeafCount = 0, kProduct = 1, kPaths = 2 };

std::uint64_t sample_stream_index(StreamTag tag, std::size_t point, std::size_t samples,
                                  std::size_t sample);

EstimateSeries estimate_v_curve(double alpha, std::span<const double> t_points, int n,
                                const GridFunction& v0, const McConfig& cfg);

Histogram estimate_leaf_histogram(double alpha, double t, int depth, const McConfig& cfg);

/// Empirical P(L_depth > t) at each t.
EstimateSeries estimate_L_tail(double alpha, std::span<const double> t_points, int depth,
                               const McConfig& cfg);

/// Empirical P(S_depth > t) at each t.
EstimateSeries estimate_S_tail(double alpha, std::span<const double> t_points, int depth,
                               const McConfig& cfg);

struct CompareOptions {
  double z_threshold = 4.0;
  double min_fraction = 0.95;
};

struct ComparisonReport {
  std::vector<double> z_scores;
  std::vector<double> reference;
  std::vector<bool> tail_evaluated;
  double fraction_within = 0.0;
  double median_abs_z = 0.0;
  double p95_abs_z = 0.0;
  double max_abs_z = 0.0;
  bool passed = false;
};

/// z = (mean - reference) / stderr. Where stderr is 0 the point is exact if
/// the values agree; otherwise stderr is replaced by sqrt(r (1 - r) / n), the
/// largest standard error for a [0, 1]-valued estimand with mean r
/// (+-inf when r is 0 or 1).
ComparisonReport compare_series(const EstimateSeries& mc, const GridFunction& reference,
                                const CompareOptions& options = {});

/// 0, step, 2 step, ..., t_max (inclusive when it lands on the lattice).
std::vector<double> time_points(double t_max, double step);

}  // namespace riccati
