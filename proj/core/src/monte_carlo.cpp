#include "riccati/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "riccati/cascade.hpp"
#include "riccati/parallel.hpp"

namespace riccati {
namespace {

void check_config(const McConfig& cfg) {
  if (cfg.samples == 0) throw std::invalid_argument("samples must be positive");
  if (cfg.samples > (std::uint64_t{1} << 32)) {
    throw std::invalid_argument("samples must be <= 2^32");
  }
}

void check_points(std::span<const double> t_points) {
  for (const double t : t_points) {
    if (!(t >= 0.0) || std::isinf(t)) {
      throw std::invalid_argument("time points must be finite and >= 0");
    }
  }
}

// Runs `draw(point, sample_index)` for every (point, sample) and summarizes
// each point.
template <typename Draw>
EstimateSeries estimate_points(std::span<const double> t_points, const McConfig& cfg,
                               StreamTag tag, Draw draw) {
  check_config(cfg);
  check_points(t_points);
  const std::size_t per_point = cfg.samples;
  std::vector<double> values(t_points.size() * per_point);
  parallel_for(values.size(), cfg.workers, [&](std::size_t flat) {
    const std::size_t point = flat / per_point;
    const std::size_t sample = flat % per_point;
    values[flat] =
        draw(t_points[point], sample_stream_index(tag, point, per_point, sample));
  });
  EstimateSeries series;
  series.points.reserve(t_points.size());
  for (std::size_t p = 0; p < t_points.size(); ++p) {
    series.points.push_back(summarize(
        t_points[p], std::span<const double>(values).subspan(p * per_point, per_point)));
  }
  return series;
}

}  // namespace

EstimatePoint summarize(double t, std::span<const double> values) {
  EstimatePoint point{t, 0.0, 0.0, values.size()};
  if (values.empty()) return point;
  const double first = values.front();
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == first; })) {
    point.mean = first;
    return point;
  }
  const double n = static_cast<double>(values.size());
  point.mean = pairwise_sum(values) / n;
  std::vector<double> squares(values.size());
  std::transform(values.begin(), values.end(), squares.begin(), [&](double v) {
    const double d = v - point.mean;
    return d * d;
  });
  const double variance = pairwise_sum(squares) / (n - 1.0);
  point.std_error = std::sqrt(variance / n);
  return point;
}

std::uint64_t Histogram::count_at_least(std::uint64_t threshold) const noexcept {
  std::uint64_t n = 0;
  for (const Bin& bin : bins) {
    if (bin.lo >= threshold) n += bin.count;
  }
  return n;
}

EstimatePoint Histogram::mean(double t) const {
  EstimatePoint point{t, 0.0, 0.0, static_cast<std::size_t>(total)};
  if (total == 0) return point;
  double sum = 0.0;
  for (const Bin& bin : bins) sum += static_cast<double>(bin.lo) * static_cast<double>(bin.count);
  const double n = static_cast<double>(total);
  point.mean = sum / n;
  if (bins.size() <= 1 || total < 2) return point;
  double squares = 0.0;
  for (const Bin& bin : bins) {
    const double d = static_cast<double>(bin.lo) - point.mean;
    squares += d * d * static_cast<double>(bin.count);
  }
  point.std_error = std::sqrt(squares / (n - 1.0) / n);
  return point;
}

std::uint64_t sample_stream_index(StreamTag tag, std::size_t point, std::size_t samples,
                                  std::size_t sample) {
  const std::uint64_t offset = static_cast<std::uint64_t>(point) * samples + sample;
  if (offset >= (std::uint64_t{1} << 56)) {
    throw std::out_of_range("sample index space exhausted");
  }
  return (static_cast<std::uint64_t>(tag) << 56) | offset;
}

EstimateSeries estimate_v_curve(double alpha, std::span<const double> t_points, int n,
                                const GridFunction& v0, const McConfig& cfg) {
  if (!v0.range_bounded()) throw std::invalid_argument("v0 must be range-bounded");
  const CascadeParams params{alpha, cfg.seed};
  params.validate();
  const InitialProcess x0 = [&v0](double t) { return v0.evaluate(t); };
  const ClockSource clocks = ClockSource::exponential();
  return estimate_points(t_points, cfg, StreamTag::kProduct,
                         [&](double t, std::uint64_t index) {
                           return sample_product_indicator(params, t, n, x0, clocks,
                                                           derive_stream(params, index));
                         });
}

Histogram estimate_leaf_histogram(double alpha, double t, int depth, const McConfig& cfg) {
  check_config(cfg);
  const CascadeParams params{alpha, cfg.seed};
  params.validate();
  const ClockSource clocks = ClockSource::exponential();
  std::vector<LeafCountSample> draws(cfg.samples);
  parallel_for(draws.size(), cfg.workers, [&](std::size_t i) {
    const auto index = sample_stream_index(StreamTag::kLeafCount, 0, cfg.samples, i);
    draws[i] = sample_truncated_leaf_count(params, t, depth, clocks,
                                           derive_stream(params, index));
  });

  std::map<std::uint64_t, std::uint64_t> occupied;
  Histogram h;
  for (const LeafCountSample& s : draws) {
    ++occupied[s.count];
    if (s.truncated) ++h.truncated_count;
    h.max_observed = std::max(h.max_observed, s.count);
  }
  h.total = draws.size();
  for (const auto& [value, count] : occupied) h.bins.push_back({value, value + 1, count});
  return h;
}

EstimateSeries estimate_L_tail(double alpha, std::span<const double> t_points, int depth,
                               const McConfig& cfg) {
  const CascadeParams params{alpha, cfg.seed};
  const ClockSource clocks = ClockSource::exponential();
  return estimate_points(t_points, cfg, StreamTag::kPaths,
                         [&](double t, std::uint64_t index) {
                           return longest_path_exceeds(params, t, depth, clocks,
                                                       derive_stream(params, index))
                                      ? 1.0
                                      : 0.0;
                         });
}

EstimateSeries estimate_S_tail(double alpha, std::span<const double> t_points, int depth,
                               const McConfig& cfg) {
  const CascadeParams params{alpha, cfg.seed};
  const ClockSource clocks = ClockSource::exponential();
  return estimate_points(t_points, cfg, StreamTag::kPaths,
                         [&](double t, std::uint64_t index) {
                           return shortest_path_exceeds(params, t, depth, clocks,
                                                        derive_stream(params, index))
                                      ? 1.0
                                      : 0.0;
                         });
}

ComparisonReport compare_series(const EstimateSeries& mc, const GridFunction& reference,
                                const CompareOptions& options) {
  ComparisonReport report;
  std::vector<double> magnitudes;
  std::size_t within = 0;
  for (const EstimatePoint& p : mc.points) {
    const double ref = reference.evaluate(p.t);
    double z;
    if (p.std_error > 0.0) {
      z = (p.mean - ref) / p.std_error;
    } else if (p.mean == ref) {
      z = 0.0;
    } else if (ref > 0.0 && ref < 1.0 && p.n_samples > 0) {
      // All samples agreed; bound the standard error by the largest variance
      // a [0, 1]-valued variable with mean `ref` can have.
      z = (p.mean - ref) / std::sqrt(ref * (1.0 - ref) / static_cast<double>(p.n_samples));
    } else {
      z = p.mean > ref ? std::numeric_limits<double>::infinity()
                       : -std::numeric_limits<double>::infinity();
    }
    report.z_scores.push_back(z);
    report.reference.push_back(ref);
    report.tail_evaluated.push_back(p.t > reference.grid().end());
    magnitudes.push_back(std::abs(z));
    if (std::abs(z) <= options.z_threshold) ++within;
  }
  if (magnitudes.empty()) {
    report.passed = true;
    report.fraction_within = 1.0;
    return report;
  }
  std::sort(magnitudes.begin(), magnitudes.end());
  const auto rank = [&](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(magnitudes.size())));
    return magnitudes[std::clamp<std::size_t>(k, 1, magnitudes.size()) - 1];
  };
  report.median_abs_z = rank(0.5);
  report.p95_abs_z = rank(0.95);
  report.max_abs_z = magnitudes.back();
  report.fraction_within = static_cast<double>(within) / static_cast<double>(magnitudes.size());
  report.passed = report.fraction_within >= options.min_fraction;
  return report;
}

std::vector<double> time_points(double t_max, double step) {
  if (!(step > 0.0) || !(t_max >= 0.0)) {
    throw std::invalid_argument("time_points needs step > 0 and t_max >= 0");
  }
  const auto count = static_cast<std::size_t>(std::floor(t_max / step + 1e-9)) + 1;
  std::vector<double> points(count);
  for (std::size_t i = 0; i < count; ++i) points[i] = static_cast<double>(i) * step;
  return points;
}

}  // namespace riccati
