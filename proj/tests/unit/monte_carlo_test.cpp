#include "riccati/monte_carlo.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "riccati/parallel.hpp"

namespace riccati {
namespace {

const UniformGrid kGrid(8.0, 0.01);

TEST(Summarize, MeanAndStandardError) {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const auto p = summarize(0.5, v);
  EXPECT_DOUBLE_EQ(p.mean, 2.5);
  // sample sd = sqrt(5/3)
  EXPECT_DOUBLE_EQ(p.std_error, std::sqrt(5.0 / 3.0) / 2.0);
  EXPECT_EQ(p.n_samples, 4u);
  const std::vector<double> same(10, 0.3);
  EXPECT_EQ(summarize(0.0, same).std_error, 0.0);
  EXPECT_EQ(summarize(0.0, same).mean, 0.3);
}

TEST(Parallel, PairwiseSumAndWorkers) {
  std::vector<double> v(1001);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  EXPECT_EQ(pairwise_sum(v), 500500.0);
  EXPECT_GE(resolve_workers(0), 1u);
  EXPECT_EQ(resolve_workers(3), 3u);
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (const int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 7) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

TEST(VCurve, TimeZeroAndOnesAreExact) {
  const McConfig cfg{2000, 10, 3, 1};
  const std::vector<double> points{0.0, 1.0, 4.0};
  const auto v0 = picard_v0(1.5, kGrid, 5);
  const auto s = estimate_v_curve(1.5, points, 10, v0, cfg);
  EXPECT_EQ(s.points[0].mean, 1.0);
  EXPECT_EQ(s.points[0].std_error, 0.0);
  const auto ones = estimate_v_curve(1.5, points, 10, GridFunction::constant(kGrid, 1.0), cfg);
  for (const auto& p : ones.points) {
    EXPECT_EQ(p.mean, 1.0);
    EXPECT_EQ(p.std_error, 0.0);
  }
}

TEST(VCurve, RejectsBadInputs) {
  const McConfig cfg{100, 10, 3, 1};
  const std::vector<double> bad{-1.0};
  EXPECT_THROW(estimate_v_curve(1.5, bad, 3, GridFunction::constant(kGrid, 1.0), cfg),
               std::invalid_argument);
  const std::vector<double> ok{1.0};
  EXPECT_THROW(estimate_v_curve(1.5, ok, 3, GridFunction::constant(kGrid, 2.0, false), cfg),
               std::invalid_argument);
  EXPECT_THROW(estimate_v_curve(1.5, ok, 3, GridFunction::constant(kGrid, 1.0), {0, 3, 1, 1}),
               std::invalid_argument);
}

TEST(VCurve, AgreesWithRecursion) {
  const McConfig cfg{4000, 6, 17, 1};
  const auto v0 = picard_v0(1.5, kGrid, 5);
  const auto points = time_points(8.0, 1.0);
  const auto mc = estimate_v_curve(1.5, points, 6, v0, cfg);
  const auto report = compare_series(mc, iterate_vn(1.5, kGrid, 6, v0));
  EXPECT_TRUE(report.passed) << report.fraction_within;
  for (const auto& p : mc.points) {
    EXPECT_GE(p.mean, 0.0);
    EXPECT_LE(p.mean, 1.0);
  }
}

TEST(VCurve, MismatchedAlphaIsFlagged) {
  const McConfig cfg{4000, 6, 17, 1};
  const auto v0 = picard_v0(1.5, kGrid, 5);
  const auto points = time_points(8.0, 1.0);
  const auto mc = estimate_v_curve(3.0, points, 6, v0, cfg);
  EXPECT_FALSE(compare_series(mc, iterate_vn(1.5, kGrid, 6, v0)).passed);
}

TEST(Compare, ExactReferenceGivesZeroScores) {
  const McConfig cfg{500, 4, 1, 1};
  const auto one = GridFunction::constant(kGrid, 1.0);
  const auto mc = estimate_v_curve(1.5, time_points(8.0, 0.5), 4, one, cfg);
  const auto report = compare_series(mc, one);
  EXPECT_TRUE(report.passed);
  for (const double z : report.z_scores) EXPECT_EQ(z, 0.0);
}

TEST(Compare, ZeroVarianceMismatchIsInfinite) {
  EstimateSeries s;
  s.points.push_back({1.0, 1.0, 0.0, 100});
  const auto report = compare_series(s, GridFunction::constant(kGrid, 0.0));
  EXPECT_TRUE(std::isinf(report.z_scores[0]));
  EXPECT_FALSE(report.passed);
  // Reference strictly inside (0, 1): variance bound sqrt(r(1-r)/n).
  const auto r = compare_series(s, GridFunction::constant(kGrid, 0.99));
  EXPECT_NEAR(r.z_scores[0], 0.01 / std::sqrt(0.99 * 0.01 / 100), 1e-12);
}

TEST(Compare, TailEvaluationFlagged) {
  EstimateSeries s;
  s.points.push_back({10.0, 1.0, 0.1, 100});
  const auto report = compare_series(s, GridFunction::constant(kGrid, 1.0));
  EXPECT_TRUE(report.tail_evaluated[0]);
}

TEST(Histogram, TimeZeroAllAtOne) {
  const auto h = estimate_leaf_histogram(1.5, 0.0, 10, {1000, 10, 2, 1});
  ASSERT_EQ(h.bins.size(), 1u);
  EXPECT_EQ(h.bins[0].lo, 1u);
  EXPECT_EQ(h.bins[0].count, 1000u);
  EXPECT_EQ(h.max_observed, 1u);
  EXPECT_EQ(h.truncated_count, 0u);
}

TEST(Histogram, AlphaZeroOneStepOracle) {
  constexpr std::size_t n = 10000;
  const auto h = estimate_leaf_histogram(0.0, 2.0, 10, {n, 10, 5, 1});
  std::uint64_t sum = 0;
  for (const auto& b : h.bins) {
    EXPECT_TRUE(b.lo == 1 || b.lo == 2);
    EXPECT_EQ(b.hi, b.lo + 1);
    sum += b.count;
  }
  EXPECT_EQ(sum, h.total);
  const double p = 1.0 - std::exp(-2.0);
  const double freq = static_cast<double>(h.count_at_least(2)) / n;
  EXPECT_LT(std::abs(freq - p), 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST(Histogram, YuleMeanAtAlphaOne) {
  // Unit-rate binary Yule process: E|V(t)| = e^t.
  const auto h = estimate_leaf_histogram(1.0, 2.0, 20, {10000, 20, 9, 1});
  const auto m = h.mean(2.0);
  EXPECT_LT(std::abs(m.mean - std::exp(2.0)), 4.0 * m.std_error);
}

TEST(Histogram, MeanMatchesSummarize) {
  const auto h = estimate_leaf_histogram(1.5, 2.0, 8, {3000, 8, 4, 1});
  std::vector<double> values;
  for (const auto& b : h.bins) values.insert(values.end(), b.count, static_cast<double>(b.lo));
  const auto direct = summarize(2.0, values);
  EXPECT_NEAR(h.mean(2.0).mean, direct.mean, 1e-12);
  EXPECT_NEAR(h.mean(2.0).std_error, direct.std_error, 1e-12);
}

TEST(Histogram, HeavyTailGrowsWithDepthAtAlphaOnePointFive) {
  const McConfig cfg{4000, 10, 21, 1};
  EstimatePoint prev{};
  for (const int depth : {5, 10, 15}) {
    const auto p = estimate_leaf_histogram(1.5, 2.0, depth, cfg).mean(2.0);
    if (depth > 5) EXPECT_GT(p.mean - prev.mean, std::hypot(p.std_error, prev.std_error));
    prev = p;
  }
}

TEST(Reproducibility, WorkerCountDoesNotMatter) {
  const auto v0 = picard_v0(1.5, kGrid, 5);
  const auto points = time_points(8.0, 0.5);
  for (const unsigned workers : {2u, 3u, 8u}) {
    const McConfig a{1500, 10, 99, 1};
    const McConfig b{1500, 10, 99, workers};
    EXPECT_EQ(estimate_leaf_histogram(1.5, 2.0, 10, a), estimate_leaf_histogram(1.5, 2.0, 10, b));
    const auto ca = estimate_v_curve(1.5, points, 10, v0, a);
    const auto cb = estimate_v_curve(1.5, points, 10, v0, b);
    const auto la = estimate_L_tail(1.5, points, 12, a);
    const auto lb = estimate_L_tail(1.5, points, 12, b);
    for (std::size_t i = 0; i < points.size(); ++i) {
      EXPECT_EQ(ca.points[i].mean, cb.points[i].mean);
      EXPECT_EQ(ca.points[i].std_error, cb.points[i].std_error);
      EXPECT_EQ(la.points[i].mean, lb.points[i].mean);
    }
  }
}

TEST(Reproducibility, SeedsChangeEstimates) {
  const auto a = estimate_leaf_histogram(1.5, 2.0, 10, {1000, 10, 1, 1});
  const auto b = estimate_leaf_histogram(1.5, 2.0, 10, {1000, 10, 2, 1});
  EXPECT_FALSE(a == b);
}

TEST(PathTails, TimeZeroIsOne) {
  const std::vector<double> zero{0.0};
  EXPECT_EQ(estimate_L_tail(1.5, zero, 10, {500, 10, 1, 1}).points[0].mean, 1.0);
  EXPECT_EQ(estimate_S_tail(1.5, zero, 10, {500, 10, 1, 1}).points[0].mean, 1.0);
}

TEST(PathTails, CoupledMonotoneAndOrdered) {
  const McConfig cfg{2000, 10, 8, 1};
  const auto points = time_points(8.0, 1.0);
  std::vector<double> prev_l(points.size(), 0.0);
  std::vector<double> prev_s(points.size(), 0.0);
  for (const int depth : {5, 10, 20, 30}) {
    const auto l = estimate_L_tail(1.5, points, depth, cfg);
    const auto s = estimate_S_tail(1.5, points, depth, cfg);
    for (std::size_t i = 0; i < points.size(); ++i) {
      EXPECT_GE(l.points[i].mean, prev_l[i]);
      EXPECT_GE(s.points[i].mean, prev_s[i]);
      EXPECT_LE(s.points[i].mean, l.points[i].mean);
      prev_l[i] = l.points[i].mean;
      prev_s[i] = s.points[i].mean;
    }
  }
}

TEST(PathTails, SmallAlphaLongestPathInfinite) {
  const std::vector<double> t{2.0};
  const auto l = estimate_L_tail(0.66, t, 30, {2000, 30, 4, 1});
  EXPECT_EQ(l.points[0].mean, 1.0);
}

TEST(PathTails, ShortestPathAtAlphaOneNearOneForSmallT) {
  const std::vector<double> t{0.5, 1.0, 2.0};
  const auto s = estimate_S_tail(1.0, t, 30, {2000, 30, 4, 1});
  for (const auto& p : s.points) EXPECT_GE(p.mean + 3 * p.std_error, 1.0) << p.t;
}

TEST(PathTails, AlphaThreeLongestPathMatchesPicardSurrogate) {
  // 1 - P(L_30 > t) against U_8 at alpha = 3, where L is finite.
  const McConfig cfg{4000, 30, 6, 1};
  const auto points = time_points(8.0, 0.5);
  auto l = estimate_L_tail(3.0, points, 30, cfg);
  for (auto& p : l.points) p.mean = 1.0 - p.mean;
  const auto report = compare_series(l, picard_v0(3.0, kGrid, 8));
  EXPECT_TRUE(report.passed) << report.fraction_within << " max |z| " << report.max_abs_z;
}

TEST(Calibration, ThreeSigmaCoverage) {
  constexpr int kReps = 100;
  const double truth = std::exp(-2.0);
  const std::vector<double> t{2.0};
  const auto zero = GridFunction::constant(kGrid, 0.0);
  int covered_v = 0;
  int covered_h = 0;
  for (int r = 0; r < kReps; ++r) {
    const McConfig cfg{1000, 1, 5000 + static_cast<std::uint64_t>(r), 1};
    const auto p = estimate_v_curve(1.5, t, 1, zero, cfg).points[0];
    covered_v += std::abs(p.mean - truth) <= 3 * p.std_error ? 1 : 0;
    const auto h = estimate_leaf_histogram(0.0, 2.0, 1, cfg);
    const double f = static_cast<double>(h.total - h.count_at_least(2)) / h.total;
    const double se = std::sqrt(f * (1 - f) / (h.total - 1));
    covered_h += std::abs(f - truth) <= 3 * se ? 1 : 0;
  }
  EXPECT_GE(covered_v, 99);
  EXPECT_GE(covered_h, 99);
}

TEST(TimePoints, Lattice) {
  const auto p = time_points(8.0, 0.5);
  ASSERT_EQ(p.size(), 17u);
  EXPECT_EQ(p.back(), 8.0);
  EXPECT_THROW(time_points(8.0, 0.0), std::invalid_argument);
}

}  // namespace
}  // namespace riccati
