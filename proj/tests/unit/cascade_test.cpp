#include "riccati/cascade.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace riccati {
namespace {

const ClockSource kExp = ClockSource::exponential();

// Reference W_n: plain recursion over the whole tree, no pruning.
LeafCountSample brute_leaf_count(double alpha, double horizon, int remaining,
                                 std::uint64_t vertex, const ClockSource& clocks,
                                 const Substream& stream) {
  if (horizon == 0.0) return {1, false};
  const double clock = clocks.draw(stream, vertex);
  if (clock > horizon) return {1, false};
  if (remaining == 0) return {0, true};
  const double child = alpha * (horizon - clock);
  const auto a = brute_leaf_count(alpha, child, remaining - 1, 2 * vertex, clocks, stream);
  const auto b = brute_leaf_count(alpha, child, remaining - 1, 2 * vertex + 1, clocks, stream);
  return {a.count + b.count, a.truncated || b.truncated};
}

// Reference path sums: every root-to-depth path enumerated.
void brute_paths(double alpha, int depth, int j, std::uint64_t vertex, double partial,
                 const Substream& stream, std::vector<double>& out) {
  const double sum = partial + std::pow(alpha, -j) * stream.exponential(vertex);
  if (j == depth) {
    out.push_back(sum);
    return;
  }
  brute_paths(alpha, depth, j + 1, 2 * vertex, sum, stream, out);
  brute_paths(alpha, depth, j + 1, 2 * vertex + 1, sum, stream, out);
}

// Reference X_n: direct recursion.
double brute_product(double alpha, double t, int n, const InitialProcess& x0,
                     std::uint64_t vertex, const Substream& stream) {
  if (n == 0) return x0(t);
  const double clock = stream.exponential(vertex);
  if (clock > t) return 1.0;
  const double child = alpha * (t - clock);
  return brute_product(alpha, child, n - 1, x0, 2 * vertex, stream) *
         brute_product(alpha, child, n - 1, x0, 2 * vertex + 1, stream);
}

TEST(CascadeParams, Validation) {
  EXPECT_NO_THROW((CascadeParams{0.0, 1}.validate()));
  EXPECT_THROW((CascadeParams{-0.1, 1}.validate()), std::invalid_argument);
  EXPECT_THROW((CascadeParams{std::nan(""), 1}.validate()), std::invalid_argument);
  EXPECT_THROW((CascadeParams{INFINITY, 1}.validate()), std::invalid_argument);
}

TEST(ClockSource, ConstantModeIsExact) {
  const auto c = ClockSource::constant(0.75);
  const Substream s(1, 2);
  for (std::uint64_t v = 1; v < 100; ++v) EXPECT_EQ(c.draw(s, v), 0.75);
  EXPECT_THROW(ClockSource::constant(0.0), std::invalid_argument);
  EXPECT_THROW(ClockSource::constant(-1.0), std::invalid_argument);
}

TEST(DeriveStream, DependsOnlyOnSeedAndIndex) {
  const CascadeParams p{1.5, 7};
  EXPECT_EQ(derive_stream(p, 3).bits(1), derive_stream({0.66, 7}, 3).bits(1));
  EXPECT_NE(derive_stream(p, 0).bits(1), derive_stream(p, 1).bits(1));
}

TEST(LeafCount, ZeroHorizonIsRootOnly) {
  for (const int depth : {0, 3, 10}) {
    const auto w = sample_truncated_leaf_count({1.5, 1}, 0.0, depth, kExp, Substream(1, 0));
    EXPECT_EQ(w.count, 1u);
    EXPECT_FALSE(w.truncated);
  }
}

TEST(LeafCount, ConstantClocksHandComputed) {
  // c = 1, alpha = 1, t = 2.5: root crosses (1 <= 2.5), children see 1.5 and
  // cross, grandchildren see 0.5 and are leaves: W = 4 from depth 2 on.
  const auto c = ClockSource::constant(1.0);
  const CascadeParams p{1.0, 0};
  const Substream s(0, 0);
  const auto w1 = sample_truncated_leaf_count(p, 2.5, 1, c, s);
  EXPECT_EQ(w1.count, 0u);
  EXPECT_TRUE(w1.truncated);
  for (const int depth : {2, 3, 20}) {
    const auto w = sample_truncated_leaf_count(p, 2.5, depth, c, s);
    EXPECT_EQ(w.count, 4u);
    EXPECT_FALSE(w.truncated);
  }
  // t < c: the root is a leaf.
  EXPECT_EQ(sample_truncated_leaf_count(p, 0.5, 0, c, s).count, 1u);
}

TEST(LeafCount, AlphaZeroCollapsesToTwoLevels) {
  // alpha = 0: children get horizon 0, so W is 1 (root survives) or 2.
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const Substream s(3, i);
    const auto w = sample_truncated_leaf_count({0.0, 3}, 2.0, 5, kExp, s);
    EXPECT_EQ(w.count, s.exponential(1) > 2.0 ? 1u : 2u);
    EXPECT_FALSE(w.truncated);
  }
}

TEST(LeafCount, MatchesBruteForce) {
  for (const double alpha : {0.0, 0.66, 1.0, 1.5, 3.0}) {
    for (std::uint64_t i = 0; i < 300; ++i) {
      const Substream s(11, i);
      for (const int depth : {0, 4, 9}) {
        const auto fast = sample_truncated_leaf_count({alpha, 11}, 2.0, depth, kExp, s);
        const auto slow = brute_leaf_count(alpha, 2.0, depth, 1, kExp, s);
        ASSERT_EQ(fast.count, slow.count) << "alpha=" << alpha << " i=" << i;
        ASSERT_EQ(fast.truncated, slow.truncated) << "alpha=" << alpha << " i=" << i;
      }
    }
  }
}

TEST(LeafCount, CoupledMonotoneInDepthAndBounded) {
  for (const double alpha : {0.66, 1.5, 3.0}) {
    for (std::uint64_t i = 0; i < 500; ++i) {
      const Substream s(5, i);
      std::uint64_t previous = 0;
      for (int depth = 0; depth <= 14; ++depth) {
        const auto w = sample_truncated_leaf_count({alpha, 5}, 2.0, depth, kExp, s);
        ASSERT_LE(w.count, std::uint64_t{1} << depth);
        ASSERT_TRUE(w.count >= 1 || w.truncated);
        ASSERT_GE(w.count, previous);
        previous = w.count;
      }
    }
  }
}

TEST(LeafCount, UntruncatedCountsAreFinal) {
  for (std::uint64_t i = 0; i < 500; ++i) {
    const Substream s(6, i);
    const auto w = sample_truncated_leaf_count({1.5, 6}, 2.0, 8, kExp, s);
    if (!w.truncated) {
      EXPECT_EQ(sample_truncated_leaf_count({1.5, 6}, 2.0, 20, kExp, s).count, w.count);
    }
  }
}

TEST(LeafCount, RejectsBadArguments) {
  const Substream s(0, 0);
  EXPECT_THROW(sample_truncated_leaf_count({1.0, 0}, -1.0, 3, kExp, s), std::invalid_argument);
  EXPECT_THROW(sample_truncated_leaf_count({1.0, 0}, 1.0, -1, kExp, s), std::invalid_argument);
  EXPECT_THROW(sample_truncated_leaf_count({1.0, 0}, 1.0, kMaxDepth + 1, kExp, s),
               std::invalid_argument);
  EXPECT_THROW(sample_truncated_leaf_count({-1.0, 0}, 1.0, 3, kExp, s), std::invalid_argument);
}

TEST(PathExtrema, MatchBruteForce) {
  for (const double alpha : {0.66, 1.0, 1.5, 3.0}) {
    for (std::uint64_t i = 0; i < 100; ++i) {
      const Substream s(2, i);
      for (const int depth : {0, 1, 6, 10}) {
        std::vector<double> sums;
        brute_paths(alpha, depth, 0, 1, 0.0, s, sums);
        const auto p = sample_path_extrema({alpha, 2}, depth, kExp, s);
        ASSERT_DOUBLE_EQ(p.s_partial, *std::min_element(sums.begin(), sums.end()));
        ASSERT_DOUBLE_EQ(p.l_partial, *std::max_element(sums.begin(), sums.end()));
        ASSERT_EQ(p.depth, depth);
      }
    }
  }
}

TEST(PathExtrema, ConstantClocksGeometricSum) {
  const auto c = ClockSource::constant(2.0);
  const auto p = sample_path_extrema({2.0, 0}, 3, c, Substream(0, 0));
  EXPECT_DOUBLE_EQ(p.s_partial, 2.0 * (1 + 0.5 + 0.25 + 0.125));
  EXPECT_DOUBLE_EQ(p.l_partial, p.s_partial);
}

TEST(PathExtrema, StrictlyIncreasingInDepthAndOrdered) {
  for (std::uint64_t i = 0; i < 300; ++i) {
    const Substream s(4, i);
    double s_prev = 0.0;
    double l_prev = 0.0;
    for (int depth = 0; depth <= 16; ++depth) {
      const auto p = sample_path_extrema({1.5, 4}, depth, kExp, s);
      ASSERT_LE(p.s_partial, p.l_partial);
      ASSERT_GT(p.s_partial, s_prev);
      ASSERT_GT(p.l_partial, l_prev);
      s_prev = p.s_partial;
      l_prev = p.l_partial;
    }
  }
}

TEST(PathExtrema, RejectAlphaZero) {
  EXPECT_THROW(sample_path_extrema({0.0, 0}, 3, kExp, Substream(0, 0)), std::invalid_argument);
  EXPECT_THROW(longest_path_exceeds({0.0, 0}, 1.0, 3, kExp, Substream(0, 0)),
               std::invalid_argument);
}

TEST(PathTail, IndicatorsAgreeWithExtrema) {
  for (const double alpha : {0.66, 1.5, 3.0}) {
    for (std::uint64_t i = 0; i < 200; ++i) {
      const Substream s(9, i);
      for (const int depth : {0, 5, 12}) {
        const auto p = sample_path_extrema({alpha, 9}, depth, kExp, s);
        for (const double t : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0}) {
          ASSERT_EQ(longest_path_exceeds({alpha, 9}, t, depth, kExp, s), p.l_partial > t);
          ASSERT_EQ(shortest_path_exceeds({alpha, 9}, t, depth, kExp, s), p.s_partial > t);
        }
      }
    }
  }
}

TEST(PathTail, DeepLongestPathAtSmallAlphaExceeds) {
  // alpha = 0.66 at depth 30: the weights grow like 1.5^j, every path is huge.
  for (std::uint64_t i = 0; i < 100; ++i) {
    EXPECT_TRUE(shortest_path_exceeds({0.66, 1}, 2.0, 30, kExp, Substream(1, i)));
  }
}

TEST(ProductIndicator, ZeroHorizonIsOne) {
  const InitialProcess half = [](double) { return 0.5; };
  for (const int n : {0, 1, 5}) {
    EXPECT_EQ(sample_product_indicator({1.5, 0}, 0.0, n, half, kExp, Substream(0, 1)),
              n == 0 ? 0.5 : 1.0);
  }
}

TEST(ProductIndicator, OnesAbsorb) {
  const InitialProcess one = [](double) { return 1.0; };
  for (std::uint64_t i = 0; i < 200; ++i) {
    EXPECT_EQ(sample_product_indicator({1.5, 0}, 3.0, 6, one, kExp, Substream(0, i)), 1.0);
  }
}

TEST(ProductIndicator, MatchesBruteForce) {
  const InitialProcess x0 = [](double t) { return std::exp(-0.3 * t); };
  for (const double alpha : {0.66, 1.5, 3.0}) {
    for (std::uint64_t i = 0; i < 300; ++i) {
      const Substream s(8, i);
      for (const int n : {1, 4, 8}) {
        ASSERT_DOUBLE_EQ(sample_product_indicator({alpha, 8}, 2.5, n, x0, kExp, s),
                         brute_product(alpha, 2.5, n, x0, 1, s));
      }
    }
  }
}

TEST(ProductIndicator, OneStepMeanIsSurvival) {
  // x0 = 0, n = 1: X = 1{T > t}, mean e^{-t}.
  const InitialProcess zero = [](double) { return 0.0; };
  constexpr int kSamples = 10000;
  double sum = 0.0;
  for (int i = 0; i < kSamples; ++i) {
    sum += sample_product_indicator({1.5, 12}, 2.0, 1, zero, kExp, Substream(12, i));
  }
  const double p = std::exp(-2.0);
  EXPECT_LT(std::abs(sum / kSamples - p), 3.0 * std::sqrt(p * (1 - p) / kSamples));
}

TEST(ProductIndicator, ContractViolationOutsideUnitInterval) {
  const InitialProcess bad = [](double) { return 1.5; };
  const InitialProcess nan = [](double) { return std::nan(""); };
  // t large enough that the root crosses and x0 gets evaluated.
  EXPECT_THROW(sample_product_indicator({1.5, 0}, 1000.0, 1, bad, kExp, Substream(0, 0)),
               ContractViolation);
  EXPECT_THROW(sample_product_indicator({1.5, 0}, 1000.0, 1, nan, kExp, Substream(0, 0)),
               ContractViolation);
}

}  // namespace
}  // namespace riccati
