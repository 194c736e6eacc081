#pragma once

// Samplers for the alpha-Riccati cascade: the binary tree in which the
// vertex at depth j carries the scaled clock alpha^{-j} T_v, T_v ~ Exp(1).
//
// Vertices are addressed by heap label (root 1, children 2v and 2v+1) and the
// clock of vertex v in sample i is draw v of substream (seed, i). Samplers
// therefore never share mutable state, and samplers run at different depths
// on the same substream see the same tree.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include "riccati/rng.hpp"

namespace riccati {

/// Largest supported truncation depth. Heap labels of depth-62 vertices
/// still fit in 64 bits, and so does 2^62.
inline constexpr int kMaxDepth = 62;

struct CascadeParams {
  double alpha = 1.0;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument unless alpha is finite and >= 0.
  void validate() const;
};

class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Where vertex clocks come from. `constant` is a deterministic test hook.
class ClockSource {
 public:
  static ClockSource exponential() noexcept { return ClockSource(0.0); }
  static ClockSource constant(double value);

  bool is_constant() const noexcept { return constant_ > 0.0; }

  double draw(const Substream& stream, std::uint64_t vertex) const noexcept {
    return is_constant() ? constant_ : stream.exponential(vertex);
  }

  /// No draw ever exceeds this value.
  double upper_bound() const noexcept {
    return is_constant() ? constant_ : Substream::kMaxExponential;
  }

 private:
  explicit ClockSource(double constant) noexcept : constant_(constant) {}
  double constant_;
};

struct LeafCountSample {
  std::uint64_t count = 0;
  // Some depth-`depth` vertex had not crossed the horizon, so W(t) may
  // exceed `count`.
  bool truncated = false;
};

struct PathExtrema {
  double s_partial = 0.0;
  double l_partial = 0.0;
  int depth = 0;
};

Substream derive_stream(const CascadeParams& params, std::uint64_t sample_index);

/// W_n(t): number of t-leaves of height <= depth.
LeafCountSample sample_truncated_leaf_count(const CascadeParams& params, double t,
                                            int depth, const ClockSource& clocks,
                                            const Substream& stream);

/// (S_n, L_n): min and max over all depth-n paths of sum_j alpha^{-j} T_{v|j}.
/// Requires alpha > 0.
PathExtrema sample_path_extrema(const CascadeParams& params, int depth,
                                const ClockSource& clocks, const Substream& stream);

/// Indicator of {L_depth > t}; agrees with sample_path_extrema(...).l_partial > t
/// but stops at the first crossing vertex.
bool longest_path_exceeds(const CascadeParams& params, double t, int depth,
                          const ClockSource& clocks, const Substream& stream);

/// Indicator of {S_depth > t}; agrees with sample_path_extrema(...).s_partial > t.
bool shortest_path_exceeds(const CascadeParams& params, double t, int depth,
                           const ClockSource& clocks, const Substream& stream);

using InitialProcess = std::function<double(double)>;

/// X_n(t) = 1 if T > t, else X_{n-1}(alpha(t-T)) X_{n-1}'(alpha(t-T)), with
/// X_0 = x0. Throws ContractViolation if x0 leaves [0, 1].
double sample_product_indicator(const CascadeParams& params, double t, int n,
                                const InitialProcess& x0, const ClockSource& clocks,
                                const Substream& stream);

}  // namespace riccati
