#pragma once

#include <array>
#include <cstdint>

namespace riccati {

// Philox4x32-10 (Salmon, Moraes, Dror, Shaw; SC'11). Stateless: the output
// block is a pure function of (counter, key).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter counter, Key key) noexcept;
};

/// An addressable random substream.
///
/// Draw `i` of substream (seed, index) is Philox4x32-10 evaluated at counter
/// (index, i) under key `seed`. Nothing is consumed: any draw can be
/// recomputed in any order, from any thread, and always gives the same bits.
class Substream {
 public:
  Substream(std::uint64_t seed, std::uint64_t index) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t index() const noexcept { return index_; }

  std::uint64_t bits(std::uint64_t position) const noexcept;

  /// Uniform on the open interval (0, 1), 53 bits of resolution.
  double uniform(std::uint64_t position) const noexcept;

  /// Mean-one exponential, always in (0, kMaxExponential].
  double exponential(std::uint64_t position) const noexcept;

  /// Largest value `exponential` can return: -log(2^-54).
  static constexpr double kMaxExponential = 37.429947750237047;  // 54 ln 2

 private:
  std::uint64_t seed_;
  std::uint64_t index_;
};

}  // namespace riccati
