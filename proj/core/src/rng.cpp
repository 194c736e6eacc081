#include "riccati/rng.hpp"

#include <cmath>

namespace riccati {
namespace {

constexpr std::uint32_t kPhiloxW32A = 0x9E3779B9;
constexpr std::uint32_t kPhiloxW32B = 0xBB67AE85;
constexpr std::uint32_t kPhiloxM4x32A = 0xD2511F53;
constexpr std::uint32_t kPhiloxM4x32B = 0xCD9E8D57;

inline void multiply_high_low(std::uint32_t a, std::uint32_t b,
                              std::uint32_t& lo, std::uint32_t& hi) noexcept {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(product);
  hi = static_cast<std::uint32_t>(product >> 32);
}

inline void philox_round(Philox4x32::Counter& ctr,
                         const Philox4x32::Key& key) noexcept {
  std::uint32_t lo0, hi0, lo1, hi1;
  multiply_high_low(kPhiloxM4x32A, ctr[0], lo0, hi0);
  multiply_high_low(kPhiloxM4x32B, ctr[2], lo1, hi1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter counter, Key key) noexcept {
  for (int round = 0; round < 10; ++round) {
    philox_round(counter, key);
    key[0] += kPhiloxW32A;
    key[1] += kPhiloxW32B;
  }
  return counter;
}

Substream::Substream(std::uint64_t seed, std::uint64_t index) noexcept
    : seed_(seed), index_(index) {}

std::uint64_t Substream::bits(std::uint64_t position) const noexcept {
  const Philox4x32::Counter counter = {
      static_cast<std::uint32_t>(index_), static_cast<std::uint32_t>(index_ >> 32),
      static_cast<std::uint32_t>(position),
      static_cast<std::uint32_t>(position >> 32)};
  const Philox4x32::Key key = {static_cast<std::uint32_t>(seed_),
                               static_cast<std::uint32_t>(seed_ >> 32)};
  const auto out = Philox4x32::generate(counter, key);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

double Substream::uniform(std::uint64_t position) const noexcept {
  // (k + 1/2) 2^-53 for k in [0, 2^53): never 0, never 1.
  const std::uint64_t k = bits(position) >> 11;
  return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

double Substream::exponential(std::uint64_t position) const noexcept {
  return -std::log(uniform(position));
}

}  // namespace riccati
