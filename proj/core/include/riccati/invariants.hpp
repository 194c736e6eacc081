#pragma once

// Self-checks run by `riccati check`: each module's properties evaluated on
// reduced sample counts.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "riccati/grid.hpp"

namespace riccati {

struct SuiteConfig {
  double alpha = 1.5;
  std::uint64_t seed = 0;
  std::size_t samples = 2000;
  unsigned workers = 1;
  double t_max = 8.0;
  double step = 0.01;
  int picard_k = 5;
  TailOptions tail;
};

struct InvariantResult {
  std::string module;
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<InvariantResult> run_invariant_suite(const SuiteConfig& cfg);

}  // namespace riccati
