#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace riccati {

/// Resolves a worker-count hint: 0 means "all hardware threads".
unsigned resolve_workers(unsigned hint) noexcept;

/// Runs body(i) for i in [0, count) on up to `workers` threads using a static
/// contiguous partition. The first exception thrown by any body is rethrown.
void parallel_for(std::size_t count, unsigned workers,
                  const std::function<void(std::size_t)>& body);

/// Pairwise (cascade) summation; the result depends only on the input order.
double pairwise_sum(std::span<const double> values) noexcept;

}  // namespace riccati
