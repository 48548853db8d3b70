#pragma once

#include <cstddef>
#include <functional>

namespace noilin {

/// Worker cap: NOILIN_THREADS when set to a positive integer, otherwise the
/// number of hardware threads (at least 1).
std::size_t worker_count();

/// Runs body(i) for i in [0, n) on up to worker_count() threads. Every index
/// runs exactly once; the first exception thrown by any worker is rethrown
/// after all workers have joined.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace noilin
