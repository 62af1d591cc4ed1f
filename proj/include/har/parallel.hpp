#pragma once

#include <cstddef>
#include <functional>

namespace har {

/// Worker cap: HAR_THREADS if set (>= 1), else hardware concurrency.
std::size_t thread_budget();

/// Runs body(i) for i in [0, n) on up to thread_budget() threads. Work is
/// split into contiguous ranges; callers write results by index so output
/// never depends on scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace har
