#pragma once

#include <cstddef>
#include <functional>

namespace telic {

/// Worker count: TELIC_THREADS when set to a positive integer, otherwise the
/// hardware concurrency.
std::size_t thread_count();

/// Runs body(i) for i in [0, n). Each index is handled exactly once; callers
/// write results by index so output order never depends on scheduling. The
/// first exception thrown by any body is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace telic
