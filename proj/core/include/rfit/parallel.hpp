#pragma once

#include <cstddef>
#include <functional>

namespace rfit {

/// Number of worker threads to use when the caller asks for "all cores".
unsigned hardware_threads() noexcept;

/// Runs fn(i) for i in [0, count) on up to `threads` workers (0 = all cores).
/// Work items are claimed dynamically; callers must make each item's output
/// depend only on its index.  The first exception thrown by any item is
/// rethrown after all workers have stopped.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace rfit
