#ifndef BEAMKIT_PARALLEL_HPP
#define BEAMKIT_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace beamkit {

// Worker cap: BEAMKIT_THREADS when set, otherwise hardware concurrency.
unsigned max_threads();

// Runs fn(i) for i in [0, count). Jobs must be independent; results keyed by
// index stay deterministic regardless of schedule. Exceptions are collected
// and the first (lowest index) is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

} // namespace beamkit

#endif
