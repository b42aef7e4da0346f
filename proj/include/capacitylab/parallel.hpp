#pragma once

#include <cstddef>
#include <functional>

namespace capacitylab {

// Worker count: hardware concurrency, capped by CAPACITYLAB_THREADS when set.
std::size_t worker_count();

/// Calls body(i) for every i in [0, n) on up to worker_count() threads.
/// Callers write results into slot i of a preallocated vector, so the
/// merged result does not depend on scheduling. Exceptions are rethrown
/// (the one from the smallest failing index).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace capacitylab
