#pragma once

#include <cstddef>
#include <functional>

namespace tumorscope {

// Worker count: TUMORSCOPE_THREADS when set to a positive integer, otherwise
// the hardware concurrency (at least 1).
std::size_t worker_count();

// Runs fn(i) for i in [0, n) on up to worker_count() threads. Work items must
// be independent; callers that reduce results do so afterwards in index
// order, so outputs do not depend on the thread count. The first exception
// thrown by any item is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace tumorscope
