#pragma once

#include <cstddef>
#include <functional>

namespace rclab::num {

// Worker cap: RCLAB_THREADS when set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t worker_count();

// Runs fn(i) for i in [0, n) across up to worker_count() threads. Items must
// be independent; the first exception thrown by any item is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace rclab::num
