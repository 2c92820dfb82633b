#pragma once

#include <cstddef>
#include <functional>

namespace nnviz {

// Worker cap: NNVIZ_THREADS when set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t worker_count();

// Calls fn(i) for every i in [0, n) across up to worker_count() threads.
// Callers write results into per-index slots and reduce afterwards in index
// order, which keeps results independent of the thread count. The first
// exception thrown by any call is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace nnviz
