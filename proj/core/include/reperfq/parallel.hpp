#pragma once

#include <cstddef>
#include <functional>

namespace reperfq {

/// Worker cap: REPERFQ_THREADS when set (minimum 1), else the hardware
/// concurrency.
unsigned worker_count();

/// Runs fn(0..n-1) across up to worker_count() threads. Results must be
/// written to per-index slots; the schedule is not deterministic but the
/// output is. Exceptions from workers are rethrown on the calling thread.
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

}  // namespace reperfq
