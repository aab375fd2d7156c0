#pragma once

#include <cstddef>
#include <functional>

namespace crysdiff {

/// Worker cap: CRYSDIFF_THREADS if set to a positive integer, otherwise the
/// hardware concurrency.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) over contiguous chunks. Callers write results to
/// per-index slots, so output never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace crysdiff
