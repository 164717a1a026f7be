#pragma once

#include <functional>

namespace maculab {

/// Runs fn(0..n-1) across up to n_threads workers with contiguous static
/// partitions. n_threads <= 1 (or 0 = auto) with a single core degenerates to
/// a serial loop. Callers own determinism: workers must write only to
/// per-index slots.
void parallel_for(int n, int n_threads, const std::function<void(int)>& fn);

int hardware_threads();

}  // namespace maculab
