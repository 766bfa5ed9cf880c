// Minimal fork-join helper with a thread cap from SPHERE_MV_THREADS.

#pragma once

#include <cstddef>
#include <functional>

namespace sphere_mv {

/// SPHERE_MV_THREADS if set to a positive integer, else the hardware concurrency.
int thread_limit();

/// Runs body(i) for i in [0, count). Each index runs exactly once; callers
/// write results to per-index slots so the outcome does not depend on
/// scheduling. The first exception thrown by a worker is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body, int threads = 0);

}  // namespace sphere_mv
