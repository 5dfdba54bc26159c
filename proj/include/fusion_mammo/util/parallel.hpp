#pragma once

#include <cstddef>
#include <functional>

namespace fusion_mammo {

/// Number of workers used when callers pass 0.
std::size_t default_worker_count();

/// Runs fn(i) for i in [0, count) on at most `workers` threads with static
/// chunking. Callers write results into per-index slots so output never
/// depends on scheduling. The first exception thrown by any task is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                  std::size_t workers = 0);

}  // namespace fusion_mammo
