#pragma once

#include <cstddef>
#include <functional>

namespace rforge {

// Worker count from REALITY_FORGE_THREADS (0 or unset = hardware concurrency).
unsigned thread_count();

// Runs body(i) for i in [0, n). Each index is visited exactly once; callers
// write results into per-index slots so the outcome is schedule-independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace rforge
