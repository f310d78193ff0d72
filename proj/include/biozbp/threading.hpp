#pragma once

#include <cstddef>
#include <functional>

namespace biozbp {

// Process-wide worker count used by parallel loops. 0 = hardware concurrency.
void set_thread_count(int n);
int thread_count();

// Runs fn(i) for i in [0, n) on contiguous index chunks. Workers write to
// disjoint output slots, so results are deterministic regardless of
// scheduling. Exceptions propagate to the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace biozbp
