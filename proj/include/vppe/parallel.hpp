#pragma once

#include <cstddef>
#include <functional>

namespace vppe {

// Number of worker threads used by library-level parallel loops (>= 1).
int thread_count();
// 0 restores the default (hardware concurrency).
void set_thread_count(int threads);

// Runs fn(b) for b in [0, num_blocks) on up to thread_count() threads. Work is
// partitioned into caller-defined blocks, so any reduction the caller performs
// over per-block results in block order is independent of the thread count.
// The exception from the lowest failing block is rethrown.
void parallel_for_blocks(std::size_t num_blocks, const std::function<void(std::size_t)>& fn);

}  // namespace vppe
