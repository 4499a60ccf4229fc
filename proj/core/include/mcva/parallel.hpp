#pragma once

#include <cstdint>
#include <functional>

namespace mcva {

// Worker count used by parallel_for. 0 = hardware concurrency.
void set_num_threads(int n);
int num_threads();

// Runs fn(begin, end) over contiguous chunks of [begin, end) on the shared
// pool. Callers must only write disjoint output ranges per index; reductions
// that need a fixed order are the caller's responsibility (accumulate into
// per-chunk buffers and combine in chunk order). Nested calls run inline.
void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

} // namespace mcva
