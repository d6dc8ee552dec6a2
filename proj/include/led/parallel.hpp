#pragma once

#include <cstdint>
#include <functional>

namespace led::parallel {

// Number of worker threads currently in use (>= 1).
int threads();

// Resize the worker pool. n <= 0 selects the hardware default.
// Results of all library operations are independent of this setting:
// parallel tasks only ever write disjoint outputs, and reductions use
// fixed chunking that does not depend on the thread count.
void set_threads(int n);

// Invoke fn(i) for every i in [0, n). Tasks may run on any thread in any
// order; fn must not write state shared with another index.
void for_n(std::int64_t n, const std::function<void(std::int64_t)>& fn);

} // namespace led::parallel
