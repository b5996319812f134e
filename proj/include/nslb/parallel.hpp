#pragma once

#include <cstddef>
#include <functional>

namespace nslb {

// Worker count: NSLB_THREADS if set and positive, else hardware concurrency.
int thread_cap();

// Runs body(i) for i in [0, count) on up to thread_cap() threads. Each index is
// visited exactly once, so results written per index are deterministic.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace nslb
