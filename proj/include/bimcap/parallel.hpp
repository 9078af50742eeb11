#pragma once

#include <cstddef>
#include <functional>

namespace bimcap {

// Upper bound on worker threads; 0 selects the hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

// Calls fn(k) for every k in [0, n). Each index is visited exactly once, so callers that
// write only to slot k get results independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace bimcap
