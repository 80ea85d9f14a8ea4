#pragma once

#include <cstddef>
#include <functional>

namespace mflab {

// Number of hardware threads, at least 1.
unsigned hardware_threads();

// Runs body(i) for i in [0, count) on `threads` workers (0 = all hardware
// threads). Work is handed out by index; if any call throws, the exception
// of the lowest failing index is rethrown after all workers have joined.
// Callers write results into per-index slots and reduce afterwards, which
// keeps results independent of the thread count.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace mflab
