#pragma once

#include <cstddef>
#include <functional>

namespace n2c {

// Number of worker threads: N2C_THREADS if set and positive, else all cores.
int thread_count();

// Runs fn(i) for i in [0, n). Work is split into chunks whose layout depends
// only on n, so any code that writes disjoint outputs per index (or per-chunk
// partials reduced afterwards in index order) is bit-stable for every thread
// count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace n2c
