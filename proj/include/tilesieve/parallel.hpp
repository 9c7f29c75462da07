#pragma once

#include <cstddef>
#include <functional>

namespace tilesieve {

// Process-wide cap on worker threads (default 1). Every parallel loop writes
// to index-addressed slots only, so results never depend on this value.
void set_max_threads(int threads);
int max_threads();

// Runs body(i) for i in [0, n), statically partitioned across threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &body);

} // namespace tilesieve
