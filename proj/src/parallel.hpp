#pragma once

#include <cstdint>
#include <functional>

namespace glim {

void set_num_threads(int n);
int num_threads();

// Runs fn over [0, n) split into one contiguous chunk per worker. Each index is
// touched by exactly one worker and per-index work keeps its own accumulation
// order, so results are bit-identical for any thread count.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace glim
