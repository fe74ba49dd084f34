#include "parallel.hpp"

#include <algorithm>
#include <thread>
#include <vector>

#include "tensor.hpp"

namespace glim {

namespace {
int g_threads = 1;
}

void set_num_threads(int n) {
    if (n < 1) fail(ErrCode::invalid_argument, "set_num_threads: n must be >= 1");
    g_threads = n;
}

int num_threads() { return g_threads; }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    const int workers = static_cast<int>(std::min<int64_t>(g_threads, n));
    if (workers == 1) {
        fn(0, n);
        return;
    }
    const int64_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        const int64_t lo = w * chunk;
        const int64_t hi = std::min<int64_t>(lo + chunk, n);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace glim
