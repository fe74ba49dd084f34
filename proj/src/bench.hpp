#pragma once

#include <string>
#include <vector>

namespace glim {

struct BenchResult {
    std::string op, preset;
    int iters = 0;
    double naive_med_ms = 0, naive_p10_ms = 0, naive_p90_ms = 0;
    double opt_med_ms = 0, opt_p10_ms = 0, opt_p90_ms = 0;
    double max_abs_diff = 0;  // optimized vs reference output
};

// ops: "gddw", "pwgroup", "stage", "model"
std::vector<std::string> bench_ops();
std::vector<std::string> bench_presets(const std::string& op);
BenchResult run_bench(const std::string& op, const std::string& preset, int iters, uint64_t seed);

}  // namespace glim
