#include "bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "model.hpp"
#include "prng.hpp"

namespace glim {

namespace {

TensorF rand_tensor(Dims d, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
    TensorF t(d);
    for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const auto idx = static_cast<size_t>(std::llround(q * static_cast<double>(v.size() - 1)));
    return v[idx];
}

// Times fn under each path; fn must return the forward output so the two paths
// can be diffed. One warmup run per path before the timed iterations.
BenchResult time_both(const std::string& op, const std::string& preset, int iters,
                      const std::function<TensorF()>& fn) {
    if (iters < 1) fail(ErrCode::invalid_argument, "bench iters must be >= 1");
    const KernelPath prior = kernel_path();
    BenchResult res;
    res.op = op;
    res.preset = preset;
    res.iters = iters;
    TensorF out_naive, out_opt;
    for (KernelPath path : {KernelPath::naive, KernelPath::optimized}) {
        set_kernel_path(path);
        TensorF warm = fn();
        std::vector<double> ms;
        ms.reserve(static_cast<size_t>(iters));
        for (int i = 0; i < iters; ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            TensorF y = fn();
            const auto t1 = std::chrono::steady_clock::now();
            ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
            if (i == 0) (path == KernelPath::naive ? out_naive : out_opt) = std::move(y);
        }
        if (path == KernelPath::naive) {
            res.naive_med_ms = percentile(ms, 0.5);
            res.naive_p10_ms = percentile(ms, 0.1);
            res.naive_p90_ms = percentile(ms, 0.9);
        } else {
            res.opt_med_ms = percentile(ms, 0.5);
            res.opt_p10_ms = percentile(ms, 0.1);
            res.opt_p90_ms = percentile(ms, 0.9);
        }
        (void)warm;
    }
    set_kernel_path(prior);
    res.max_abs_diff = static_cast<double>(max_abs_diff(out_naive, out_opt));
    return res;
}

int preset_index(const std::string& op, const std::string& preset) {
    const auto names = bench_presets(op);
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == preset) return static_cast<int>(i);
    fail(ErrCode::invalid_argument, "unknown bench preset '" + preset + "' for op " + op);
}

}  // namespace

std::vector<std::string> bench_ops() { return {"gddw", "pwgroup", "stage", "model"}; }

std::vector<std::string> bench_presets(const std::string& op) {
    if (op == "gddw" || op == "pwgroup") return {"stage1", "stage2", "stage3", "stage4"};
    if (op == "stage") return {"stage1"};
    if (op == "model") return {"aiderv2"};
    fail(ErrCode::invalid_argument, "unknown bench op: " + op);
}

BenchResult run_bench(const std::string& op, const std::string& preset, int iters, uint64_t seed) {
    SplitMix64 rng(seed);
    const int idx = preset_index(op, preset);

    if (op == "gddw") {
        // Per-stage shapes of the flagship config at 224x224 input.
        static const Dims shapes[4] = {
            {1, 40, 56, 56}, {1, 80, 28, 28}, {1, 160, 14, 14}, {1, 240, 7, 7}};
        const std::vector<int> dil{1, 2, 2, 3};
        TensorF x = rand_tensor(shapes[idx], rng);
        TensorF w = rand_tensor({shapes[idx].c, 1, 3, 3}, rng);
        return time_both(op, preset, iters,
                         [&] { return grouped_dilated_dwconv(x, w, 4, dil); });
    }
    if (op == "pwgroup") {
        // Aggregator 1x1 shapes: mixed-concat input (2C), C/m groups, next width out.
        struct PW {
            Dims x;
            int cout, groups;
        };
        static const PW shapes[4] = {{{1, 80, 56, 56}, 80, 10},
                                     {{1, 160, 28, 28}, 160, 20},
                                     {{1, 320, 14, 14}, 240, 40},
                                     {{1, 480, 7, 7}, 240, 60}};
        const PW& s = shapes[idx];
        TensorF x = rand_tensor(s.x, rng);
        TensorF w = rand_tensor({s.cout, s.x.c / s.groups, 1, 1}, rng);
        return time_both(op, preset, iters, [&] { return grouped_pointwise(x, w, s.groups); });
    }
    if (op == "stage") {
        // Flagship stage 1 wired by hand, inference mode.
        const int C = 40, blocks = 4, m = 4, out_w = 80;
        const std::vector<int> dil{1, 2, 2, 3};
        TensorF x = rand_tensor({1, C, 56, 56}, rng);
        std::vector<TensorF> bw, bg, bb, brm, brv;
        for (int b = 0; b < blocks; ++b) {
            bw.push_back(rand_tensor({C, 1, 3, 3}, rng, -0.3, 0.3));
            bg.push_back(rand_tensor({1, C, 1, 1}, rng, 0.8, 1.2));
            bb.push_back(rand_tensor({1, C, 1, 1}, rng, -0.1, 0.1));
            brm.push_back(rand_tensor({1, C, 1, 1}, rng, -0.1, 0.1));
            brv.push_back(rand_tensor({1, C, 1, 1}, rng, 0.8, 1.2));
        }
        TensorF aw = rand_tensor({out_w, 2 * m, 1, 1}, rng, -0.3, 0.3);
        TensorF ag = rand_tensor({1, out_w, 1, 1}, rng, 0.8, 1.2);
        TensorF ab = rand_tensor({1, out_w, 1, 1}, rng, -0.1, 0.1);
        TensorF arm = rand_tensor({1, out_w, 1, 1}, rng, -0.1, 0.1);
        TensorF arv = rand_tensor({1, out_w, 1, 1}, rng, 0.8, 1.2);
        TensorF gg = rand_tensor({1, out_w, 1, 1}, rng, -0.2, 0.2);
        TensorF gb = rand_tensor({1, out_w, 1, 1}, rng, -0.2, 0.2);
        auto fwd = [&] {
            TensorF h = x;
            for (int b = 0; b < blocks; ++b) {
                BNRefs<float> bn{&bg[static_cast<size_t>(b)], &bb[static_cast<size_t>(b)],
                                 &brm[static_cast<size_t>(b)], &brv[static_cast<size_t>(b)]};
                h = gdblock_forward(h, bw[static_cast<size_t>(b)], bn, m, dil, Mode::infer);
            }
            BNRefs<float> abn{&ag, &ab, &arm, &arv};
            TensorF a = aggregator_forward(h, x, aw, abn, m, Mode::infer);
            return downsampler_forward(a, PoolKind::max, gg, gb);
        };
        return time_both(op, preset, iters, fwd);
    }
    // op == "model"
    Model<float> model = build_model<float>(preset_config("aiderv2"), seed);
    TensorF x = rand_tensor({1, 3, 224, 224}, rng, 0.0, 1.0);
    return time_both(op, preset, iters,
                     [&] { return model_forward(model, x, Mode::infer); });
}

}  // namespace glim
