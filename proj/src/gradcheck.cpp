#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <utility>

#include "model.hpp"
#include "prng.hpp"

namespace glim {

namespace {

TensorD rand_tensor(Dims d, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
    TensorD t(d);
    for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(lo, hi);
    return t;
}

double proj(const TensorD& y, const TensorD& r) {
    if (!(y.dims() == r.dims())) fail(ErrCode::check_failed, "projection shape mismatch");
    double s = 0;
    for (int64_t i = 0; i < y.numel(); ++i) s += y.data()[i] * r.data()[i];
    return s;
}

struct Target {
    std::string label;
    TensorD* value;
    const TensorD* analytic;
};

// Central differences against the analytic gradient captured at the base point.
// Coordinates are skipped when both sides are ~0 (the relative error is
// meaningless there, e.g. inactive relu6 taps).
void run_case(std::vector<GradCheckCase>& out, const std::string& name,
              const std::function<double()>& loss, const std::vector<Target>& targets,
              SplitMix64& rng) {
    GradCheckCase c;
    c.name = name;
    for (const Target& tg : targets) {
        const int64_t n = tg.value->numel();
        if (tg.analytic->numel() != n) fail(ErrCode::check_failed, name + ": gradient shape mismatch");
        std::vector<int64_t> coords;
        if (n <= 64) {
            coords.resize(static_cast<size_t>(n));
            std::iota(coords.begin(), coords.end(), 0);
        } else {
            for (int i = 0; i < 64; ++i)
                coords.push_back(static_cast<int64_t>(rng.below(static_cast<uint64_t>(n))));
        }
        for (int64_t i : coords) {
            double* p = tg.value->data() + i;
            const double saved = *p;
            auto central = [&](double h) {
                *p = saved + h;
                const double lp = loss();
                *p = saved - h;
                const double lm = loss();
                *p = saved;
                return (lp - lm) / (2 * h);
            };
            auto relerr = [](double a, double b) {
                return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
            };
            const double num = central(kGradEps);
            const double ana = tg.analytic->data()[i];
            ++c.coords;
            double rel;
            if (!std::isfinite(num) || !std::isfinite(ana))
                rel = std::numeric_limits<double>::infinity();
            else if (std::abs(ana) + std::abs(num) < 1e-8)
                continue;
            else
                rel = relerr(ana, num);
            if (rel >= kGradTol && std::isfinite(num)) {
                // A near-zero gradient cannot be resolved by differencing an
                // O(1) loss; below the noise floor the comparison says nothing.
                if (std::abs(ana - num) < kGradAbsTol) continue;
                // Retry at half step. A step that straddled a kink (relu6,
                // pooling argmax, norm at zero) gives inconsistent estimates;
                // a wrong analytic gradient reproduces at any step size.
                const double num2 = central(kGradEps / 2);
                const double rel2 = relerr(ana, num2);
                if (rel2 < kGradTol)
                    rel = rel2;
                else if (std::abs(ana - num2) < kGradAbsTol || relerr(num, num2) > kGradTol)
                    continue;
                else
                    rel = rel2;
            }
            if (rel > c.max_rel_err) {
                c.max_rel_err = rel;
                c.worst = tg.label + "[" + std::to_string(i) + "]";
            }
        }
    }
    c.pass = c.max_rel_err < kGradTol;
    out.push_back(std::move(c));
}

// relu6 is non-differentiable at 0 and 6; keep samples clear of both kinks.
void nudge_off_kinks(TensorD& x) {
    for (int64_t i = 0; i < x.numel(); ++i) {
        double& v = x.data()[i];
        if (std::abs(v) < 1e-3) v = v < 0 ? -1e-3 : 1e-3;
        if (std::abs(v - 6.0) < 1e-3) v = v < 6.0 ? 6.0 - 1e-3 : 6.0 + 1e-3;
    }
}

TensorD rand_gamma(int c, SplitMix64& rng) { return rand_tensor({1, c, 1, 1}, rng, 0.5, 1.5); }
TensorD rand_beta(int c, SplitMix64& rng) { return rand_tensor({1, c, 1, 1}, rng, -0.5, 0.5); }

void kernel_cases(std::vector<GradCheckCase>& out, SplitMix64& rng) {
    {
        TensorD x = rand_tensor({2, 3, 7, 7}, rng);
        TensorD w = rand_tensor({4, 3, 3, 3}, rng);
        ConvSpec s;
        s.stride = 2;
        s.pad_h = s.pad_w = 1;
        TensorD r = rand_tensor(conv2d(x, w, s).dims(), rng);
        TensorD gx, gw;
        conv2d_bwd(x, w, s, r, &gx, &gw);
        run_case(out, "kernels.conv2d_s2p1", [&] { return proj(conv2d(x, w, s), r); },
                 {{"x", &x, &gx}, {"w", &w, &gw}}, rng);
    }
    {
        TensorD x = rand_tensor({1, 2, 5, 6}, rng);
        TensorD w = rand_tensor({3, 2, 3, 3}, rng);
        ConvSpec s;
        s.pad_h = s.pad_w = 1;
        TensorD r = rand_tensor(conv2d(x, w, s).dims(), rng);
        TensorD gx, gw;
        conv2d_bwd(x, w, s, r, &gx, &gw);
        run_case(out, "kernels.conv2d_s1p1", [&] { return proj(conv2d(x, w, s), r); },
                 {{"x", &x, &gx}, {"w", &w, &gw}}, rng);
    }
    {
        TensorD x = rand_tensor({2, 4, 6, 6}, rng);
        TensorD w = rand_tensor({4, 1, 3, 3}, rng);
        ConvSpec s;
        s.dilation = 2;
        s.pad_h = s.pad_w = 2;
        TensorD r = rand_tensor(dwconv2d(x, w, s).dims(), rng);
        TensorD gx, gw;
        dwconv2d_bwd(x, w, s, r, &gx, &gw);
        run_case(out, "kernels.dwconv2d_d2", [&] { return proj(dwconv2d(x, w, s), r); },
                 {{"x", &x, &gx}, {"w", &w, &gw}}, rng);
    }
    {
        TensorD x = rand_tensor({1, 3, 7, 7}, rng);
        TensorD w = rand_tensor({3, 1, 3, 3}, rng);
        ConvSpec s;
        s.stride = 2;
        s.pad_h = s.pad_w = 1;
        TensorD r = rand_tensor(dwconv2d(x, w, s).dims(), rng);
        TensorD gx, gw;
        dwconv2d_bwd(x, w, s, r, &gx, &gw);
        run_case(out, "kernels.dwconv2d_s2", [&] { return proj(dwconv2d(x, w, s), r); },
                 {{"x", &x, &gx}, {"w", &w, &gw}}, rng);
    }
    {
        TensorD x = rand_tensor({1, 6, 5, 5}, rng);
        TensorD w = rand_tensor({6, 1, 3, 3}, rng);
        const std::vector<int> dil{1, 3};
        TensorD r = rand_tensor(grouped_dilated_dwconv(x, w, 2, dil).dims(), rng);
        TensorD gx, gw;
        grouped_dilated_dwconv_bwd(x, w, 2, dil, r, &gx, &gw);
        run_case(out, "kernels.gddw_m2", [&] { return proj(grouped_dilated_dwconv(x, w, 2, dil), r); },
                 {{"x", &x, &gx}, {"w", &w, &gw}}, rng);
    }
    {
        TensorD x = rand_tensor({2, 6, 4, 4}, rng);
        TensorD w = rand_tensor({8, 3, 1, 1}, rng);
        TensorD r = rand_tensor(grouped_pointwise(x, w, 2).dims(), rng);
        TensorD gx, gw;
        grouped_pointwise_bwd(x, w, 2, r, &gx, &gw);
        run_case(out, "kernels.grouped_pw", [&] { return proj(grouped_pointwise(x, w, 2), r); },
                 {{"x", &x, &gx}, {"w", &w, &gw}}, rng);
    }
    {
        TensorD x = rand_tensor({2, 3, 4, 4}, rng, -3.0, 9.0);
        nudge_off_kinks(x);
        TensorD r = rand_tensor(x.dims(), rng);
        TensorD gx = relu6_bwd(x, r);
        run_case(out, "kernels.relu6", [&] { return proj(relu6(x), r); }, {{"x", &x, &gx}}, rng);
    }
    {
        TensorD x = rand_tensor({2, 3, 6, 6}, rng);
        PoolCache cache;
        TensorD y = pool2d(x, PoolKind::max, 2, 2, &cache);
        TensorD r = rand_tensor(y.dims(), rng);
        TensorD gx = pool2d_bwd<double>(x.dims(), PoolKind::max, 2, 2, cache, r);
        run_case(out, "kernels.maxpool", [&] { return proj(pool2d(x, PoolKind::max, 2, 2), r); },
                 {{"x", &x, &gx}}, rng);
    }
    {
        TensorD x = rand_tensor({1, 4, 6, 6}, rng);
        PoolCache cache;
        TensorD y = pool2d(x, PoolKind::avg, 2, 2, &cache);
        TensorD r = rand_tensor(y.dims(), rng);
        TensorD gx = pool2d_bwd<double>(x.dims(), PoolKind::avg, 2, 2, cache, r);
        run_case(out, "kernels.avgpool", [&] { return proj(pool2d(x, PoolKind::avg, 2, 2), r); },
                 {{"x", &x, &gx}}, rng);
    }
    {
        TensorD x = rand_tensor({2, 5, 3, 4}, rng);
        TensorD r = rand_tensor(global_avg_pool(x).dims(), rng);
        TensorD gx = global_avg_pool_bwd<double>(x.dims(), r);
        run_case(out, "kernels.global_avg_pool", [&] { return proj(global_avg_pool(x), r); },
                 {{"x", &x, &gx}}, rng);
    }
    {
        TensorD x = rand_tensor({3, 4, 5, 5}, rng, -2.0, 2.0);
        TensorD gamma = rand_gamma(4, rng), beta = rand_beta(4, rng);
        BNCache<double> cache;
        batchnorm_train<double>(x, gamma, beta, nullptr, nullptr, kBNMomentum, kBNEps, &cache);
        TensorD r = rand_tensor(x.dims(), rng);
        TensorD gx, ggamma, gbeta;
        batchnorm_bwd(cache, gamma, r, &gx, &ggamma, &gbeta);
        auto loss = [&] {
            return proj(batchnorm_train<double>(x, gamma, beta, nullptr, nullptr, kBNMomentum,
                                                kBNEps, nullptr),
                        r);
        };
        run_case(out, "kernels.batchnorm", loss,
                 {{"x", &x, &gx}, {"gamma", &gamma, &ggamma}, {"beta", &beta, &gbeta}}, rng);
    }
    {
        TensorD x = rand_tensor({2, 4, 3, 3}, rng);
        TensorD gamma = rand_gamma(4, rng), beta = rand_beta(4, rng);
        GRNCache<double> cache;
        grn<double>(x, gamma, beta, kGRNEps, &cache);
        TensorD r = rand_tensor(x.dims(), rng);
        TensorD gx, ggamma, gbeta;
        grn_bwd(cache, gamma, r, &gx, &ggamma, &gbeta);
        auto loss = [&] { return proj(grn<double>(x, gamma, beta, kGRNEps, nullptr), r); };
        run_case(out, "kernels.grn", loss, {{"x", &x, &gx}, {"gamma", &gamma, &ggamma}, {"beta", &beta, &gbeta}}, rng);
    }
    {
        TensorD x = rand_tensor({3, 5, 1, 1}, rng);
        TensorD w = rand_tensor({4, 5, 1, 1}, rng);
        TensorD b = rand_tensor({1, 4, 1, 1}, rng);
        TensorD r = rand_tensor(linear(x, w, b).dims(), rng);
        TensorD gx, gw, gb;
        linear_bwd(x, w, r, &gx, &gw, &gb);
        run_case(out, "kernels.linear", [&] { return proj(linear(x, w, b), r); },
                 {{"x", &x, &gx}, {"w", &w, &gw}, {"b", &b, &gb}}, rng);
    }
    {
        TensorD logits = rand_tensor({3, 4, 1, 1}, rng, -2.0, 2.0);
        const std::vector<int> labels{0, 2, 3};
        TensorD probs;
        softmax_cross_entropy(logits, labels, &probs);
        TensorD g = softmax_cross_entropy_bwd(probs, labels);
        run_case(out, "kernels.softmax_ce",
                 [&] { return softmax_cross_entropy(logits, labels); }, {{"logits", &logits, &g}}, rng);
    }
}

void block_cases(std::vector<GradCheckCase>& out, SplitMix64& rng) {
    const Mode mode = Mode::train_frozen_stats;
    {
        TensorD x = rand_tensor({2, 6, 5, 5}, rng);
        TensorD w = rand_tensor({6, 1, 3, 3}, rng);
        TensorD gamma = rand_gamma(6, rng), beta = rand_beta(6, rng);
        BNRefs<double> bn{&gamma, &beta, nullptr, nullptr};
        const std::vector<int> dil{1, 2};
        GDBlockCache<double> cache;
        TensorD y = gdblock_forward(x, w, bn, 2, dil, mode, &cache);
        TensorD r = rand_tensor(y.dims(), rng);
        TensorD gw, ggamma, gbeta;
        TensorD gx = gdblock_backward(cache, w, bn, 2, dil, r, &gw, &ggamma, &gbeta);
        auto loss = [&] { return proj(gdblock_forward(x, w, bn, 2, dil, mode), r); };
        run_case(out, "blocks.gdblock", loss,
                 {{"x", &x, &gx}, {"w", &w, &gw}, {"gamma", &gamma, &ggamma}, {"beta", &beta, &gbeta}}, rng);
    }
    {
        TensorD gd = rand_tensor({2, 6, 4, 4}, rng);
        TensorD sin = rand_tensor({2, 6, 4, 4}, rng);
        TensorD w = rand_tensor({6, 4, 1, 1}, rng);
        TensorD gamma = rand_gamma(6, rng), beta = rand_beta(6, rng);
        BNRefs<double> bn{&gamma, &beta, nullptr, nullptr};
        AggregatorCache<double> cache;
        TensorD y = aggregator_forward(gd, sin, w, bn, 2, mode, &cache);
        TensorD r = rand_tensor(y.dims(), rng);
        TensorD g_gd, g_sin, gw, ggamma, gbeta;
        aggregator_backward(cache, w, bn, 2, r, &g_gd, &g_sin, &gw, &ggamma, &gbeta);
        auto loss = [&] { return proj(aggregator_forward(gd, sin, w, bn, 2, mode), r); };
        run_case(out, "blocks.aggregator", loss,
                 {{"gd_out", &gd, &g_gd}, {"stage_in", &sin, &g_sin}, {"w", &w, &gw}, {"gamma", &gamma, &ggamma}, {"beta", &beta, &gbeta}}, rng);
    }
    {
        TensorD x = rand_tensor({1, 4, 6, 6}, rng);
        TensorD gamma = rand_gamma(4, rng), beta = rand_beta(4, rng);
        DownsamplerCache<double> cache;
        TensorD y = downsampler_forward(x, PoolKind::max, gamma, beta, &cache);
        TensorD r = rand_tensor(y.dims(), rng);
        TensorD ggamma, gbeta;
        TensorD gx = downsampler_backward(cache, PoolKind::max, gamma, r, &ggamma, &gbeta);
        auto loss = [&] { return proj(downsampler_forward(x, PoolKind::max, gamma, beta), r); };
        run_case(out, "blocks.downsampler_even", loss,
                 {{"x", &x, &gx}, {"gamma", &gamma, &ggamma}, {"beta", &beta, &gbeta}}, rng);
    }
    {
        // Odd extent: the pool is skipped and only GRN applies.
        TensorD x = rand_tensor({1, 3, 5, 5}, rng);
        TensorD gamma = rand_gamma(3, rng), beta = rand_beta(3, rng);
        DownsamplerCache<double> cache;
        TensorD y = downsampler_forward(x, PoolKind::avg, gamma, beta, &cache);
        if (!(y.dims() == x.dims())) fail(ErrCode::check_failed, "downsampler should skip odd pool");
        TensorD r = rand_tensor(y.dims(), rng);
        TensorD ggamma, gbeta;
        TensorD gx = downsampler_backward(cache, PoolKind::avg, gamma, r, &ggamma, &gbeta);
        auto loss = [&] { return proj(downsampler_forward(x, PoolKind::avg, gamma, beta), r); };
        run_case(out, "blocks.downsampler_odd_skip", loss,
                 {{"x", &x, &gx}, {"gamma", &gamma, &ggamma}, {"beta", &beta, &gbeta}}, rng);
    }
    {
        TensorD x = rand_tensor({2, 3, 9, 9}, rng);
        TensorD conv_w = rand_tensor({5, 3, 3, 3}, rng);
        TensorD g1 = rand_gamma(5, rng), b1 = rand_beta(5, rng);
        TensorD dw_w = rand_tensor({5, 1, 3, 3}, rng);
        TensorD g2 = rand_gamma(5, rng), b2 = rand_beta(5, rng);
        BNRefs<double> bn1{&g1, &b1, nullptr, nullptr}, bn2{&g2, &b2, nullptr, nullptr};
        StemCache<double> cache;
        TensorD y = stem_forward(x, conv_w, bn1, dw_w, bn2, mode, &cache);
        TensorD r = rand_tensor(y.dims(), rng);
        TensorD gcw, gg1, gb1, gdw, gg2, gb2;
        TensorD gx = stem_backward(cache, conv_w, bn1, dw_w, bn2, r, &gcw, &gg1, &gb1, &gdw, &gg2, &gb2);
        auto loss = [&] { return proj(stem_forward(x, conv_w, bn1, dw_w, bn2, mode), r); };
        run_case(out, "blocks.stem", loss,
                 {{"x", &x, &gx},
                  {"conv_w", &conv_w, &gcw},
                  {"bn1.gamma", &g1, &gg1},
                  {"bn1.beta", &b1, &gb1},
                  {"dw_w", &dw_w, &gdw},
                  {"bn2.gamma", &g2, &gg2},
                  {"bn2.beta", &b2, &gb2}},
                 rng);
    }
    {
        TensorD x = rand_tensor({2, 4, 5, 5}, rng);
        TensorD dw_w = rand_tensor({4, 1, 3, 3}, rng);
        TensorD gamma = rand_gamma(4, rng), beta = rand_beta(4, rng);
        BNRefs<double> bn{&gamma, &beta, nullptr, nullptr};
        RefinerCache<double> cache;
        TensorD y = refiner_forward(x, dw_w, bn, mode, &cache);
        TensorD r = rand_tensor(y.dims(), rng);
        TensorD gdw, ggamma, gbeta;
        TensorD gx = refiner_backward(cache, dw_w, bn, r, &gdw, &ggamma, &gbeta);
        auto loss = [&] { return proj(refiner_forward(x, dw_w, bn, mode), r); };
        run_case(out, "blocks.refiner", loss,
                 {{"x", &x, &gx}, {"dw_w", &dw_w, &gdw}, {"gamma", &gamma, &ggamma}, {"beta", &beta, &gbeta}}, rng);
    }
    {
        TensorD x = rand_tensor({2, 6, 3, 3}, rng);
        TensorD fc_w = rand_tensor({3, 6, 1, 1}, rng);
        TensorD fc_b = rand_tensor({1, 3, 1, 1}, rng);
        HeadCache<double> cache;
        TensorD y = head_forward(x, fc_w, fc_b, &cache);
        TensorD r = rand_tensor(y.dims(), rng);
        TensorD gw, gb;
        TensorD gx = head_backward(cache, fc_w, r, &gw, &gb);
        auto loss = [&] { return proj(head_forward(x, fc_w, fc_b), r); };
        run_case(out, "blocks.head", loss, {{"x", &x, &gx}, {"fc_w", &fc_w, &gw}, {"fc_b", &fc_b, &gb}}, rng);
    }
    {
        // Full stage wired by hand: two blocks -> aggregator (fed by both the last
        // block and the stage input) -> downsampler. Exercises the gradient split
        // at the stage entry.
        const std::vector<int> dil{1, 2};
        TensorD x = rand_tensor({1, 6, 6, 6}, rng);
        TensorD w1 = rand_tensor({6, 1, 3, 3}, rng);
        TensorD w2 = rand_tensor({6, 1, 3, 3}, rng);
        TensorD bg1 = rand_gamma(6, rng), bb1 = rand_beta(6, rng);
        TensorD bg2 = rand_gamma(6, rng), bb2 = rand_beta(6, rng);
        TensorD aw = rand_tensor({12, 4, 1, 1}, rng);
        TensorD ag = rand_gamma(12, rng), ab = rand_beta(12, rng);
        TensorD gg = rand_gamma(12, rng), gb = rand_beta(12, rng);
        BNRefs<double> bn1{&bg1, &bb1, nullptr, nullptr}, bn2{&bg2, &bb2, nullptr, nullptr},
            abn{&ag, &ab, nullptr, nullptr};
        auto fwd = [&](GDBlockCache<double>* c1, GDBlockCache<double>* c2,
                       AggregatorCache<double>* ca, DownsamplerCache<double>* cd) {
            TensorD h1 = gdblock_forward(x, w1, bn1, 2, dil, mode, c1);
            TensorD h2 = gdblock_forward(h1, w2, bn2, 2, dil, mode, c2);
            TensorD a = aggregator_forward(h2, x, aw, abn, 2, mode, ca);
            return downsampler_forward(a, PoolKind::max, gg, gb, cd);
        };
        GDBlockCache<double> c1, c2;
        AggregatorCache<double> ca;
        DownsamplerCache<double> cd;
        TensorD y = fwd(&c1, &c2, &ca, &cd);
        TensorD r = rand_tensor(y.dims(), rng);
        TensorD g_gg, g_gb;
        TensorD g = downsampler_backward(cd, PoolKind::max, gg, r, &g_gg, &g_gb);
        TensorD g_gd, g_sin, gaw, gag, gab;
        aggregator_backward(ca, aw, abn, 2, g, &g_gd, &g_sin, &gaw, &gag, &gab);
        TensorD gw2, gbg2, gbb2;
        TensorD gh1 = gdblock_backward(c2, w2, bn2, 2, dil, g_gd, &gw2, &gbg2, &gbb2);
        TensorD gw1, gbg1, gbb1;
        TensorD gx = gdblock_backward(c1, w1, bn1, 2, dil, gh1, &gw1, &gbg1, &gbb1);
        gx = add(gx, g_sin);
        auto loss = [&] { return proj(fwd(nullptr, nullptr, nullptr, nullptr), r); };
        run_case(out, "blocks.stage_chain", loss,
                 {{"x", &x, &gx},
                  {"w1", &w1, &gw1},
                  {"w2", &w2, &gw2},
                  {"agg_w", &aw, &gaw},
                  {"agg_gamma", &ag, &gag},
                  {"grn_gamma", &gg, &g_gg},
                  {"grn_beta", &gb, &g_gb}},
                 rng);
    }
}

void model_cases(std::vector<GradCheckCase>& out, SplitMix64& rng) {
    GlimmerNetConfig cfg;
    cfg.input_hw = {16, 16};
    cfg.num_classes = 3;
    cfg.stem_width = 8;
    cfg.num_stages = 4;
    cfg.blocks_per_stage = {1, 1, 1, 1};
    cfg.stage_widths = {8, 16, 24, 48};
    cfg.m = 4;
    cfg.dilations = {1, 2, 2, 3};
    cfg.pool_kinds = {PoolKind::max, PoolKind::max, PoolKind::max, PoolKind::avg};
    validate_config(cfg);

    Model<double> model = build_model<double>(cfg, rng.next());
    TensorD x = rand_tensor({2, 3, 16, 16}, rng, 0.0, 1.0);
    const std::vector<int> labels{0, 2};

    ModelCache<double> cache;
    TensorD probs;
    TensorD logits = model_forward(model, x, Mode::train_frozen_stats, &cache);
    softmax_cross_entropy(logits, labels, &probs);
    TensorD g_logits = softmax_cross_entropy_bwd(probs, labels);
    TensorD gx = model_backward(model, cache, g_logits);

    auto loss = [&] {
        TensorD l = model_forward(model, x, Mode::train_frozen_stats);
        return softmax_cross_entropy(l, labels);
    };
    std::vector<Target> targets{{"x", &x, &gx}};
    for (auto& e : model.params.entries)
        if (e.trainable) targets.push_back({e.name, &e.value, &e.grad});
    run_case(out, "model.e2e", loss, targets, rng);
}

// A gradient that is wrong by 1% — the checker must flag it, proving the
// harness can reject and is not vacuously green.
void selftest_cases(std::vector<GradCheckCase>& out, SplitMix64& rng) {
    TensorD x = rand_tensor({2, 3, 4, 4}, rng, -3.0, 9.0);
    nudge_off_kinks(x);
    TensorD r = rand_tensor(x.dims(), rng);
    TensorD gx = relu6_bwd(x, r);
    for (int64_t i = 0; i < gx.numel(); ++i) gx.data()[i] *= 1.01;
    run_case(out, "selftest.broken_scale", [&] { return proj(relu6(x), r); }, {{"x", &x, &gx}},
             rng);
}

}  // namespace

std::vector<GradCheckCase> gradcheck_run(const std::string& scope, uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<GradCheckCase> out;
    if (scope == "kernels")
        kernel_cases(out, rng);
    else if (scope == "blocks")
        block_cases(out, rng);
    else if (scope == "model")
        model_cases(out, rng);
    else if (scope == "selftest")
        selftest_cases(out, rng);
    else
        fail(ErrCode::invalid_argument, "unknown gradcheck scope: " + scope);
    return out;
}

}  // namespace glim
