#include <cmath>
#include <sstream>
#include <tuple>
#include <string>
#include <vector>

#include "costing.hpp"
#include "doctest.h"
#include "json.hpp"
#include "model.hpp"
#include "prng.hpp"

using namespace glim;

namespace {

GlimmerNetConfig micro_config() {
    GlimmerNetConfig cfg;
    cfg.input_hw = {16, 16};
    cfg.num_classes = 3;
    cfg.stem_width = 8;
    cfg.num_stages = 2;
    cfg.blocks_per_stage = {1, 1};
    cfg.stage_widths = {8, 16};
    cfg.m = 2;
    cfg.dilations = {1, 2};
    cfg.pool_kinds = {PoolKind::max, PoolKind::avg};
    return cfg;
}

TensorF rnd(Dims d, uint64_t seed, float lo = 0.0f, float hi = 1.0f) {
    SplitMix64 rng(seed);
    TensorF t(d);
    for (int64_t i = 0; i < t.numel(); ++i)
        t.data()[i] = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("validate_config names the offending field") {
    GlimmerNetConfig cfg;  // flagship defaults are valid
    CHECK_NOTHROW(validate_config(cfg));
    SUBCASE("dilations length") {
        cfg.dilations = {1, 2};
        CHECK_THROWS_WITH_AS(validate_config(cfg), doctest::Contains("dilations"), Error);
    }
    SUBCASE("width not divisible by m") {
        cfg.stage_widths = {40, 80, 150, 240};
        CHECK_THROWS_WITH_AS(validate_config(cfg), doctest::Contains("stage_widths"), Error);
    }
    SUBCASE("aggregator out width vs group count") {
        // stage 2: c = 160/4 = 40 groups; out 250 not divisible
        cfg.stage_widths = {40, 80, 160, 250};
        CHECK_THROWS_AS(validate_config(cfg), Error);
    }
    SUBCASE("input too small") {
        cfg.input_hw = {4, 4};
        CHECK_THROWS_WITH_AS(validate_config(cfg), doctest::Contains("input_hw"), Error);
    }
    SUBCASE("input not a multiple of 4") {
        cfg.input_hw = {22, 22};
        CHECK_THROWS_WITH_AS(validate_config(cfg), doctest::Contains("input_hw"), Error);
    }
    SUBCASE("non-positive classes") {
        cfg.num_classes = 0;
        CHECK_THROWS_WITH_AS(validate_config(cfg), doctest::Contains("num_classes"), Error);
    }
    SUBCASE("blocks_per_stage length") {
        cfg.blocks_per_stage = {4, 4};
        CHECK_THROWS_WITH_AS(validate_config(cfg), doctest::Contains("blocks_per_stage"), Error);
    }
    SUBCASE("dilation must be positive") {
        cfg.dilations = {1, 0, 2, 3};
        CHECK_THROWS_AS(validate_config(cfg), Error);
    }
}

TEST_CASE("presets") {
    SUBCASE("aiderv2 is the flagship") {
        const auto cfg = preset_config("aiderv2");
        CHECK(cfg.input_hw == std::array<int, 2>{224, 224});
        CHECK(cfg.num_classes == 4);
        CHECK(cfg.stem_width == 40);
        CHECK(cfg.stage_widths == std::vector<int>{40, 80, 160, 240});
        CHECK(cfg.blocks_per_stage == std::vector<int>{4, 4, 4, 1});
        CHECK(cfg.m == 4);
        CHECK(cfg.dilations == std::vector<int>{1, 2, 2, 3});
        CHECK(cfg.pool_kinds.back() == PoolKind::avg);
        CHECK(cfg.pool_kinds.front() == PoolKind::max);
    }
    SUBCASE("tinyimagenet") {
        const auto cfg = preset_config("tinyimagenet");
        CHECK(cfg.input_hw == std::array<int, 2>{64, 64});
        CHECK(cfg.num_classes == 200);
        CHECK_NOTHROW(validate_config(cfg));
    }
    SUBCASE("desk") {
        const auto cfg = preset_config("desk");
        CHECK(cfg.input_hw == std::array<int, 2>{32, 32});
        CHECK(cfg.num_classes == 4);
        // widths ascend and stay divisible through every aggregator
        CHECK(cfg.stage_widths == std::vector<int>{8, 16, 24, 48});
        CHECK_NOTHROW(validate_config(cfg));
    }
    SUBCASE("unknown preset") { CHECK_THROWS_AS(preset_config("nope"), Error); }
}

TEST_CASE("config json roundtrip") {
    const auto cfg = preset_config("tinyimagenet");
    const std::string text = config_to_json(cfg);
    const auto back = config_from_json(text);
    CHECK(back.input_hw == cfg.input_hw);
    CHECK(back.num_classes == cfg.num_classes);
    CHECK(back.stem_width == cfg.stem_width);
    CHECK(back.stage_widths == cfg.stage_widths);
    CHECK(back.blocks_per_stage == cfg.blocks_per_stage);
    CHECK(back.m == cfg.m);
    CHECK(back.dilations == cfg.dilations);
    CHECK(back.pool_kinds == cfg.pool_kinds);
    CHECK(back.mac_flops == cfg.mac_flops);
    SUBCASE("unknown key rejected") {
        auto j = nlohmann::json::parse(text);
        j["extra_knob"] = 1;
        CHECK_THROWS_WITH_AS(config_from_json(j.dump()), doctest::Contains("extra_knob"), Error);
    }
    SUBCASE("bad pool kind rejected") {
        auto j = nlohmann::json::parse(text);
        j["pool_kinds"] = {"max", "max", "max", "median"};
        CHECK_THROWS_AS(config_from_json(j.dump()), Error);
    }
    SUBCASE("malformed json rejected") { CHECK_THROWS_AS(config_from_json("{oops"), Error); }
}

TEST_CASE("build_model initialization and determinism") {
    const auto cfg = micro_config();
    auto m1 = build_model<float>(cfg, 42);
    auto m2 = build_model<float>(cfg, 42);
    auto m3 = build_model<float>(cfg, 43);
    REQUIRE(m1.params.entries.size() == m2.params.entries.size());
    bool any_differs_across_seeds = false;
    for (size_t i = 0; i < m1.params.entries.size(); ++i) {
        const auto& a = m1.params.entries[i];
        const auto& b = m2.params.entries[i];
        CHECK(a.name == b.name);
        CHECK(max_abs_diff(a.value, b.value) == 0.0f);
        if (a.value.dims() == m3.params.entries[i].value.dims() &&
            max_abs_diff(a.value, m3.params.entries[i].value) > 0.0f)
            any_differs_across_seeds = true;
    }
    CHECK(any_differs_across_seeds);
    SUBCASE("norm params start at the identity transform") {
        for (const auto& e : m1.params.entries) {
            const auto has = [&](const char* s) { return e.name.find(s) != std::string::npos; };
            if (has("bn") && has("gamma"))
                for (int64_t i = 0; i < e.value.numel(); ++i) CHECK(e.value.data()[i] == 1.0f);
            if (has("bn") && has("beta"))
                for (int64_t i = 0; i < e.value.numel(); ++i) CHECK(e.value.data()[i] == 0.0f);
            if (has("running_mean"))
                for (int64_t i = 0; i < e.value.numel(); ++i) CHECK(e.value.data()[i] == 0.0f);
            if (has("running_var"))
                for (int64_t i = 0; i < e.value.numel(); ++i) CHECK(e.value.data()[i] == 1.0f);
            if (has("grn"))
                for (int64_t i = 0; i < e.value.numel(); ++i) CHECK(e.value.data()[i] == 0.0f);
            if (has("fc.b"))
                for (int64_t i = 0; i < e.value.numel(); ++i) CHECK(e.value.data()[i] == 0.0f);
        }
    }
    SUBCASE("weight draws respect the fan-in bound") {
        const int idx = m1.params.find("stem.conv.w");
        REQUIRE(idx >= 0);
        const auto& w = m1.params[idx];  // fan_in = 3*3*3 = 27
        const float bound = std::sqrt(6.0f / 27.0f);
        float max_abs = 0;
        for (int64_t i = 0; i < w.numel(); ++i)
            max_abs = std::max(max_abs, std::abs(w.data()[i]));
        CHECK(max_abs <= bound);
        CHECK(max_abs > 0.5f * bound);  // not degenerate
    }
}

TEST_CASE("forward shapes for the flagship") {
    auto model = build_model<float>(preset_config("aiderv2"), 1);
    TensorF x = rnd({2, 3, 224, 224}, 2);
    ModelTaps<float> taps;
    TensorF logits = model_forward<float>(model, x, Mode::infer, nullptr, &taps);
    CHECK(logits.dims() == Dims{2, 4, 1, 1});
    REQUIRE(taps.stage_gd_out.size() == 4);
    CHECK(taps.stage_gd_out[0].dims() == Dims{2, 40, 56, 56});
    CHECK(taps.stage_gd_out[1].dims() == Dims{2, 80, 28, 28});
    CHECK(taps.stage_gd_out[2].dims() == Dims{2, 160, 14, 14});
    CHECK(taps.stage_gd_out[3].dims() == Dims{2, 240, 7, 7});
}

TEST_CASE("forward accepts any valid input size without resizing") {
    auto cfg = preset_config("aiderv2");
    cfg.input_hw = {64, 64};
    auto model = build_model<float>(cfg, 1);
    TensorF x = rnd({1, 3, 64, 64}, 3);
    ModelTaps<float> taps;
    TensorF logits = model_forward<float>(model, x, Mode::infer, nullptr, &taps);
    CHECK(logits.dims() == Dims{1, 4, 1, 1});
    CHECK(taps.stage_gd_out[0].dims() == Dims{1, 40, 16, 16});
    // 16 -> 8 -> 4 -> 2 -> refiner keeps 2
    CHECK(taps.stage_gd_out[3].dims() == Dims{1, 240, 2, 2});
}

TEST_CASE("infer is batch-consistent") {
    auto model = build_model<float>(micro_config(), 7);
    TensorF x = rnd({3, 3, 16, 16}, 8);
    TensorF batched = model_forward(model, x, Mode::infer);
    for (int64_t n = 0; n < 3; ++n) {
        TensorF one({1, 3, 16, 16});
        for (int64_t c = 0; c < 3; ++c)
            for (int64_t y = 0; y < 16; ++y)
                for (int64_t v = 0; v < 16; ++v) one.at(0, c, y, v) = x.at(n, c, y, v);
        TensorF single = model_forward(model, one, Mode::infer);
        for (int64_t k = 0; k < 3; ++k)
            CHECK(single.at(0, k, 0, 0) ==
                  doctest::Approx(batched.at(n, k, 0, 0)).epsilon(1e-5));
    }
}

TEST_CASE("parameter counts, biased-conv reconciliation knob") {
    struct Row {
        std::vector<int> blocks;
        long long with_bias;
        long long bias_free;
    };
    const std::vector<Row> rows{{{4, 4, 4, 1}, 31204, 28804},
                                {{4, 3, 2, 1}, 26404, 24404},
                                {{4, 2, 2, 1}, 25444, 23524},
                                {{1, 1, 1, 1}, 21124, 19564}};
    auto cfg = preset_config("aiderv2");
    for (const auto& r : rows) {
        cfg.blocks_per_stage = r.blocks;
        CHECK(count_params(cfg, {true}) == r.with_bias);
        CHECK(count_params(cfg, {false}) == r.bias_free);
    }
    SUBCASE("published total within ten percent") {
        cfg.blocks_per_stage = {4, 4, 4, 1};
        const double ours = static_cast<double>(count_params(cfg, {false}));
        CHECK(std::abs(ours - 31204.0) / 31204.0 < 0.10);
    }
    SUBCASE("strict decrease down the depth table") {
        long long prev = -1;
        for (const auto& r : rows) {
            cfg.blocks_per_stage = r.blocks;
            const long long n = count_params(cfg, {true});
            if (prev > 0) CHECK(n < prev);
            prev = n;
        }
    }
}

TEST_CASE("dilation does not change parameter or mac counts") {
    auto cfg = preset_config("aiderv2");
    const long long base_p = count_params(cfg, {});
    const long long base_f = count_flops(cfg, FlopOptions::full(1));
    cfg.dilations = {3, 3, 3, 3};
    CHECK(count_params(cfg, {}) == base_p);
    CHECK(count_flops(cfg, FlopOptions::full(1)) == base_f);
}

TEST_CASE("flop counts under both conventions") {
    struct Row {
        std::vector<int> blocks;
        long long hooks;
    };
    const std::vector<Row> rows{{{4, 4, 4, 1}, 22286400},
                                {{4, 3, 2, 1}, 22035520},
                                {{4, 2, 2, 1}, 21910080},
                                {{1, 1, 1, 1}, 20969280}};
    auto cfg = preset_config("aiderv2");
    for (const auto& r : rows) {
        cfg.blocks_per_stage = r.blocks;
        CHECK(count_flops(cfg, FlopOptions::module_hooks()) == r.hooks);
    }
    cfg.blocks_per_stage = {4, 4, 4, 1};
    SUBCASE("full counts at mac 1 and 2") {
        const long long mac1 = count_flops(cfg, FlopOptions::full(1));
        const long long mac2 = count_flops(cfg, FlopOptions::full(2));
        CHECK(mac1 == 31302400);
        CHECK(mac2 == 57575200);
        // mac=2 doubles exactly the multiply-accumulate share
        CHECK(mac2 - mac1 == 26272800);
    }
    SUBCASE("published figure within fifteen percent") {
        const double hooks = static_cast<double>(count_flops(cfg, FlopOptions::module_hooks()));
        CHECK(std::abs(hooks - 22286400.0) / 22286400.0 < 0.15);
    }
    SUBCASE("module-visible never exceeds all-ops at equal mac cost") {
        CHECK(count_flops(cfg, FlopOptions::module_hooks()) < count_flops(cfg, FlopOptions::full(1)));
    }
}

TEST_CASE("verify_counts passes on freshly built models") {
    std::vector<GlimmerNetConfig> cfgs{preset_config("aiderv2"), preset_config("tinyimagenet"),
                                       preset_config("desk"), micro_config()};
    GlimmerNetConfig custom;
    custom.input_hw = {32, 32};
    custom.num_classes = 5;
    custom.stem_width = 6;
    custom.num_stages = 3;
    custom.blocks_per_stage = {2, 1, 1};
    custom.stage_widths = {6, 12, 18};
    custom.m = 2;
    custom.dilations = {1, 3};
    custom.pool_kinds = {PoolKind::max, PoolKind::max, PoolKind::avg};
    cfgs.push_back(custom);
    for (const auto& cfg : cfgs) {
        auto model = build_model<float>(cfg, 11);
        const auto diffs = verify_counts(model);
        for (const auto& d : diffs) INFO(d);
        CHECK(diffs.empty());
    }
}

TEST_CASE("verify_counts names a corrupted entry") {
    auto model = build_model<float>(micro_config(), 12);
    const int idx = model.params.find("head.fc.w");
    REQUIRE(idx >= 0);
    model.params.entries[static_cast<size_t>(idx)].value = TensorF({1, 1, 1, 1});
    const auto diffs = verify_counts(model);
    REQUIRE_FALSE(diffs.empty());
    bool named = false;
    for (const auto& d : diffs) named = named || d.find("head.fc.w") != std::string::npos;
    CHECK(named);
}

TEST_CASE("summary output") {
    const auto cfg = preset_config("aiderv2");
    SUBCASE("text table carries the stage trace and totals") {
        const std::string text = summary_text(cfg);
        for (const char* frag : {"56", "28", "14", "7", "total params", "total flops",
                                 "module-hook equivalent"})
            CHECK(text.find(frag) != std::string::npos);
    }
    SUBCASE("jsonl parses and totals match the counters") {
        const std::string jl = summary_jsonl(cfg);
        std::istringstream in(jl);
        std::string line, last;
        int rows = 0;
        while (std::getline(in, line))
            if (!line.empty()) {
                ++rows;
                last = line;
                CHECK_NOTHROW(std::ignore = nlohmann::json::parse(line));
            }
        CHECK(rows > 8);
        const auto totals = nlohmann::json::parse(last);
        CHECK(totals.at("total_params").get<long long>() == count_params(cfg, {}));
        CHECK(totals.at("flops_module_hooks").get<long long>() ==
              count_flops(cfg, FlopOptions::module_hooks()));
        CHECK(totals.at("total_flops").get<long long>() ==
              count_flops(cfg, FlopOptions::full(cfg.mac_flops)));
    }
}

TEST_CASE("backward fills every trainable grad") {
    auto model = build_model<float>(micro_config(), 13);
    TensorF x = rnd({2, 3, 16, 16}, 14);
    ModelCache<float> cache;
    TensorF logits = model_forward(model, x, Mode::train_frozen_stats, &cache);
    TensorF probs;
    softmax_cross_entropy(logits, {0, 2}, &probs);
    TensorF g = softmax_cross_entropy_bwd(probs, {0, 2});
    TensorF gx = model_backward(model, cache, g);
    CHECK(gx.dims() == x.dims());
    for (const auto& e : model.params.entries)
        if (e.trainable) {
            INFO(e.name);
            REQUIRE(e.grad.numel() == e.value.numel());
            float max_abs = 0;
            for (int64_t i = 0; i < e.grad.numel(); ++i)
                max_abs = std::max(max_abs, std::abs(e.grad.data()[i]));
            CHECK(max_abs > 0.0f);
        }
}

}  // TEST_SUITE
