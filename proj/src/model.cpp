#include "model.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "prng.hpp"

namespace glim {

using nlohmann::json;

void validate_config(const GlimmerNetConfig& cfg) {
    if (cfg.input_hw[0] < 8 || cfg.input_hw[1] < 8 || cfg.input_hw[0] % 4 || cfg.input_hw[1] % 4)
        fail(ErrCode::invalid_argument,
             "config.input_hw: must be >= 8 and divisible by 4, got " +
                 std::to_string(cfg.input_hw[0]) + "x" + std::to_string(cfg.input_hw[1]));
    if (cfg.num_classes < 2)
        fail(ErrCode::invalid_argument, "config.num_classes: must be >= 2");
    if (cfg.num_stages < 1)
        fail(ErrCode::invalid_argument, "config.num_stages: must be >= 1");
    const auto S = static_cast<size_t>(cfg.num_stages);
    if (cfg.blocks_per_stage.size() != S)
        fail(ErrCode::invalid_argument, "config.blocks_per_stage: expected " +
                                            std::to_string(cfg.num_stages) + " entries");
    if (cfg.stage_widths.size() != S)
        fail(ErrCode::invalid_argument,
             "config.stage_widths: expected " + std::to_string(cfg.num_stages) + " entries");
    if (cfg.pool_kinds.size() != S)
        fail(ErrCode::invalid_argument,
             "config.pool_kinds: expected " + std::to_string(cfg.num_stages) + " entries");
    if (cfg.m < 1) fail(ErrCode::invalid_argument, "config.m: must be >= 1");
    if (cfg.dilations.size() != static_cast<size_t>(cfg.m))
        fail(ErrCode::invalid_argument,
             "config.dilations: expected m=" + std::to_string(cfg.m) + " entries");
    for (int d : cfg.dilations)
        if (d < 1) fail(ErrCode::invalid_argument, "config.dilations: entries must be >= 1");
    for (size_t s = 0; s < S; ++s) {
        if (cfg.blocks_per_stage[s] < 1)
            fail(ErrCode::invalid_argument, "config.blocks_per_stage: entries must be >= 1");
        if (cfg.stage_widths[s] < 1 || cfg.stage_widths[s] % cfg.m)
            fail(ErrCode::invalid_argument,
                 "config.stage_widths: stage " + std::to_string(s + 1) + " width " +
                     std::to_string(cfg.stage_widths[s]) + " not divisible by m=" +
                     std::to_string(cfg.m));
        const int groups = cfg.stage_widths[s] / cfg.m;
        const int out = cfg.stage_out_width(static_cast<int>(s));
        if (out % groups)
            fail(ErrCode::invalid_argument,
                 "config.stage_widths: stage " + std::to_string(s + 1) + " aggregator output " +
                     std::to_string(out) + " not divisible by its " + std::to_string(groups) +
                     " channel groups");
    }
    if (cfg.stem_width != cfg.stage_widths[0])
        fail(ErrCode::invalid_argument,
             "config.stem_width: must equal stage_widths[0], got " +
                 std::to_string(cfg.stem_width) + " vs " + std::to_string(cfg.stage_widths[0]));
    if (cfg.mac_flops != 1 && cfg.mac_flops != 2)
        fail(ErrCode::invalid_argument, "config.flop_convention: must be mac=1 or mac=2");
}

namespace {

PoolKind pool_from_string(const std::string& s) {
    if (s == "max") return PoolKind::max;
    if (s == "avg") return PoolKind::avg;
    fail(ErrCode::invalid_argument, "config.pool_kinds: unknown kind '" + s + "'");
}

}  // namespace

GlimmerNetConfig config_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        fail(ErrCode::data, std::string("config: bad JSON: ") + e.what());
    }
    static const char* known[] = {"input_hw", "num_classes", "stem_width",
                                  "num_stages", "blocks_per_stage", "stage_widths",
                                  "m", "dilations", "pool_kinds", "flop_convention"};
    for (const auto& [key, _] : j.items())
        if (std::find_if(std::begin(known), std::end(known),
                         [&](const char* k) { return key == k; }) == std::end(known))
            fail(ErrCode::invalid_argument, "config: unknown key '" + key + "'");
    GlimmerNetConfig cfg;
    try {
        cfg.input_hw = {j.at("input_hw").at(0).get<int>(), j.at("input_hw").at(1).get<int>()};
        cfg.num_classes = j.at("num_classes").get<int>();
        cfg.stem_width = j.at("stem_width").get<int>();
        cfg.num_stages = j.at("num_stages").get<int>();
        cfg.blocks_per_stage = j.at("blocks_per_stage").get<std::vector<int>>();
        cfg.stage_widths = j.at("stage_widths").get<std::vector<int>>();
        cfg.m = j.at("m").get<int>();
        cfg.dilations = j.at("dilations").get<std::vector<int>>();
        cfg.pool_kinds.clear();
        for (const auto& p : j.at("pool_kinds"))
            cfg.pool_kinds.push_back(pool_from_string(p.get<std::string>()));
        if (j.contains("flop_convention")) {
            const std::string fc = j.at("flop_convention").get<std::string>();
            if (fc == "mac=1")
                cfg.mac_flops = 1;
            else if (fc == "mac=2")
                cfg.mac_flops = 2;
            else
                fail(ErrCode::invalid_argument, "config.flop_convention: unknown '" + fc + "'");
        }
    } catch (const json::exception& e) {
        fail(ErrCode::data, std::string("config: missing or mistyped field: ") + e.what());
    }
    validate_config(cfg);
    return cfg;
}

std::string config_to_json(const GlimmerNetConfig& cfg) {
    json j;
    j["input_hw"] = cfg.input_hw;
    j["num_classes"] = cfg.num_classes;
    j["stem_width"] = cfg.stem_width;
    j["num_stages"] = cfg.num_stages;
    j["blocks_per_stage"] = cfg.blocks_per_stage;
    j["stage_widths"] = cfg.stage_widths;
    j["m"] = cfg.m;
    j["dilations"] = cfg.dilations;
    std::vector<std::string> pools;
    for (PoolKind k : cfg.pool_kinds) pools.emplace_back(k == PoolKind::max ? "max" : "avg");
    j["pool_kinds"] = pools;
    j["flop_convention"] = cfg.mac_flops == 2 ? "mac=2" : "mac=1";
    return j.dump();
}

GlimmerNetConfig preset_config(const std::string& name) {
    GlimmerNetConfig cfg;  // defaults are the aiderv2 flagship
    if (name == "aiderv2") return cfg;
    if (name == "tinyimagenet") {
        cfg.input_hw = {64, 64};
        cfg.num_classes = 200;
        cfg.stem_width = 40;
        cfg.num_stages = 6;
        cfg.blocks_per_stage = {6, 5, 5, 4, 3, 1};
        cfg.stage_widths = {40, 80, 160, 320, 640, 640};
        cfg.m = 5;
        cfg.dilations = {1, 1, 2, 2, 3};
        cfg.pool_kinds.assign(6, PoolKind::max);
        cfg.pool_kinds.back() = PoolKind::avg;
        return cfg;
    }
    if (name == "desk") {
        cfg.input_hw = {32, 32};
        cfg.num_classes = 4;
        cfg.stem_width = 8;
        cfg.blocks_per_stage = {1, 1, 1, 1};
        cfg.stage_widths = {8, 16, 24, 48};
        return cfg;
    }
    fail(ErrCode::invalid_argument, "unknown preset '" + name + "'");
}

namespace {

template <typename T>
void init_kaiming(Tensor<T>& w, int64_t fan_in, SplitMix64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (int64_t i = 0; i < w.numel(); ++i)
        w.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
BNIdx add_bn(ParamStore<T>& ps, const std::string& prefix, int64_t C) {
    BNIdx idx;
    idx.gamma = ps.add(prefix + ".gamma", {1, C, 1, 1}, true);
    idx.beta = ps.add(prefix + ".beta", {1, C, 1, 1}, true);
    idx.rm = ps.add(prefix + ".running_mean", {1, C, 1, 1}, false);
    idx.rv = ps.add(prefix + ".running_var", {1, C, 1, 1}, false);
    for (int64_t i = 0; i < C; ++i) {
        ps[idx.gamma].data()[i] = T(1);
        ps[idx.rv].data()[i] = T(1);
    }
    return idx;
}

}  // namespace

template <typename T>
Model<T> build_model(const GlimmerNetConfig& cfg, uint64_t seed) {
    validate_config(cfg);
    Model<T> model;
    model.cfg = cfg;
    ParamStore<T>& ps = model.params;
    SplitMix64 rng(seed);

    const int W0 = cfg.stem_width;
    model.stem.conv_w = ps.add("stem.conv.w", {W0, 3, 3, 3}, true);
    init_kaiming(ps[model.stem.conv_w], 3 * 3 * 3, rng);
    model.stem.bn1 = add_bn(ps, "stem.bn1", W0);
    model.stem.dw_w = ps.add("stem.dw.w", {W0, 1, 3, 3}, true);
    init_kaiming(ps[model.stem.dw_w], 3 * 3, rng);
    model.stem.bn2 = add_bn(ps, "stem.bn2", W0);

    for (int s = 0; s < cfg.num_stages; ++s) {
        const std::string sp = "stage" + std::to_string(s + 1);
        const int width = cfg.stage_widths[static_cast<size_t>(s)];
        const int out = cfg.stage_out_width(s);
        typename Model<T>::StageIdx stage;
        for (int b = 0; b < cfg.blocks_per_stage[static_cast<size_t>(s)]; ++b) {
            const std::string bp = sp + ".block" + std::to_string(b + 1);
            typename Model<T>::BlockIdx blk;
            blk.dw_w = ps.add(bp + ".dw.w", {width, 1, 3, 3}, true);
            init_kaiming(ps[blk.dw_w], 3 * 3, rng);
            blk.bn = add_bn(ps, bp + ".bn", width);
            stage.blocks.push_back(blk);
        }
        stage.agg_w = ps.add(sp + ".agg.pw.w", {out, 2 * cfg.m, 1, 1}, true);
        init_kaiming(ps[stage.agg_w], 2 * cfg.m, rng);
        stage.agg_bn = add_bn(ps, sp + ".agg.bn", out);
        stage.grn_gamma = ps.add(sp + ".grn.gamma", {1, out, 1, 1}, true);
        stage.grn_beta = ps.add(sp + ".grn.beta", {1, out, 1, 1}, true);
        model.stages.push_back(std::move(stage));
    }

    const int WL = cfg.stage_out_width(cfg.num_stages - 1);
    model.refiner.dw_w = ps.add("refiner.dw.w", {WL, 1, 3, 3}, true);
    init_kaiming(ps[model.refiner.dw_w], 3 * 3, rng);
    model.refiner.bn = add_bn(ps, "refiner.bn", WL);

    model.head.fc_w = ps.add("head.fc.w", {cfg.num_classes, WL, 1, 1}, true);
    init_kaiming(ps[model.head.fc_w], WL, rng);
    model.head.fc_b = ps.add("head.fc.b", {1, cfg.num_classes, 1, 1}, true);
    return model;
}

template <typename T>
Tensor<T> model_forward(Model<T>& model, const Tensor<T>& x, Mode mode, ModelCache<T>* cache,
                        ModelTaps<T>* taps) {
    const GlimmerNetConfig& cfg = model.cfg;
    const Dims d = x.dims();
    if (d.c != 3 || d.h != cfg.input_hw[0] || d.w != cfg.input_hw[1])
        fail(ErrCode::invalid_argument, "model_forward: input " + d.str() + " does not match (" +
                                            std::to_string(cfg.input_hw[0]) + "," +
                                            std::to_string(cfg.input_hw[1]) + ") RGB config");
    ParamStore<T>& ps = model.params;
    if (cache) cache->stages.assign(static_cast<size_t>(cfg.num_stages), {});
    if (taps) taps->stage_gd_out.clear();

    Tensor<T> cur = stem_forward(x, ps[model.stem.conv_w], model.bn_refs(model.stem.bn1),
                                 ps[model.stem.dw_w], model.bn_refs(model.stem.bn2), mode,
                                 cache ? &cache->stem : nullptr);
    for (int s = 0; s < cfg.num_stages; ++s) {
        auto& stage = model.stages[static_cast<size_t>(s)];
        StageCache<T>* sc = cache ? &cache->stages[static_cast<size_t>(s)] : nullptr;
        if (sc) sc->blocks.resize(stage.blocks.size());
        Tensor<T> stage_in = cur;
        for (size_t b = 0; b < stage.blocks.size(); ++b)
            cur = gdblock_forward(cur, ps[stage.blocks[b].dw_w], model.bn_refs(stage.blocks[b].bn),
                                  cfg.m, cfg.dilations, mode, sc ? &sc->blocks[b] : nullptr);
        if (taps) taps->stage_gd_out.push_back(cur);
        cur = aggregator_forward(cur, stage_in, ps[stage.agg_w], model.bn_refs(stage.agg_bn),
                                 cfg.m, mode, sc ? &sc->agg : nullptr);
        cur = downsampler_forward(cur, cfg.pool_kinds[static_cast<size_t>(s)],
                                  ps[stage.grn_gamma], ps[stage.grn_beta],
                                  sc ? &sc->down : nullptr);
    }
    cur = refiner_forward(cur, ps[model.refiner.dw_w], model.bn_refs(model.refiner.bn), mode,
                          cache ? &cache->refiner : nullptr);
    return head_forward(cur, ps[model.head.fc_w], ps[model.head.fc_b],
                        cache ? &cache->head : nullptr);
}

template <typename T>
Tensor<T> model_backward(Model<T>& model, const ModelCache<T>& cache, const Tensor<T>& g_logits) {
    const GlimmerNetConfig& cfg = model.cfg;
    ParamStore<T>& ps = model.params;
    auto grad_of = [&ps](int idx) { return &ps.entries[static_cast<size_t>(idx)].grad; };

    Tensor<T> g = head_backward(cache.head, ps[model.head.fc_w], g_logits,
                                grad_of(model.head.fc_w), grad_of(model.head.fc_b));
    g = refiner_backward(cache.refiner, ps[model.refiner.dw_w], model.bn_refs(model.refiner.bn), g,
                         grad_of(model.refiner.dw_w), grad_of(model.refiner.bn.gamma),
                         grad_of(model.refiner.bn.beta));
    for (int s = cfg.num_stages - 1; s >= 0; --s) {
        auto& stage = model.stages[static_cast<size_t>(s)];
        const StageCache<T>& sc = cache.stages[static_cast<size_t>(s)];
        g = downsampler_backward(sc.down, cfg.pool_kinds[static_cast<size_t>(s)],
                                 ps[stage.grn_gamma], g, grad_of(stage.grn_gamma),
                                 grad_of(stage.grn_beta));
        Tensor<T> g_gd, g_stage_in;
        aggregator_backward(sc.agg, ps[stage.agg_w], model.bn_refs(stage.agg_bn), cfg.m, g, &g_gd,
                            &g_stage_in, grad_of(stage.agg_w), grad_of(stage.agg_bn.gamma),
                            grad_of(stage.agg_bn.beta));
        g = std::move(g_gd);
        for (int b = static_cast<int>(stage.blocks.size()) - 1; b >= 0; --b)
            g = gdblock_backward(sc.blocks[static_cast<size_t>(b)],
                                 ps[stage.blocks[static_cast<size_t>(b)].dw_w],
                                 model.bn_refs(stage.blocks[static_cast<size_t>(b)].bn), cfg.m,
                                 cfg.dilations, g,
                                 grad_of(stage.blocks[static_cast<size_t>(b)].dw_w),
                                 grad_of(stage.blocks[static_cast<size_t>(b)].bn.gamma),
                                 grad_of(stage.blocks[static_cast<size_t>(b)].bn.beta));
        g = add(g, g_stage_in);  // stage input also feeds the aggregator's interleave
    }
    return stem_backward(cache.stem, ps[model.stem.conv_w], model.bn_refs(model.stem.bn1),
                         ps[model.stem.dw_w], model.bn_refs(model.stem.bn2), g,
                         grad_of(model.stem.conv_w), grad_of(model.stem.bn1.gamma),
                         grad_of(model.stem.bn1.beta), grad_of(model.stem.dw_w),
                         grad_of(model.stem.bn2.gamma), grad_of(model.stem.bn2.beta));
}

template Model<float> build_model(const GlimmerNetConfig&, uint64_t);
template Model<double> build_model(const GlimmerNetConfig&, uint64_t);
template Tensor<float> model_forward(Model<float>&, const Tensor<float>&, Mode, ModelCache<float>*,
                                     ModelTaps<float>*);
template Tensor<double> model_forward(Model<double>&, const Tensor<double>&, Mode,
                                      ModelCache<double>*, ModelTaps<double>*);
template Tensor<float> model_backward(Model<float>&, const ModelCache<float>&,
                                      const Tensor<float>&);
template Tensor<double> model_backward(Model<double>&, const ModelCache<double>&,
                                       const Tensor<double>&);

}  // namespace glim
