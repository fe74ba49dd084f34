#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "blocks.hpp"

namespace glim {

struct GlimmerNetConfig {
    std::array<int, 2> input_hw{224, 224};
    int num_classes = 4;
    int stem_width = 40;
    int num_stages = 4;
    std::vector<int> blocks_per_stage{4, 4, 4, 1};
    std::vector<int> stage_widths{40, 80, 160, 240};
    int m = 4;
    std::vector<int> dilations{1, 2, 2, 3};
    std::vector<PoolKind> pool_kinds{PoolKind::max, PoolKind::max, PoolKind::max, PoolKind::avg};
    int mac_flops = 2;  // FLOPs charged per multiply-accumulate in reports

    // Stage s runs its GDBlocks at stage_widths[s]; its aggregator expands to
    // stage_widths[s+1] (the last stage keeps its width). Stage output width:
    int stage_out_width(int s) const {
        return s + 1 < num_stages ? stage_widths[static_cast<size_t>(s) + 1]
                                  : stage_widths[static_cast<size_t>(s)];
    }
};

// Throws Error naming the offending field.
void validate_config(const GlimmerNetConfig& cfg);

GlimmerNetConfig config_from_json(const std::string& json_text);
std::string config_to_json(const GlimmerNetConfig& cfg);
// "aiderv2", "tinyimagenet", "desk"
GlimmerNetConfig preset_config(const std::string& name);

template <typename T>
struct ParamEntry {
    std::string name;
    Tensor<T> value;
    bool trainable = true;
    Tensor<T> grad;            // allocated by model_backward
    Tensor<T> sq_avg, moment;  // optimizer slots, allocated by the optimizer
};

template <typename T>
struct ParamStore {
    std::vector<ParamEntry<T>> entries;
    std::unordered_map<std::string, int> by_name;

    int add(const std::string& name, Dims dims, bool trainable) {
        if (by_name.count(name)) fail(ErrCode::invalid_argument, "duplicate param " + name);
        by_name[name] = static_cast<int>(entries.size());
        entries.push_back({name, Tensor<T>(dims), trainable, {}, {}, {}});
        return static_cast<int>(entries.size()) - 1;
    }
    Tensor<T>& operator[](int i) { return entries[static_cast<size_t>(i)].value; }
    const Tensor<T>& operator[](int i) const { return entries[static_cast<size_t>(i)].value; }
    int find(const std::string& name) const {
        auto it = by_name.find(name);
        return it == by_name.end() ? -1 : it->second;
    }
};

struct BNIdx {
    int gamma = -1, beta = -1, rm = -1, rv = -1;
};

template <typename T>
struct Model {
    GlimmerNetConfig cfg;
    ParamStore<T> params;

    struct StemIdx {
        int conv_w;
        BNIdx bn1;
        int dw_w;
        BNIdx bn2;
    } stem;
    struct BlockIdx {
        int dw_w;
        BNIdx bn;
    };
    struct StageIdx {
        std::vector<BlockIdx> blocks;
        int agg_w;
        BNIdx agg_bn;
        int grn_gamma, grn_beta;
    };
    std::vector<StageIdx> stages;
    struct RefinerIdx {
        int dw_w;
        BNIdx bn;
    } refiner;
    struct HeadIdx {
        int fc_w, fc_b;
    } head;

    BNRefs<T> bn_refs(const BNIdx& i) {
        return {&params[i.gamma], &params[i.beta], &params[i.rm], &params[i.rv]};
    }
};

// Weights: Kaiming-uniform over fan-in, bound sqrt(6/fan_in), drawn from one
// splitmix64 stream in parameter-declaration order. BN gamma=1/beta=0, running
// mean=0/var=1, GRN gamma=beta=0, classifier bias=0 (no draws).
template <typename T>
Model<T> build_model(const GlimmerNetConfig& cfg, uint64_t seed);

template <typename T>
struct StageCache {
    std::vector<GDBlockCache<T>> blocks;
    AggregatorCache<T> agg;
    DownsamplerCache<T> down;
};

template <typename T>
struct ModelCache {
    StemCache<T> stem;
    std::vector<StageCache<T>> stages;
    RefinerCache<T> refiner;
    HeadCache<T> head;
};

// Per-stage output of the last GDBlock, captured for feature dumps.
template <typename T>
struct ModelTaps {
    std::vector<Tensor<T>> stage_gd_out;
};

template <typename T>
Tensor<T> model_forward(Model<T>& model, const Tensor<T>& x, Mode mode,
                        ModelCache<T>* cache = nullptr, ModelTaps<T>* taps = nullptr);

// Fills entry grads (overwrites), returns d loss / d input.
template <typename T>
Tensor<T> model_backward(Model<T>& model, const ModelCache<T>& cache, const Tensor<T>& g_logits);

}  // namespace glim
