#pragma once

#include "model.hpp"

namespace glim {

struct CountOptions {
    // The network's convs carry no bias; the knob exists so totals can be
    // reconciled against reference figures produced with biased convs.
    bool conv_bias = false;
};

struct FlopOptions {
    int mac_flops = 2;          // FLOPs charged per multiply-accumulate
    bool count_norm_act = true; // charge 1 op/element for BN, ReLU6, pooling
    // module_visible reproduces a hook-based counter that only sees standard
    // conv/BN/activation/pool modules: the grouped dilated convs inside
    // GDBlocks, GRN, and residual adds go uncounted.
    enum class Scope { all_ops, module_visible };
    Scope scope = Scope::all_ops;

    static FlopOptions full(int mac = 2) {
        FlopOptions f;
        f.mac_flops = mac;
        return f;
    }
    static FlopOptions module_hooks() {
        FlopOptions f;
        f.mac_flops = 1;
        f.scope = Scope::module_visible;
        return f;
    }
};

struct CostRow {
    std::string name;
    long long params = 0;   // trainable
    long long buffers = 0;  // BN running stats
    long long flops = 0;    // batch of one
    Dims out{1, 0, 0, 0};
};

struct CostReport {
    std::vector<CostRow> rows;
    long long total_params = 0, total_buffers = 0, total_flops = 0;
};

CostReport analyze_cost(const GlimmerNetConfig& cfg, const CountOptions& popt = {},
                        const FlopOptions& fopt = {});
long long count_params(const GlimmerNetConfig& cfg, const CountOptions& popt = {});
long long count_flops(const GlimmerNetConfig& cfg, const FlopOptions& fopt);

// Re-derives the analytic rows and compares them against the tensors a built
// model actually allocated. Empty result = consistent.
template <typename T>
std::vector<std::string> verify_counts(const Model<T>& model);

std::string summary_text(const GlimmerNetConfig& cfg);
// One JSON object per row, then a totals object.
std::string summary_jsonl(const GlimmerNetConfig& cfg);

}  // namespace glim
