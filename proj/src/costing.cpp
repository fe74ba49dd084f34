#include "costing.hpp"

#include <array>
#include <map>
#include <sstream>

#include <json.hpp>

namespace glim {

CostReport analyze_cost(const GlimmerNetConfig& cfg, const CountOptions& popt,
                        const FlopOptions& fopt) {
    validate_config(cfg);
    CostReport rep;
    const long long M = fopt.mac_flops;
    const bool ew = fopt.count_norm_act;
    const bool all = fopt.scope == FlopOptions::Scope::all_ops;
    const long long bias = popt.conv_bias ? 1 : 0;

    auto push = [&rep](CostRow row) {
        rep.total_params += row.params;
        rep.total_buffers += row.buffers;
        rep.total_flops += row.flops;
        rep.rows.push_back(std::move(row));
    };

    const long long W0 = cfg.stem_width;
    long long h = cfg.input_hw[0] / 2, w = cfg.input_hw[1] / 2;
    {
        CostRow r;
        r.name = "stem";
        r.params = 3 * W0 * 9 + bias * W0 + 2 * W0 + W0 * 9 + bias * W0 + 2 * W0;
        r.buffers = 4 * W0;
        const long long p1 = W0 * h * w;          // after dense conv
        const long long p2 = W0 * (h / 2) * (w / 2);  // after depthwise conv
        r.flops = (3 * W0 * 9 * h * w + W0 * 9 * (h / 2) * (w / 2)) * M;
        if (ew) r.flops += 2 * p1 + 2 * p2;  // two BN+ReLU6 pairs
        h /= 2;
        w /= 2;
        r.out = {1, W0, h, w};
        push(std::move(r));
    }

    for (int s = 0; s < cfg.num_stages; ++s) {
        const long long width = cfg.stage_widths[static_cast<size_t>(s)];
        const long long out = cfg.stage_out_width(s);
        const long long plane = h * w;
        for (int b = 0; b < cfg.blocks_per_stage[static_cast<size_t>(s)]; ++b) {
            CostRow r;
            r.name = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1);
            r.params = width * 9 + bias * width + 2 * width;
            r.buffers = 2 * width;
            if (all) r.flops += width * 9 * plane * M;  // grouped dilated dwconv
            if (ew) r.flops += 2 * width * plane;       // BN + ReLU6
            if (all) r.flops += width * plane;          // residual add
            r.out = {1, width, h, w};
            push(std::move(r));
        }
        {
            CostRow r;
            r.name = "stage" + std::to_string(s + 1) + ".agg";
            r.params = 2 * cfg.m * out + bias * out + 2 * out;
            r.buffers = 2 * out;
            r.flops = 2 * cfg.m * out * plane * M;
            if (ew) r.flops += 2 * out * plane;  // BN + ReLU6
            r.out = {1, out, h, w};
            push(std::move(r));
        }
        {
            CostRow r;
            r.name = "stage" + std::to_string(s + 1) + ".down";
            r.params = 2 * out;  // GRN gamma/beta
            const bool pooled = h % 2 == 0 && w % 2 == 0;
            if (pooled) {
                h /= 2;
                w /= 2;
                if (ew) r.flops += out * h * w;  // one op per pooled output
            }
            if (all) r.flops += out * h * w;  // GRN
            r.out = {1, out, h, w};
            push(std::move(r));
        }
    }

    const long long WL = cfg.stage_out_width(cfg.num_stages - 1);
    {
        CostRow r;
        r.name = "refiner";
        r.params = WL * 9 + bias * WL + 2 * WL;
        r.buffers = 2 * WL;
        r.flops = WL * 9 * h * w * M;
        if (ew) r.flops += WL * h * w;  // BN
        r.out = {1, WL, h, w};
        push(std::move(r));
    }
    {
        CostRow r;
        r.name = "head";
        r.params = WL * cfg.num_classes + cfg.num_classes;  // linear keeps its bias
        if (ew) r.flops += WL;                              // global average pool outputs
        r.flops += WL * cfg.num_classes * M;
        r.out = {1, cfg.num_classes, 1, 1};
        push(std::move(r));
    }
    return rep;
}

long long count_params(const GlimmerNetConfig& cfg, const CountOptions& popt) {
    return analyze_cost(cfg, popt, FlopOptions::full()).total_params;
}

long long count_flops(const GlimmerNetConfig& cfg, const FlopOptions& fopt) {
    return analyze_cost(cfg, {}, fopt).total_flops;
}

template <typename T>
std::vector<std::string> verify_counts(const Model<T>& model) {
    const CostReport rep = analyze_cost(model.cfg, {}, FlopOptions::full());
    std::map<std::string, std::pair<long long, long long>> actual;  // row -> {params, buffers}
    std::map<std::string, std::array<std::string, 2>> members;      // row -> entry listings
    for (const auto& e : model.params.entries) {
        // stem.conv.w -> stem; stage2.block1.bn.gamma -> stage2.block1;
        // stage2.agg.* -> stage2.agg; stage2.grn.* -> stage2.down
        std::string row;
        if (e.name.rfind("stem.", 0) == 0) {
            row = "stem";
        } else if (e.name.rfind("refiner.", 0) == 0) {
            row = "refiner";
        } else if (e.name.rfind("head.", 0) == 0) {
            row = "head";
        } else {
            const size_t dot = e.name.find('.');
            const size_t dot2 = e.name.find('.', dot + 1);
            const std::string part = e.name.substr(dot + 1, dot2 - dot - 1);
            row = e.name.substr(0, dot) + "." + (part == "grn" ? "down" : part);
        }
        auto& acc = actual[row];
        (e.trainable ? acc.first : acc.second) += e.value.numel();
        auto& lst = members[row][e.trainable ? 0 : 1];
        if (!lst.empty()) lst += ", ";
        lst += e.name + "=" + std::to_string(e.value.numel());
    }
    std::vector<std::string> diffs;
    for (const auto& r : rep.rows) {
        const auto it = actual.find(r.name);
        const long long ap = it == actual.end() ? 0 : it->second.first;
        const long long ab = it == actual.end() ? 0 : it->second.second;
        if (ap != r.params)
            diffs.push_back(r.name + ": analytic params " + std::to_string(r.params) +
                            " vs allocated " + std::to_string(ap) + " (" + members[r.name][0] +
                            ")");
        if (ab != r.buffers)
            diffs.push_back(r.name + ": analytic buffers " + std::to_string(r.buffers) +
                            " vs allocated " + std::to_string(ab) + " (" + members[r.name][1] +
                            ")");
        if (it != actual.end()) actual.erase(it);
    }
    for (const auto& [name, acc] : actual)
        diffs.push_back(name + ": allocated tensors not covered by the analytic report (" +
                        std::to_string(acc.first + acc.second) + " values)");
    return diffs;
}

template std::vector<std::string> verify_counts(const Model<float>&);
template std::vector<std::string> verify_counts(const Model<double>&);

std::string summary_text(const GlimmerNetConfig& cfg) {
    const CostReport rep = analyze_cost(cfg, {}, FlopOptions::full(cfg.mac_flops));
    const long long hooks = count_flops(cfg, FlopOptions::module_hooks());
    std::ostringstream os;
    os << "block                 output            params      flops\n";
    for (const auto& r : rep.rows) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-20s  %-16s  %8lld  %9lld\n", r.name.c_str(),
                      r.out.str().c_str(), r.params, r.flops);
        os << line;
    }
    os << "total params " << rep.total_params << " (+" << rep.total_buffers
       << " running-stat buffers)\n";
    os << "total flops " << rep.total_flops << " (mac=" << cfg.mac_flops
       << ", all ops); module-hook equivalent " << hooks << " (mac=1)\n";
    return os.str();
}

std::string summary_jsonl(const GlimmerNetConfig& cfg) {
    const CostReport rep = analyze_cost(cfg, {}, FlopOptions::full(cfg.mac_flops));
    std::ostringstream os;
    for (const auto& r : rep.rows) {
        nlohmann::json j;
        j["block"] = r.name;
        j["out"] = {r.out.n, r.out.c, r.out.h, r.out.w};
        j["params"] = r.params;
        j["flops"] = r.flops;
        os << j.dump() << "\n";
    }
    nlohmann::json t;
    t["total_params"] = rep.total_params;
    t["total_buffers"] = rep.total_buffers;
    t["total_flops"] = rep.total_flops;
    t["flops_module_hooks"] = count_flops(cfg, FlopOptions::module_hooks());
    os << t.dump() << "\n";
    return os.str();
}

}  // namespace glim
