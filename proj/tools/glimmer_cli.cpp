#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "glimmer.h"
#include "json.hpp"

using nlohmann::json;

namespace {

// 0 = success, 1 = a verification failed, 2 = usage/config/data error
int exit_code_for(int rc) { return rc == GLIM_OK ? 0 : rc == GLIM_ERR_CHECK ? 1 : 2; }

int report_error(int rc) {
    std::cerr << "error: " << glim_last_error() << "\n";
    return exit_code_for(rc);
}

struct StringOut {
    char* s = nullptr;
    ~StringOut() { glim_string_free(s); }
};

bool file_exists(const std::string& path) {
    std::ifstream f(path);
    return f.good();
}

// --config accepts a preset name or a JSON file path.
int open_config(const std::string& spec, glim_config** out) {
    if (file_exists(spec)) return glim_config_from_json_file(spec.c_str(), out);
    return glim_config_preset(spec.c_str(), out);
}

struct ConfigHandle {
    glim_config* cfg = nullptr;
    ~ConfigHandle() { glim_config_free(cfg); }
};
struct ModelHandle {
    glim_model* m = nullptr;
    ~ModelHandle() { glim_model_free(m); }
};
struct DatasetHandle {
    glim_dataset* d = nullptr;
    ~DatasetHandle() { glim_dataset_free(d); }
};

int open_model(const std::string& config_spec, uint64_t seed, const std::string& ckpt,
               ConfigHandle& cfg, ModelHandle& model) {
    if (int rc = open_config(config_spec, &cfg.cfg)) return rc;
    if (int rc = glim_model_build(cfg.cfg, seed, &model.m)) return rc;
    if (!ckpt.empty())
        if (int rc = glim_model_load_checkpoint(model.m, ckpt.c_str())) return rc;
    return GLIM_OK;
}

struct LineSink {
    std::ofstream* log = nullptr;
};

void emit_epoch_line(const char* line, void* user) {
    auto* sink = static_cast<LineSink*>(user);
    std::cout << line << "\n";
    if (sink->log) *sink->log << line << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GlimmerNet reference implementation"};
    app.set_version_flag("--version", glim_version());
    app.require_subcommand(1);

    int threads = 1;
    std::string kernel_path = "optimized";
    app.add_option("--threads", threads, "worker threads (default 1)");
    app.add_option("--kernel-path", kernel_path, "naive or optimized (default optimized)");

    // summary
    auto* cmd_summary = app.add_subcommand("summary", "per-module parameter/FLOP table");
    std::string sum_config = "aiderv2", sum_counts;
    bool sum_jsonl = false;
    cmd_summary->add_option("--config", sum_config, "preset name or config JSON file");
    cmd_summary->add_flag("--jsonl", sum_jsonl, "emit JSON lines instead of the table");
    cmd_summary->add_option("--counts", sum_counts, "also write counts as JSON lines to this file");

    // gradcheck
    auto* cmd_grad = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    std::string grad_scope = "all";
    uint64_t grad_seed = 42;
    cmd_grad->add_option("--scope", grad_scope,
                         "kernels, blocks, model, or all (default all); selftest runs a "
                         "deliberately broken case that must fail");
    cmd_grad->add_option("--seed", grad_seed, "rng seed (default 42)");

    // train
    auto* cmd_train = app.add_subcommand("train", "train on a manifest dataset");
    std::string tr_config, tr_data, tr_out, tr_log;
    int tr_epochs = 300, tr_batch = 64;
    uint64_t tr_seed = 42;
    bool tr_hflip = false;
    double tr_lr0 = 1e-3;
    cmd_train->add_option("--config", tr_config, "preset name or config JSON file")->required();
    cmd_train->add_option("--data", tr_data, "manifest.jsonl path")->required();
    cmd_train->add_option("--epochs", tr_epochs, "epochs (default 300)");
    cmd_train->add_option("--batch", tr_batch, "batch size (default 64)");
    cmd_train->add_option("--seed", tr_seed, "seed for init, shuffling and augmentation");
    cmd_train->add_flag("--hflip", tr_hflip, "random horizontal flips");
    cmd_train->add_option("--lr0", tr_lr0, "initial learning rate (default 1e-3)");
    cmd_train->add_option("--out", tr_out, "checkpoint path to write after training");
    cmd_train->add_option("--log", tr_log, "file receiving the same per-epoch JSON lines");

    // eval
    auto* cmd_eval = app.add_subcommand("eval", "metrics on a manifest dataset");
    std::string ev_config, ev_data, ev_ckpt;
    int ev_batch = 64;
    uint64_t ev_seed = 42;
    cmd_eval->add_option("--config", ev_config, "preset name or config JSON file")->required();
    cmd_eval->add_option("--data", ev_data, "manifest.jsonl path")->required();
    cmd_eval->add_option("--ckpt", ev_ckpt, "checkpoint to load");
    cmd_eval->add_option("--batch", ev_batch, "batch size (default 64)");
    cmd_eval->add_option("--seed", ev_seed, "init seed when no checkpoint is given");

    // infer
    auto* cmd_infer = app.add_subcommand("infer", "classify one image (.gltn or .ppm)");
    std::string in_config, in_image, in_ckpt, in_data;
    uint64_t in_seed = 42;
    cmd_infer->add_option("--config", in_config, "preset name or config JSON file")->required();
    cmd_infer->add_option("--image", in_image, "image path")->required();
    cmd_infer->add_option("--ckpt", in_ckpt, "checkpoint to load");
    cmd_infer->add_option("--data", in_data, "manifest supplying class names");
    cmd_infer->add_option("--seed", in_seed, "init seed when no checkpoint is given");

    // dump-features
    auto* cmd_dump = app.add_subcommand("dump-features", "write per-group mean activations as PGM");
    std::string df_config, df_image, df_ckpt, df_prefix = "features";
    int df_stage = 1;
    uint64_t df_seed = 42;
    cmd_dump->add_option("--config", df_config, "preset name or config JSON file")->required();
    cmd_dump->add_option("--image", df_image, "image path")->required();
    cmd_dump->add_option("--stage", df_stage, "1-based stage (default 1)");
    cmd_dump->add_option("--out-prefix", df_prefix, "output prefix (default 'features')");
    cmd_dump->add_option("--ckpt", df_ckpt, "checkpoint to load");
    cmd_dump->add_option("--seed", df_seed, "init seed when no checkpoint is given");

    // bench
    auto* cmd_bench = app.add_subcommand("bench", "naive-vs-optimized kernel timings");
    std::string be_op = "gddw", be_preset;
    int be_iters = 5;
    uint64_t be_seed = 42;
    cmd_bench->add_option("--op", be_op, "gddw, pwgroup, stage, or model (default gddw)");
    cmd_bench->add_option("--shape", be_preset, "shape preset; omit to run all for the op");
    cmd_bench->add_option("--iters", be_iters, "timed iterations per path (default 5)");
    cmd_bench->add_option("--seed", be_seed, "rng seed (default 42)");

    // make-synth
    auto* cmd_synth = app.add_subcommand("make-synth", "generate a striped synthetic dataset");
    std::string sy_dir;
    std::vector<int> sy_hw{32, 32};
    int sy_classes = 4, sy_per = 25;
    uint64_t sy_seed = 42;
    cmd_synth->add_option("--out", sy_dir, "output directory")->required();
    cmd_synth->add_option("--classes", sy_classes, "class count, 2..8 (default 4)");
    cmd_synth->add_option("--per-class", sy_per, "images per class (default 25)");
    cmd_synth->add_option("--hw", sy_hw, "image height and width (default 32 32)")->expected(2);
    cmd_synth->add_option("--seed", sy_seed, "rng seed (default 42)");

    CLI11_PARSE(app, argc, argv);

    if (int rc = glim_set_threads(threads)) return report_error(rc);
    if (int rc = glim_set_kernel_path(kernel_path.c_str())) return report_error(rc);

    if (cmd_summary->parsed()) {
        ConfigHandle cfg;
        if (int rc = open_config(sum_config, &cfg.cfg)) return report_error(rc);
        StringOut text;
        const int rc = sum_jsonl ? glim_summary_jsonl(cfg.cfg, &text.s)
                                 : glim_summary_text(cfg.cfg, &text.s);
        if (rc) return report_error(rc);
        std::cout << text.s;
        if (!sum_counts.empty()) {
            StringOut jsonl;
            if (int rc2 = glim_summary_jsonl(cfg.cfg, &jsonl.s)) return report_error(rc2);
            std::ofstream counts(sum_counts, std::ios::binary | std::ios::trunc);
            if (!counts) {
                std::cerr << "error: cannot write " << sum_counts << "\n";
                return 2;
            }
            counts << jsonl.s;
        }
        return 0;
    }

    if (cmd_grad->parsed()) {
        const std::vector<std::string> scopes =
            grad_scope == "all" ? std::vector<std::string>{"kernels", "blocks", "model"}
                                : std::vector<std::string>{grad_scope};
        bool failed = false;
        for (const auto& scope : scopes) {
            StringOut lines;
            const int rc = glim_gradcheck(scope.c_str(), grad_seed, &lines.s);
            if (rc != GLIM_OK && rc != GLIM_ERR_CHECK) return report_error(rc);
            if (lines.s) std::cout << lines.s;
            if (rc == GLIM_ERR_CHECK) {
                std::cerr << "error: " << glim_last_error() << "\n";
                failed = true;
            }
        }
        return failed ? 1 : 0;
    }

    if (cmd_train->parsed()) {
        ConfigHandle cfg;
        ModelHandle model;
        if (int rc = open_model(tr_config, tr_seed, "", cfg, model)) return report_error(rc);
        DatasetHandle data;
        if (int rc = glim_dataset_load(tr_data.c_str(), &data.d)) return report_error(rc);
        std::ofstream log;
        LineSink sink;
        if (!tr_log.empty()) {
            log.open(tr_log, std::ios::binary | std::ios::trunc);
            if (!log) {
                std::cerr << "error: cannot open log file " << tr_log << "\n";
                return 2;
            }
            sink.log = &log;
        }
        const json opts{{"epochs", tr_epochs}, {"batch", tr_batch},   {"seed", tr_seed},
                        {"hflip", tr_hflip},   {"lr0", tr_lr0}};
        if (int rc = glim_train(model.m, data.d, opts.dump().c_str(), emit_epoch_line, &sink))
            return report_error(rc);
        if (!tr_out.empty())
            if (int rc = glim_model_save(model.m, tr_out.c_str())) return report_error(rc);
        return 0;
    }

    if (cmd_eval->parsed()) {
        ConfigHandle cfg;
        ModelHandle model;
        if (int rc = open_model(ev_config, ev_seed, ev_ckpt, cfg, model)) return report_error(rc);
        DatasetHandle data;
        if (int rc = glim_dataset_load(ev_data.c_str(), &data.d)) return report_error(rc);
        StringOut out;
        if (int rc = glim_evaluate(model.m, data.d, ev_batch, &out.s)) return report_error(rc);
        std::cout << out.s << "\n";
        return 0;
    }

    if (cmd_infer->parsed()) {
        ConfigHandle cfg;
        ModelHandle model;
        if (int rc = open_model(in_config, in_seed, in_ckpt, cfg, model)) return report_error(rc);
        StringOut out;
        if (int rc = glim_infer_image(model.m, in_image.c_str(), &out.s)) return report_error(rc);
        if (in_data.empty()) {
            std::cout << out.s << "\n";
            return 0;
        }
        DatasetHandle data;
        if (int rc = glim_dataset_load(in_data.c_str(), &data.d)) return report_error(rc);
        StringOut names;
        if (int rc = glim_dataset_classes(data.d, &names.s)) return report_error(rc);
        json result = json::parse(out.s);
        const json classes = json::parse(names.s);
        const auto pred = result["pred"].get<size_t>();
        if (pred < classes.size()) result["class"] = classes[pred];
        std::cout << result.dump() << "\n";
        return 0;
    }

    if (cmd_dump->parsed()) {
        ConfigHandle cfg;
        ModelHandle model;
        if (int rc = open_model(df_config, df_seed, df_ckpt, cfg, model)) return report_error(rc);
        StringOut out;
        if (int rc = glim_dump_group_features(model.m, df_image.c_str(), df_stage,
                                              df_prefix.c_str(), &out.s))
            return report_error(rc);
        std::cout << out.s << "\n";
        return 0;
    }

    if (cmd_bench->parsed()) {
        std::vector<std::string> presets;
        if (!be_preset.empty()) {
            presets.push_back(be_preset);
        } else if (be_op == "gddw" || be_op == "pwgroup") {
            presets = {"stage1", "stage2", "stage3", "stage4"};
        } else if (be_op == "stage") {
            presets = {"stage1"};
        } else {
            presets = {"aiderv2"};
        }
        for (const auto& preset : presets) {
            StringOut out;
            if (int rc = glim_bench(be_op.c_str(), preset.c_str(), be_iters, be_seed, &out.s))
                return report_error(rc);
            std::cout << out.s << "\n";
        }
        return 0;
    }

    if (cmd_synth->parsed()) {
        StringOut manifest;
        if (int rc = glim_make_synth(sy_dir.c_str(), sy_classes, sy_per, sy_hw[0], sy_hw[1],
                                     sy_seed, &manifest.s))
            return report_error(rc);
        std::cout << manifest.s << "\n";
        return 0;
    }

    std::cerr << "error: no subcommand\n";
    return 2;
}
