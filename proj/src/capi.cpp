#include "glimmer.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bench.hpp"
#include "costing.hpp"
#include "dataio.hpp"
#include "gradcheck.hpp"
#include "json.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "train.hpp"

using nlohmann::json;

struct glim_config {
    glim::GlimmerNetConfig cfg;
};
struct glim_model {
    glim::Model<float> model;
};
struct glim_dataset {
    glim::Dataset data;
};

namespace {

thread_local std::string g_last_error;

int set_error(int code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

int map_err(const glim::Error& e) {
    switch (e.code()) {
        case glim::ErrCode::invalid_argument: return GLIM_ERR_INVALID;
        case glim::ErrCode::io: return GLIM_ERR_IO;
        case glim::ErrCode::data: return GLIM_ERR_DATA;
        case glim::ErrCode::check_failed: return GLIM_ERR_CHECK;
    }
    return GLIM_ERR_INTERNAL;
}

template <typename F>
int guarded(F&& f) {
    try {
        return f();
    } catch (const glim::Error& e) {
        return set_error(map_err(e), e.what());
    } catch (const json::exception& e) {
        return set_error(GLIM_ERR_INVALID, e.what());
    } catch (const std::exception& e) {
        return set_error(GLIM_ERR_INTERNAL, e.what());
    } catch (...) {
        return set_error(GLIM_ERR_INTERNAL, "unknown error");
    }
}

int require(bool ok, const char* what) {
    return ok ? GLIM_OK : set_error(GLIM_ERR_INVALID, std::string("null argument: ") + what);
}

char* dup_string(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (p) std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const auto& k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) glim::fail(glim::ErrCode::invalid_argument, "unknown option: " + it.key());
    }
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

glim::TensorF load_image_any(const std::string& path) {
    if (ends_with(path, ".ppm")) return glim::read_ppm(path);
    if (ends_with(path, ".gltn")) {
        if (glim::tensor_file_dtype(path) == glim::DType::f32)
            return glim::read_tensor_file<float>(path);
        return glim::read_tensor_file<double>(path).cast<float>();
    }
    glim::fail(glim::ErrCode::invalid_argument, "unsupported image extension: " + path);
}

void check_input_dims(const glim::Model<float>& m, const glim::Dims& d) {
    if (d.n != 1 || d.c != 3 || d.h != m.cfg.input_hw[0] || d.w != m.cfg.input_hw[1])
        glim::fail(glim::ErrCode::invalid_argument,
                   "image dims " + d.str() + " do not match model input (1,3," +
                       std::to_string(m.cfg.input_hw[0]) + "," + std::to_string(m.cfg.input_hw[1]) +
                       ")");
}

std::vector<float> softmax_row(const glim::TensorF& logits) {
    std::vector<float> p(static_cast<size_t>(logits.numel()));
    float mx = logits.data()[0];
    for (int64_t i = 1; i < logits.numel(); ++i) mx = std::max(mx, logits.data()[i]);
    double sum = 0;
    for (int64_t i = 0; i < logits.numel(); ++i) {
        p[static_cast<size_t>(i)] = std::exp(logits.data()[i] - mx);
        sum += p[static_cast<size_t>(i)];
    }
    for (auto& v : p) v = static_cast<float>(v / sum);
    return p;
}

json metrics_to_json(const glim::Metrics& m) {
    return json{{"accuracy", m.accuracy},     {"weighted_f1", m.weighted_f1},
                {"mean_loss", m.mean_loss},   {"confusion", m.confusion},
                {"precision", m.precision},   {"recall", m.recall},
                {"f1", m.f1},                 {"support", m.support}};
}

}  // namespace

extern "C" {

const char* glim_version(void) { return "1.0.0"; }

const char* glim_last_error(void) { return g_last_error.c_str(); }

int glim_set_threads(int n) {
    return guarded([&] {
        glim::set_num_threads(n);
        return GLIM_OK;
    });
}

int glim_set_kernel_path(const char* name) {
    if (int rc = require(name, "name")) return rc;
    return guarded([&]() -> int {
        const std::string s = name;
        if (s == "naive")
            glim::set_kernel_path(glim::KernelPath::naive);
        else if (s == "optimized")
            glim::set_kernel_path(glim::KernelPath::optimized);
        else
            glim::fail(glim::ErrCode::invalid_argument, "unknown kernel path: " + s);
        return GLIM_OK;
    });
}

int glim_config_preset(const char* name, glim_config** out) {
    if (int rc = require(name, "name")) return rc;
    if (int rc = require(out, "out")) return rc;
    return guarded([&] {
        auto* c = new glim_config{glim::preset_config(name)};
        *out = c;
        return GLIM_OK;
    });
}

int glim_config_from_json_file(const char* path, glim_config** out) {
    if (int rc = require(path, "path")) return rc;
    if (int rc = require(out, "out")) return rc;
    return guarded([&]() -> int {
        std::ifstream in(path, std::ios::binary);
        if (!in) glim::fail(glim::ErrCode::io, std::string("cannot open ") + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        auto* c = new glim_config{glim::config_from_json(ss.str())};
        *out = c;
        return GLIM_OK;
    });
}

int glim_config_to_json(const glim_config* cfg, char** out_json) {
    if (int rc = require(cfg, "cfg")) return rc;
    if (int rc = require(out_json, "out_json")) return rc;
    return guarded([&] {
        *out_json = dup_string(glim::config_to_json(cfg->cfg));
        return GLIM_OK;
    });
}

void glim_config_free(glim_config* cfg) { delete cfg; }

int glim_model_build(const glim_config* cfg, uint64_t seed, glim_model** out) {
    if (int rc = require(cfg, "cfg")) return rc;
    if (int rc = require(out, "out")) return rc;
    return guarded([&] {
        auto* m = new glim_model{glim::build_model<float>(cfg->cfg, seed)};
        *out = m;
        return GLIM_OK;
    });
}

void glim_model_free(glim_model* m) { delete m; }

int glim_model_save(const glim_model* m, const char* path) {
    if (int rc = require(m, "m")) return rc;
    if (int rc = require(path, "path")) return rc;
    return guarded([&] {
        glim::save_checkpoint(m->model.params, path);
        return GLIM_OK;
    });
}

int glim_model_load_checkpoint(glim_model* m, const char* path) {
    if (int rc = require(m, "m")) return rc;
    if (int rc = require(path, "path")) return rc;
    return guarded([&] {
        glim::load_checkpoint(m->model.params, path);
        return GLIM_OK;
    });
}

int glim_summary_text(const glim_config* cfg, char** out_text) {
    if (int rc = require(cfg, "cfg")) return rc;
    if (int rc = require(out_text, "out_text")) return rc;
    return guarded([&] {
        *out_text = dup_string(glim::summary_text(cfg->cfg));
        return GLIM_OK;
    });
}

int glim_summary_jsonl(const glim_config* cfg, char** out_jsonl) {
    if (int rc = require(cfg, "cfg")) return rc;
    if (int rc = require(out_jsonl, "out_jsonl")) return rc;
    return guarded([&] {
        *out_jsonl = dup_string(glim::summary_jsonl(cfg->cfg));
        return GLIM_OK;
    });
}

int glim_count_params(const glim_config* cfg, int conv_bias, int64_t* out_params) {
    if (int rc = require(cfg, "cfg")) return rc;
    if (int rc = require(out_params, "out_params")) return rc;
    return guarded([&] {
        glim::CountOptions popt;
        popt.conv_bias = conv_bias != 0;
        *out_params = glim::count_params(cfg->cfg, popt);
        return GLIM_OK;
    });
}

int glim_count_flops(const glim_config* cfg, const char* options_json, int64_t* out_flops) {
    if (int rc = require(cfg, "cfg")) return rc;
    if (int rc = require(out_flops, "out_flops")) return rc;
    return guarded([&]() -> int {
        glim::FlopOptions fopt;
        if (options_json && *options_json) {
            json j = json::parse(options_json);
            reject_unknown_keys(j, {"mac_flops", "count_norm_act", "scope"});
            if (j.contains("mac_flops")) fopt.mac_flops = j["mac_flops"].get<int>();
            if (j.contains("count_norm_act")) fopt.count_norm_act = j["count_norm_act"].get<bool>();
            if (j.contains("scope")) {
                const std::string s = j["scope"].get<std::string>();
                if (s == "all_ops")
                    fopt.scope = glim::FlopOptions::Scope::all_ops;
                else if (s == "module_visible")
                    fopt.scope = glim::FlopOptions::Scope::module_visible;
                else
                    glim::fail(glim::ErrCode::invalid_argument, "unknown flop scope: " + s);
            }
        }
        *out_flops = glim::count_flops(cfg->cfg, fopt);
        return GLIM_OK;
    });
}

int glim_model_verify_counts(const glim_model* m) {
    if (int rc = require(m, "m")) return rc;
    return guarded([&]() -> int {
        const auto mismatches = glim::verify_counts(m->model);
        if (mismatches.empty()) return GLIM_OK;
        std::string msg = "count verification failed:";
        for (const auto& s : mismatches) msg += "\n  " + s;
        return set_error(GLIM_ERR_CHECK, msg);
    });
}

int glim_gradcheck(const char* scope, uint64_t seed, char** out_jsonl) {
    if (int rc = require(scope, "scope")) return rc;
    if (int rc = require(out_jsonl, "out_jsonl")) return rc;
    return guarded([&]() -> int {
        const auto cases = glim::gradcheck_run(scope, seed);
        std::string lines;
        std::string failed;
        for (const auto& c : cases) {
            json j{{"name", c.name},
                   {"max_rel_err", c.max_rel_err},
                   {"coords", c.coords},
                   {"pass", c.pass},
                   {"worst", c.worst}};
            lines += j.dump();
            lines += '\n';
            if (!c.pass) failed += (failed.empty() ? "" : ", ") + c.name + " at " + c.worst;
        }
        *out_jsonl = dup_string(lines);
        if (!failed.empty()) return set_error(GLIM_ERR_CHECK, "gradient check failed: " + failed);
        return GLIM_OK;
    });
}

int glim_dataset_load(const char* manifest_path, glim_dataset** out) {
    if (int rc = require(manifest_path, "manifest_path")) return rc;
    if (int rc = require(out, "out")) return rc;
    return guarded([&] {
        auto* d = new glim_dataset{glim::load_manifest(manifest_path)};
        *out = d;
        return GLIM_OK;
    });
}

void glim_dataset_free(glim_dataset* d) { delete d; }

int64_t glim_dataset_size(const glim_dataset* d) {
    return d ? static_cast<int64_t>(d->data.images.size()) : 0;
}

int glim_dataset_classes(const glim_dataset* d, char** out_json) {
    if (int rc = require(d, "d")) return rc;
    if (int rc = require(out_json, "out_json")) return rc;
    return guarded([&] {
        *out_json = dup_string(json(d->data.class_names).dump());
        return GLIM_OK;
    });
}

int glim_make_synth(const char* dir, int classes, int per_class, int h, int w, uint64_t seed,
                    char** out_manifest_path) {
    if (int rc = require(dir, "dir")) return rc;
    if (int rc = require(out_manifest_path, "out_manifest_path")) return rc;
    return guarded([&] {
        *out_manifest_path = dup_string(glim::generate_synth(dir, classes, per_class, h, w, seed));
        return GLIM_OK;
    });
}

int glim_train(glim_model* m, const glim_dataset* d, const char* options_json,
               glim_line_cb on_epoch, void* user) {
    if (int rc = require(m, "m")) return rc;
    if (int rc = require(d, "d")) return rc;
    return guarded([&]() -> int {
        glim::TrainOptions topt;
        if (options_json && *options_json) {
            json j = json::parse(options_json);
            reject_unknown_keys(j, {"epochs", "batch", "seed", "hflip", "lr0", "decay_gamma",
                                    "step_epochs", "alpha", "momentum", "weight_decay", "eps"});
            if (j.contains("epochs")) topt.epochs = j["epochs"].get<int>();
            if (j.contains("batch")) topt.batch = j["batch"].get<int>();
            if (j.contains("seed")) topt.seed = j["seed"].get<uint64_t>();
            if (j.contains("hflip")) topt.hflip = j["hflip"].get<bool>();
            if (j.contains("lr0")) topt.opt.lr0 = j["lr0"].get<double>();
            if (j.contains("decay_gamma")) topt.opt.decay_gamma = j["decay_gamma"].get<double>();
            if (j.contains("step_epochs")) topt.opt.step_epochs = j["step_epochs"].get<int>();
            if (j.contains("alpha")) topt.opt.alpha = j["alpha"].get<double>();
            if (j.contains("momentum")) topt.opt.momentum = j["momentum"].get<double>();
            if (j.contains("weight_decay")) topt.opt.weight_decay = j["weight_decay"].get<double>();
            if (j.contains("eps")) topt.opt.eps = j["eps"].get<double>();
        }
        auto cb = [&](const glim::EpochStat& s) {
            if (!on_epoch) return;
            json line{{"epoch", s.epoch}, {"loss", s.loss}, {"lr", s.lr}, {"train_acc", s.train_acc}};
            const std::string text = line.dump();
            on_epoch(text.c_str(), user);
        };
        glim::train_epochs(m->model, d->data, topt, cb);
        return GLIM_OK;
    });
}

int glim_evaluate(glim_model* m, const glim_dataset* d, int batch, char** out_json) {
    if (int rc = require(m, "m")) return rc;
    if (int rc = require(d, "d")) return rc;
    if (int rc = require(out_json, "out_json")) return rc;
    return guarded([&] {
        const glim::Metrics metrics = glim::evaluate(m->model, d->data, batch);
        *out_json = dup_string(metrics_to_json(metrics).dump());
        return GLIM_OK;
    });
}

int glim_infer_image(glim_model* m, const char* image_path, char** out_json) {
    if (int rc = require(m, "m")) return rc;
    if (int rc = require(image_path, "image_path")) return rc;
    if (int rc = require(out_json, "out_json")) return rc;
    return guarded([&] {
        glim::TensorF img = load_image_any(image_path);
        check_input_dims(m->model, img.dims());
        glim::TensorF logits = glim::model_forward(m->model, img, glim::Mode::infer);
        const std::vector<float> probs = softmax_row(logits);
        int pred = 0;
        for (size_t k = 1; k < probs.size(); ++k)
            if (probs[k] > probs[static_cast<size_t>(pred)]) pred = static_cast<int>(k);
        *out_json = dup_string(json{{"pred", pred}, {"probs", probs}}.dump());
        return GLIM_OK;
    });
}

int glim_model_predict(glim_model* m, const float* chw, int64_t c, int64_t h, int64_t w,
                       float* out_probs, int* out_pred) {
    if (int rc = require(m, "m")) return rc;
    if (int rc = require(chw, "chw")) return rc;
    if (int rc = require(out_probs, "out_probs")) return rc;
    if (int rc = require(out_pred, "out_pred")) return rc;
    return guarded([&] {
        glim::Dims d{1, c, h, w};
        glim::TensorF img(d, std::vector<float>(chw, chw + d.numel()));
        check_input_dims(m->model, img.dims());
        glim::TensorF logits = glim::model_forward(m->model, img, glim::Mode::infer);
        const std::vector<float> probs = softmax_row(logits);
        int pred = 0;
        for (size_t k = 1; k < probs.size(); ++k)
            if (probs[k] > probs[static_cast<size_t>(pred)]) pred = static_cast<int>(k);
        std::memcpy(out_probs, probs.data(), probs.size() * sizeof(float));
        *out_pred = pred;
        return GLIM_OK;
    });
}

int glim_dump_group_features(glim_model* m, const char* image_path, int stage,
                             const char* out_prefix, char** out_json) {
    if (int rc = require(m, "m")) return rc;
    if (int rc = require(image_path, "image_path")) return rc;
    if (int rc = require(out_prefix, "out_prefix")) return rc;
    if (int rc = require(out_json, "out_json")) return rc;
    return guarded([&]() -> int {
        const auto& cfg = m->model.cfg;
        if (stage < 1 || stage > cfg.num_stages)
            glim::fail(glim::ErrCode::invalid_argument,
                       "stage must be in [1, " + std::to_string(cfg.num_stages) + "]");
        glim::TensorF img = load_image_any(image_path);
        check_input_dims(m->model, img.dims());
        glim::ModelTaps<float> taps;
        glim::model_forward<float>(m->model, img, glim::Mode::infer, nullptr, &taps);
        const glim::TensorF& feat = taps.stage_gd_out[static_cast<size_t>(stage - 1)];
        const int64_t C = feat.dims().c, H = feat.dims().h, W = feat.dims().w;
        const int64_t cpg = C / cfg.m;
        json files = json::array();
        for (int g = 0; g < cfg.m; ++g) {
            glim::TensorF plane({1, 1, H, W});
            for (int64_t ch = g * cpg; ch < (g + 1) * cpg; ++ch)
                for (int64_t y = 0; y < H; ++y)
                    for (int64_t x = 0; x < W; ++x)
                        plane.at(0, 0, y, x) += feat.at(0, ch, y, x) / static_cast<float>(cpg);
            const std::string path = std::string(out_prefix) + "_g" + std::to_string(g + 1) + ".pgm";
            glim::write_pgm(path, plane);
            files.push_back(path);
        }
        *out_json = dup_string(json{{"stage", stage},
                                    {"groups", cfg.m},
                                    {"height", H},
                                    {"width", W},
                                    {"files", files}}
                                   .dump());
        return GLIM_OK;
    });
}

int glim_bench(const char* op, const char* preset, int iters, uint64_t seed, char** out_json) {
    if (int rc = require(op, "op")) return rc;
    if (int rc = require(preset, "preset")) return rc;
    if (int rc = require(out_json, "out_json")) return rc;
    return guarded([&] {
        const glim::BenchResult r = glim::run_bench(op, preset, iters, seed);
        json j{{"op", r.op},
               {"preset", r.preset},
               {"iters", r.iters},
               {"naive_ms", json{{"median", r.naive_med_ms}, {"p10", r.naive_p10_ms}, {"p90", r.naive_p90_ms}}},
               {"optimized_ms", json{{"median", r.opt_med_ms}, {"p10", r.opt_p10_ms}, {"p90", r.opt_p90_ms}}},
               {"max_abs_diff", r.max_abs_diff}};
        *out_json = dup_string(j.dump());
        return GLIM_OK;
    });
}

void glim_string_free(char* s) { std::free(s); }

}  // extern "C"
