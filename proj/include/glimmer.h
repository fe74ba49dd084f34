#ifndef GLIMMER_H
#define GLIMMER_H

/* C interface to the glimmer shared library. All functions returning int use
 * 0 for success and a GLIM_ERR_* code otherwise; glim_last_error() describes
 * the most recent failure on the calling thread. Strings returned through
 * char** out-parameters are heap-allocated and must be released with
 * glim_string_free(). */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define GLIM_OK 0
#define GLIM_ERR_INVALID 1  /* bad argument or configuration */
#define GLIM_ERR_IO 2       /* file missing or unreadable/unwritable */
#define GLIM_ERR_DATA 3     /* malformed file contents */
#define GLIM_ERR_CHECK 4    /* a verification (gradcheck, counts) failed */
#define GLIM_ERR_INTERNAL 5

typedef struct glim_config glim_config;
typedef struct glim_model glim_model;
typedef struct glim_dataset glim_dataset;

const char* glim_version(void);
const char* glim_last_error(void);

int glim_set_threads(int n);
/* "naive" or "optimized" */
int glim_set_kernel_path(const char* name);

/* ---- configuration ---- */
int glim_config_preset(const char* name, glim_config** out);
int glim_config_from_json_file(const char* path, glim_config** out);
int glim_config_to_json(const glim_config* cfg, char** out_json);
void glim_config_free(glim_config* cfg);

/* ---- model lifecycle ---- */
int glim_model_build(const glim_config* cfg, uint64_t seed, glim_model** out);
void glim_model_free(glim_model* m);
int glim_model_save(const glim_model* m, const char* path);
int glim_model_load_checkpoint(glim_model* m, const char* path);

/* ---- analytic parameter/FLOP accounting ---- */
int glim_summary_text(const glim_config* cfg, char** out_text);
int glim_summary_jsonl(const glim_config* cfg, char** out_jsonl);
/* conv_bias nonzero adds per-conv bias terms to the parameter total */
int glim_count_params(const glim_config* cfg, int conv_bias, int64_t* out_params);
/* options_json keys (all optional): "mac_flops" (1 or 2), "count_norm_act"
 * (bool), "scope" ("all_ops" or "module_visible"). NULL means defaults. */
int glim_count_flops(const glim_config* cfg, const char* options_json, int64_t* out_flops);
/* GLIM_ERR_CHECK when the analytic counts disagree with allocated tensors. */
int glim_model_verify_counts(const glim_model* m);

/* Runs finite-difference gradient verification for scope "kernels", "blocks"
 * or "model"; writes one JSON object per case. GLIM_ERR_CHECK if any fails. */
int glim_gradcheck(const char* scope, uint64_t seed, char** out_jsonl);

/* ---- data ---- */
int glim_dataset_load(const char* manifest_path, glim_dataset** out);
void glim_dataset_free(glim_dataset* d);
int64_t glim_dataset_size(const glim_dataset* d);
int glim_dataset_classes(const glim_dataset* d, char** out_json);
int glim_make_synth(const char* dir, int classes, int per_class, int h, int w, uint64_t seed,
                    char** out_manifest_path);

/* ---- training and evaluation ---- */
typedef void (*glim_line_cb)(const char* line, void* user);

/* options_json keys (all optional): "epochs", "batch", "seed", "hflip",
 * "lr0", "decay_gamma", "step_epochs", "alpha", "momentum", "weight_decay",
 * "eps". on_epoch (may be NULL) receives one JSON line per epoch. */
int glim_train(glim_model* m, const glim_dataset* d, const char* options_json,
               glim_line_cb on_epoch, void* user);
int glim_evaluate(glim_model* m, const glim_dataset* d, int batch, char** out_json);

/* ---- inference ---- */
int glim_infer_image(glim_model* m, const char* image_path, char** out_json);
/* chw is a packed float image (c,h,w) in [0,1]; out_probs must hold
 * num_classes floats. */
int glim_model_predict(glim_model* m, const float* chw, int64_t c, int64_t h, int64_t w,
                       float* out_probs, int* out_pred);
/* Writes one PGM per dilation group (group-mean activation of the last block
 * of the 1-based stage) named <out_prefix>_g<k>.pgm. */
int glim_dump_group_features(glim_model* m, const char* image_path, int stage,
                             const char* out_prefix, char** out_json);

/* ---- kernel path benchmark ---- */
/* op: "gddw", "pwgroup", "stage", "model"; preset: "stage1".."stage4" or
 * "aiderv2" depending on op. */
int glim_bench(const char* op, const char* preset, int iters, uint64_t seed, char** out_json);

void glim_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* GLIMMER_H */
