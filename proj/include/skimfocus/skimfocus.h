#ifndef SKIMFOCUS_SKIMFOCUS_H
#define SKIMFOCUS_SKIMFOCUS_H

/* C interface to the skim/focus repetition counter.
 *
 * Every fallible call returns an sfn_status. On failure a message describing
 * the last error on the calling thread is available from sfn_last_error().
 * Handles are opaque and owned by the caller until passed to the matching
 * destroy function.
 *
 * Functions returning text write a NUL-terminated string into `buf` (at most
 * `cap` bytes) and store the full length including the terminator in
 * `*needed` when it is non-null. A buffer that is too small yields
 * SFN_ERR_INVALID_ARGUMENT with `*needed` still set. */

#include <stddef.h>
#include <stdint.h>

#if defined(SFN_BUILDING_LIBRARY)
#define SFN_API __attribute__((visibility("default")))
#else
#define SFN_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sfn_status {
  SFN_OK = 0,
  SFN_ERR_INVALID_ARGUMENT = 1,
  SFN_ERR_UNKNOWN_KEY = 2,
  SFN_ERR_IO = 3,
  SFN_ERR_FORMAT = 4,
  SFN_ERR_NUMERIC = 5,
  SFN_ERR_RUNTIME = 6
} sfn_status;

typedef struct sfn_config sfn_config;
typedef struct sfn_model sfn_model;

SFN_API const char* sfn_last_error(void);
SFN_API const char* sfn_version(void);

/* Configuration. Later calls override earlier ones key by key. */
SFN_API sfn_status sfn_config_create(sfn_config** out);
SFN_API void sfn_config_destroy(sfn_config* cfg);
SFN_API sfn_status sfn_config_apply_preset(sfn_config* cfg, const char* name);
SFN_API sfn_status sfn_config_load_file(sfn_config* cfg, const char* path);
/* Applies the resolved_config.txt stored next to a checkpoint, if any;
 * `*loaded` tells whether one was found. */
SFN_API sfn_status sfn_config_load_checkpoint_snapshot(sfn_config* cfg, const char* checkpoint, int* loaded);
SFN_API sfn_status sfn_config_set(sfn_config* cfg, const char* key, const char* value);
/* `assignment` is "key=value". */
SFN_API sfn_status sfn_config_apply_override(sfn_config* cfg, const char* assignment);
SFN_API sfn_status sfn_config_get(const sfn_config* cfg, const char* key, char* buf, size_t cap, size_t* needed);
SFN_API sfn_status sfn_config_snapshot(const sfn_config* cfg, char* buf, size_t cap, size_t* needed);
SFN_API sfn_status sfn_config_write_snapshot(const sfn_config* cfg, const char* out_dir);
/* One line per key: name, default and description separated by tabs. */
SFN_API sfn_status sfn_config_describe(char* buf, size_t cap, size_t* needed);

/* Datasets. */
SFN_API sfn_status sfn_synth(const sfn_config* cfg, const char* out_dir);
SFN_API sfn_status sfn_compose_multirep(const sfn_config* cfg, const char* out_dir);
/* Resolves a dataset directory or manifest to the manifest of `split`. */
SFN_API sfn_status sfn_manifest_path(const char* data, const char* split, char* buf, size_t cap, size_t* needed);

/* Training writes model.sfnc, trace.csv, train_summary.json and the
 * resolved configuration under `out_dir`. `verbose` logs epochs to stderr. */
SFN_API sfn_status sfn_train(const sfn_config* cfg, const char* data_dir, const char* out_dir, int verbose);

/* Models. The configuration is copied into the model. */
SFN_API sfn_status sfn_model_create(const sfn_config* cfg, sfn_model** out);
SFN_API sfn_status sfn_model_load(const sfn_config* cfg, const char* checkpoint, sfn_model** out);
SFN_API sfn_status sfn_model_save(const sfn_model* model, const char* path);
SFN_API void sfn_model_destroy(sfn_model* model);

/* Counts repetitions in one row-major `frames` x `width` feature matrix.
 * In specified mode `exemplar` (exemplar_frames x width) is required;
 * otherwise it may be null. */
SFN_API sfn_status sfn_model_count(const sfn_model* model, const float* features, size_t frames, size_t width,
                                   const float* exemplar, size_t exemplar_frames, double* count);

/* Writes metrics.json and metrics.csv; `mae` is NaN when every item has a
 * zero ground-truth count. */
SFN_API sfn_status sfn_evaluate(const sfn_model* model, const char* manifest, const char* out_dir, double* mae,
                                double* obo);
/* Writes predictions.jsonl and, when `plot`, SVG density plots. */
SFN_API sfn_status sfn_predict(const sfn_model* model, const char* manifest, const char* out_dir, int plot);
/* Renders plots from a predictions.jsonl file. */
SFN_API sfn_status sfn_plot(const char* predictions, const char* out_dir, size_t* rendered);

/* Finite-difference verification of every primitive and the composed
 * blocks; writes gradcheck.json. */
SFN_API sfn_status sfn_gradcheck(double tolerance, uint64_t seed, const char* out_dir, int* passed,
                                 double* worst_rel_error);

/* Grid is "key=v1,v2;key2=v3". Writes ablation.csv. */
SFN_API sfn_status sfn_ablate(const sfn_config* cfg, const char* data_dir, const char* grid, const char* out_dir,
                              int verbose);

SFN_API sfn_status sfn_metrics(const double* preds, const double* gts, size_t n, double* mae, double* obo);

/* Skim-branch forward passes executed in this process. */
SFN_API uint64_t sfn_skim_forward_calls(void);

#ifdef __cplusplus
}
#endif

#endif
