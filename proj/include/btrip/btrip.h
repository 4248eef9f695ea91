/*
 * C interface to the btrip engine: streaming Bayesian triplet sampling,
 * embedding training and Recall@k evaluation.
 *
 * Every call returns a btrip_status. On failure the message for the calling
 * thread is available from btrip_last_error() until the next failing call.
 * Handles are opaque; each *_create / *_load / *_train result must be released
 * with the matching *_destroy function. Destroy functions accept NULL.
 */
#ifndef BTRIP_H
#define BTRIP_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(BTRIP_BUILDING_LIBRARY)
#    define BTRIP_API __declspec(dllexport)
#  else
#    define BTRIP_API __declspec(dllimport)
#  endif
#else
#  define BTRIP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as CLI exit codes. */
typedef enum btrip_status {
  BTRIP_OK = 0,
  BTRIP_E_ARGUMENT = 1, /* null handle/pointer, bad enum, short buffer */
  BTRIP_E_CONFIG = 2,   /* unknown key, invalid value or parameter */
  BTRIP_E_DATA = 3,     /* missing/corrupt files, dimension or count mismatch */
  BTRIP_E_NUMERIC = 4,  /* non-positive-definite covariance, non-finite loss */
  BTRIP_E_INTERNAL = 5
} btrip_status;

typedef struct btrip_config btrip_config;
typedef struct btrip_data btrip_data;
typedef struct btrip_model btrip_model;
typedef struct btrip_run btrip_run;
typedef struct btrip_tracker btrip_tracker;

typedef enum btrip_loss_kind { BTRIP_LOSS_TRIPLET = 0, BTRIP_LOSS_NCA = 1 } btrip_loss_kind;
typedef enum btrip_cov_mode { BTRIP_COV_STANDARD = 0, BTRIP_COV_PAPER_LITERAL = 1 } btrip_cov_mode;

BTRIP_API const char* btrip_last_error(void);
BTRIP_API const char* btrip_version(void);

/* ---- configuration (flat key=value settings) ---- */
BTRIP_API btrip_status btrip_config_create(btrip_config** out);
BTRIP_API void btrip_config_destroy(btrip_config* cfg);
BTRIP_API btrip_status btrip_config_set(btrip_config* cfg, const char* key, const char* value);
BTRIP_API btrip_status btrip_config_load_file(btrip_config* cfg, const char* path);
/* Applies BTRIP_DATA_DIR if set. */
BTRIP_API btrip_status btrip_config_apply_env(btrip_config* cfg);
BTRIP_API btrip_status btrip_config_validate(const btrip_config* cfg);
/* Current value of one key as text; same buffer protocol as btrip_config_dump. */
BTRIP_API btrip_status btrip_config_get(const btrip_config* cfg, const char* key, char* buf, size_t cap,
                                        size_t* needed);
/* Writes "key=value\n" lines. *needed receives the size including the NUL;
 * buf may be NULL to query it. */
BTRIP_API btrip_status btrip_config_dump(const btrip_config* cfg, char* buf, size_t cap, size_t* needed);

/* ---- datasets: train/val/test splits built from a config ---- */
BTRIP_API btrip_status btrip_data_load(const btrip_config* cfg, btrip_data** out);
BTRIP_API void btrip_data_destroy(btrip_data* data);
/* split: "train", "val" or "test" */
BTRIP_API btrip_status btrip_data_split_info(const btrip_data* data, const char* split, size_t* count,
                                             size_t* input_dim, size_t* num_classes);

/* ---- training ---- */
/* recall[4] holds validation R@1, R@4, R@8, R@16 (NaN where the split is too small). */
typedef void (*btrip_epoch_callback)(size_t epoch, double last_batch_loss, const double recall[4], void* user);

BTRIP_API btrip_status btrip_train(const btrip_config* cfg, const btrip_data* data, btrip_epoch_callback on_epoch,
                                   void* user, btrip_run** out);
BTRIP_API void btrip_run_destroy(btrip_run* run);
/* Writes the metrics CSV, summary JSON and checkpoint paths named in the config. */
BTRIP_API btrip_status btrip_run_write_outputs(const btrip_run* run);
BTRIP_API btrip_status btrip_run_summary(const btrip_run* run, size_t* best_epoch, size_t* epochs_run,
                                         int* stopped_early, double best_val[4], double baseline_val[4]);
/* Copy of the best-validation model. */
BTRIP_API btrip_status btrip_run_model(const btrip_run* run, btrip_model** out);
BTRIP_API btrip_status btrip_run_metrics_csv(const btrip_run* run, char* buf, size_t cap, size_t* needed);

/* ---- models ---- */
BTRIP_API btrip_status btrip_model_load(const char* path, btrip_model** out);
BTRIP_API btrip_status btrip_model_save(const btrip_model* model, const char* path);
BTRIP_API void btrip_model_destroy(btrip_model* model);
/* dims may be NULL to query *count. */
BTRIP_API btrip_status btrip_model_dims(const btrip_model* model, size_t* dims, size_t cap, size_t* count);
/* inputs: rows x input_dim, out: rows x output_dim, both row-major. */
BTRIP_API btrip_status btrip_model_embed(const btrip_model* model, const double* inputs, size_t rows, double* out);

/* ---- evaluation ---- */
/* out_recall[i] = R@ks[i]; every ks[i] must be smaller than the split size. */
BTRIP_API btrip_status btrip_evaluate(const btrip_model* model, const btrip_data* data, const char* split,
                                      const int* ks, size_t nks, int normalize, double* out_recall);
/* k nearest neighbours of item `query` (itself excluded), nearest first. */
BTRIP_API btrip_status btrip_retrieve(const btrip_model* model, const btrip_data* data, const char* split, size_t query,
                                      size_t k, int normalize, int* query_label, size_t* out_index, int* out_label,
                                      double* out_distance);

/* ---- fixtures ---- */
/* Float64 IDX when exact != 0, otherwise ubyte (x scaled by 255). ".gz" paths are compressed. */
BTRIP_API btrip_status btrip_synth_blobs(size_t classes, size_t per_class, size_t input_dim, double spread,
                                         uint64_t seed, int exact, const char* images_path, const char* labels_path);

/* ---- streaming class tracker and triplet sampling ---- */
BTRIP_API btrip_status btrip_tracker_create(size_t num_classes, size_t dim, btrip_cov_mode mode, btrip_tracker** out);
BTRIP_API void btrip_tracker_destroy(btrip_tracker* tracker);
BTRIP_API btrip_status btrip_tracker_reset(btrip_tracker* tracker);
/* vectors: count x dim row-major; labels: count. */
BTRIP_API btrip_status btrip_tracker_observe(btrip_tracker* tracker, const double* vectors, const int* labels,
                                             size_t count);
/* mean: dim, cov: dim x dim, scatter: dim x dim; any output may be NULL. */
BTRIP_API btrip_status btrip_tracker_state(const btrip_tracker* tracker, int class_id, double* mean, double* cov,
                                           double* scatter, size_t* n0);
/* For each anchor, (c-1) positives then (c-1) negatives (ascending class id).
 * positives/negatives: count x (c-1) x dim row-major. */
BTRIP_API btrip_status btrip_sample_triplets(const btrip_tracker* tracker, const double* anchors, const int* labels,
                                             size_t count, uint64_t seed, double eps_scale, double* positives,
                                             double* negatives);
/* Loss over `count` anchor groups with `per_anchor` positives and negatives
 * each. Gradient outputs mirror the inputs and may be NULL. */
BTRIP_API btrip_status btrip_loss(btrip_loss_kind kind, const double* anchors, const double* positives,
                                  const double* negatives, size_t count, size_t per_anchor, size_t dim, double margin,
                                  double* value, double* grad_anchors, double* grad_positives, double* grad_negatives);

#ifdef __cplusplus
}
#endif

#endif /* BTRIP_H */
