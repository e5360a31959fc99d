#ifndef MULGAN_MULGAN_H
#define MULGAN_MULGAN_H

/*
 * C interface to the MulGAN library: exemplar-based attribute transfer
 * through label-filtered latent blocks.
 *
 * Every function returns a mulgan_status. On failure the message is
 * available from mulgan_last_error() until the next call on the same thread.
 * Strings handed out through `char**` are owned by the caller and released
 * with mulgan_string_free().
 *
 * Images crossing this boundary are float32, channel-major (3, S, S), with
 * values in [-1, 1]. Label and mask arrays hold one 0/1 entry per attribute.
 */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define MULGAN_API __attribute__((visibility("default")))
#else
#define MULGAN_API
#endif

typedef enum mulgan_status {
  MULGAN_OK = 0,
  MULGAN_ERR_UNKNOWN = 1,
  MULGAN_ERR_CONFIG = 2,
  MULGAN_ERR_NUMERICAL = 3,
  MULGAN_ERR_IO = 4,
  MULGAN_ERR_PARSE = 5,
  MULGAN_ERR_SHAPE = 6,
  MULGAN_ERR_VALIDATION = 7,
  MULGAN_ERR_INTERNAL = 8,
  MULGAN_ERR_ARGUMENT = 9
} mulgan_status;

typedef enum mulgan_mix_mode { MULGAN_MIX = 0, MULGAN_REPLACE = 1 } mulgan_mix_mode;

typedef struct mulgan_config mulgan_config;
typedef struct mulgan_model mulgan_model;
typedef struct mulgan_oracle mulgan_oracle;

MULGAN_API const char* mulgan_version(void);
MULGAN_API const char* mulgan_last_error(void);
MULGAN_API const char* mulgan_status_name(mulgan_status status);
MULGAN_API void mulgan_string_free(char* s);

/* ---- configuration ---- */

MULGAN_API mulgan_status mulgan_config_default(mulgan_config** out);
/* Parses a JSON document; an empty file yields the defaults. */
MULGAN_API mulgan_status mulgan_config_load(const char* path, mulgan_config** out);
MULGAN_API mulgan_status mulgan_config_parse(const char* json_text, mulgan_config** out);
/* Dotted key ("train.lr"); lists are comma separated. Not re-validated. */
MULGAN_API mulgan_status mulgan_config_set(mulgan_config* cfg, const char* key, const char* value);
/* Applies PREFIX<SECTION>_<KEY> variables from the process environment. */
MULGAN_API mulgan_status mulgan_config_apply_env(mulgan_config* cfg, const char* prefix);
MULGAN_API mulgan_status mulgan_config_validate(mulgan_config* cfg);
MULGAN_API mulgan_status mulgan_config_to_json(const mulgan_config* cfg, char** out_json);
/* Newline separated list of every accepted key. */
MULGAN_API mulgan_status mulgan_config_keys(char** out_keys);
MULGAN_API void mulgan_config_free(mulgan_config* cfg);

/* ---- training ---- */

/* Called after every step with the structured log line; return nonzero to stop. */
typedef int (*mulgan_step_callback)(int64_t step, const char* log_json, void* user);

/* Validates, writes <out_dir>/manifest.json, then trains into out_dir
 * (train_log.jsonl, checkpoint.mgck). resume_from may be NULL. */
MULGAN_API mulgan_status mulgan_train(mulgan_config* cfg, const char* resume_from, mulgan_step_callback cb,
                                      void* user);

/* Trains the attribute oracle (FID features and match rates) on the
 * configured dataset. steps <= 0 keeps the default budget. */
MULGAN_API mulgan_status mulgan_train_oracle(mulgan_config* cfg, int steps, const char* out_path,
                                             char** out_accuracy_json);

/* Writes n images of the configured split ("train", "val" or "test") as
 * PNG files plus labels.txt ("file l1 l2 ...") into out_dir. */
MULGAN_API mulgan_status mulgan_export_images(mulgan_config* cfg, const char* split, int n, const char* out_dir);

/* ---- models ---- */

MULGAN_API mulgan_status mulgan_model_load(const char* checkpoint_path, mulgan_model** out);
MULGAN_API void mulgan_model_free(mulgan_model* model);
MULGAN_API mulgan_status mulgan_model_info(const mulgan_model* model, int* image_size, int* n_attrs, int64_t* step);
/* Copy of the run configuration stored in the checkpoint. */
MULGAN_API mulgan_status mulgan_model_config(const mulgan_model* model, mulgan_config** out);

/* Single-image operations on raw buffers of 3*S*S floats. */
MULGAN_API mulgan_status mulgan_reconstruct(mulgan_model* model, const float* image, const int* labels, float* out);
MULGAN_API mulgan_status mulgan_predict_labels(mulgan_model* model, const float* image, int* out_labels);
/* src_labels / ex_labels may be NULL: they are then predicted by the
 * classifier head and a warning says so. Warnings (newline separated, possibly
 * empty) go to *out_warnings when it is non-NULL. */
MULGAN_API mulgan_status mulgan_transfer(mulgan_model* model, const float* source, const float* exemplar,
                                         const int* src_labels, const int* ex_labels, const int* mask,
                                         mulgan_mix_mode mode, float* out, char** out_warnings);

/* Image-file editing: one transfer written to out_path. */
MULGAN_API mulgan_status mulgan_edit_files(mulgan_model* model, const char* source_path, const char* exemplar_path,
                                           const int* src_labels, const int* ex_labels, const int* mask,
                                           mulgan_mix_mode mode, const char* out_path, char** out_warnings);
/* Grid: sources down the left, exemplars across the top. */
MULGAN_API mulgan_status mulgan_edit_grid(mulgan_model* model, const char* const* source_paths, int n_sources,
                                          const char* const* exemplar_paths, int n_exemplars, const int* mask,
                                          mulgan_mix_mode mode, const char* out_path, char** out_warnings);

/* ---- evaluation ---- */

MULGAN_API mulgan_status mulgan_oracle_load(const char* path, mulgan_oracle** out);
MULGAN_API void mulgan_oracle_free(mulgan_oracle* oracle);

/* Evaluates on the held-out split of the dataset described by data_cfg (the
 * checkpoint's own configuration when NULL). Writes the report to out_path
 * when non-NULL and returns it in *out_report_json when non-NULL. */
MULGAN_API mulgan_status mulgan_eval(mulgan_model* model, mulgan_config* data_cfg, mulgan_oracle* oracle,
                                     int n_images, const char* out_path, char** out_report_json);

/* Trains and evaluates one model per down-sampling depth into out_dir.
 * oracle_path may be NULL, in which case an oracle is trained first. */
MULGAN_API mulgan_status mulgan_ablate(mulgan_config* cfg, const int* depths, int n_depths, const char* out_dir,
                                       const char* oracle_path, int n_images, char** out_report_json);

/* Frechet distance between two Gaussians; covariances are dim*dim row-major. */
MULGAN_API mulgan_status mulgan_frechet_distance(const double* mean1, const double* cov1, const double* mean2,
                                                 const double* cov2, int dim, double* out);

#ifdef __cplusplus
}
#endif

#endif
