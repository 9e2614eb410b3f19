#ifndef NSVR_NSVR_H
#define NSVR_NSVR_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define NSVR_API __declspec(dllexport)
#else
#define NSVR_API __attribute__((visibility("default")))
#endif

/* Status codes. Values 1..9 match nsvr::ErrorCode. */
typedef enum nsvr_status {
  NSVR_OK = 0,
  NSVR_ERR_INVALID_ARGUMENT = 1,
  NSVR_ERR_DOMAIN = 2,
  NSVR_ERR_NOT_POSITIVE_DEFINITE = 3,
  NSVR_ERR_RANK_DEFICIENT = 4,
  NSVR_ERR_IO = 5,
  NSVR_ERR_PARSE = 6,
  NSVR_ERR_NOT_CONVERGED = 7,
  NSVR_ERR_OVERFLOW = 8,
  NSVR_ERR_DIMENSION_MISMATCH = 9,
  NSVR_ERR_NULL_POINTER = 10,
  NSVR_ERR_OUT_OF_MEMORY = 11,
  NSVR_ERR_INTERNAL = 12
} nsvr_status;

typedef struct nsvr_config nsvr_config;
typedef struct nsvr_dataset nsvr_dataset;
typedef struct nsvr_fit nsvr_fit;

NSVR_API const char* nsvr_version(void);
NSVR_API const char* nsvr_status_string(nsvr_status status);
/* Message of the last failed call on this thread; "" when none. */
NSVR_API const char* nsvr_last_error(void);

/* Experiment configuration (TOML). */
NSVR_API nsvr_status nsvr_config_load(const char* path, nsvr_config** out);
NSVR_API nsvr_status nsvr_config_parse(const char* toml_text, nsvr_config** out);
NSVR_API void nsvr_config_free(nsvr_config* config);
/* Overrides applied after loading. */
NSVR_API nsvr_status nsvr_config_set_prewhiten_runs(nsvr_config* config, int runs);
NSVR_API nsvr_status nsvr_config_set_samples(nsvr_config* config, int n_samples);
NSVR_API nsvr_status nsvr_config_set_clusters(nsvr_config* config, int n_clusters);
/* Writes the effective configuration as JSON. Caller frees with nsvr_string_free. */
NSVR_API nsvr_status nsvr_config_to_json(const nsvr_config* config, char** out);

/* Table-1 style prewhitening experiment; writes a JSON report when path is
   non-NULL and returns the JSON text in *json_out when that is non-NULL. */
NSVR_API nsvr_status nsvr_prewhiten_bench(const nsvr_config* config, const char* path,
                                          char** json_out);

/* Brain-slice simulation and dataset directories. */
NSVR_API nsvr_status nsvr_simulate_slice(const nsvr_config* config, nsvr_dataset** out);
NSVR_API nsvr_status nsvr_dataset_save(const nsvr_dataset* dataset, const nsvr_config* config,
                                       const char* dir);
NSVR_API nsvr_status nsvr_dataset_load(const char* dir, nsvr_dataset** out);
NSVR_API nsvr_status nsvr_dataset_dims(const nsvr_dataset* dataset, size_t* n_vertices,
                                       size_t* n_times, size_t* n_tasks);
NSVR_API void nsvr_dataset_free(nsvr_dataset* dataset);

/* Posterior inference (no sampling). */
NSVR_API nsvr_status nsvr_fit_run(const nsvr_config* config, const nsvr_dataset* dataset,
                                  nsvr_fit** out);
NSVR_API nsvr_status nsvr_fit_save(const nsvr_fit* fit, const nsvr_dataset* dataset,
                                   const char* dir);
NSVR_API nsvr_status nsvr_fit_load(const char* dir, nsvr_fit** out);
NSVR_API void nsvr_fit_free(nsvr_fit* fit);
/* Posterior-mean Hurst value per cluster. *count receives the cluster count;
   up to `capacity` values are copied into `values` (which may be NULL). */
NSVR_API nsvr_status nsvr_fit_hurst(const nsvr_fit* fit, double* values, size_t capacity,
                                    size_t* count);
/* Posterior mean and sd of one task's field (task is 1-based), length V. */
NSVR_API nsvr_status nsvr_fit_beta(const nsvr_fit* fit, int task, double* mean, double* sd,
                                   size_t capacity);

/* Samples from the fitted grid mixture and writes activation maps and
   excursions.json into dir. *active_counts (length n_tasks, optional)
   receives the positive-set size per task. */
NSVR_API nsvr_status nsvr_excursions_run(const nsvr_config* config, const nsvr_dataset* dataset,
                                         const nsvr_fit* fit, const char* dir,
                                         size_t* active_counts, size_t capacity);

/* Report against the truth stored with the dataset, plus PGM previews. */
NSVR_API nsvr_status nsvr_report_write(const nsvr_dataset* dataset, const char* fit_dir,
                                       const char* dir, char** json_out);

NSVR_API void nsvr_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
