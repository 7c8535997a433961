/* SPDX-License-Identifier: Apache-2.0
 *
 * fedsim C API: a federated-learning simulation engine behind a stable
 * extern "C" surface. Handles are opaque; every call reports a status code
 * and, where a buffer is supplied, a human-readable error message.
 */
#ifndef FEDSIM_H
#define FEDSIM_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fedsim_status {
  FEDSIM_OK = 0,
  FEDSIM_ERR_INVALID_ARGUMENT = 1, /* argument outside its contract */
  FEDSIM_ERR_CONFIG = 2,           /* malformed configuration (message is line-anchored) */
  FEDSIM_ERR_FORMAT = 3,           /* malformed data file */
  FEDSIM_ERR_NUMERIC = 4,          /* non-finite values in a computation */
  FEDSIM_ERR_PARTITION = 5,        /* Dirichlet partitioning failed */
  FEDSIM_ERR_IO = 6,               /* filesystem failure */
  FEDSIM_ERR_INTERNAL = 7          /* anything else */
} fedsim_status;

/* Opaque run configuration. */
typedef struct fedsim_config_s fedsim_config_t;

const char* fedsim_version(void);
const char* fedsim_status_name(fedsim_status status);

/* Configuration with all defaults. Returns NULL only on allocation failure. */
fedsim_status fedsim_config_create(fedsim_config_t** out_cfg);

/* Parses a key=value configuration file. On failure *out_cfg is NULL and the
 * message (file:line anchored) is copied into err. */
fedsim_status fedsim_config_load(const char* path, fedsim_config_t** out_cfg,
                                 char* err, size_t err_len);

/* Sets one key (same key set as the file format). */
fedsim_status fedsim_config_set(fedsim_config_t* cfg, const char* key,
                                const char* value, char* err, size_t err_len);

void fedsim_config_free(fedsim_config_t* cfg);

/* Runs the configured repeats and writes config.snapshot, rounds.csv,
 * timings.csv, and summary.json into out_dir (falls back to the config's
 * out_dir when out_dir is NULL or empty). */
fedsim_status fedsim_run(const fedsim_config_t* cfg, const char* out_dir,
                         char* err, size_t err_len);

/* One sub-run per (method, value); axis is one of clients, data_ratio,
 * alpha_label, learning_rate; values_csv is a comma-separated list. */
fedsim_status fedsim_sweep(const fedsim_config_t* cfg, const char* axis,
                           const char* values_csv, const char* out_dir,
                           char* err, size_t err_len);

/* Communication-traffic report for a bundled architecture name (femnist,
 * shakespeare, sent140, mnist, cifar10) or a spec file path. *out_csv is
 * malloc'd; release it with fedsim_string_free. */
fedsim_status fedsim_traffic_report(const char* arch_name_or_path,
                                    int include_bytes, char** out_csv,
                                    char* err, size_t err_len);

/* Long-format convergence curves from a results directory. *out_csv is
 * malloc'd; release it with fedsim_string_free. */
fedsim_status fedsim_plotdata(const char* results_dir, char** out_csv,
                              char* err, size_t err_len);

void fedsim_string_free(char* s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* FEDSIM_H */
