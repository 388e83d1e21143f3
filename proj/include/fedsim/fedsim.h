/*
   Copyright 2026 The fedsim Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

/* C interface to the fedsim federated-optimization simulator.
 *
 * Objects are opaque handles owned by the caller and released with the
 * matching *_free function. Every fallible call returns a fedsim_status;
 * on failure fedsim_last_error() describes the problem for the calling
 * thread until its next fedsim call.
 */
#ifndef FEDSIM_FEDSIM_H
#define FEDSIM_FEDSIM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FEDSIM_API __declspec(dllexport)
#else
#define FEDSIM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fedsim_status {
  FEDSIM_OK = 0,
  FEDSIM_ERR_PARSE = 1,
  FEDSIM_ERR_INVALID_PARTITION = 2,
  FEDSIM_ERR_INVALID_INPUT = 3,
  FEDSIM_ERR_SHAPE = 4,
  FEDSIM_ERR_INVALID_BATCH = 5,
  FEDSIM_ERR_DEGENERATE_SPECTRUM = 6,
  FEDSIM_ERR_INVALID_SCHEDULE = 7,
  FEDSIM_ERR_DIVERGENCE = 8,
  FEDSIM_ERR_CONVERGENCE = 9,
  FEDSIM_ERR_IO = 10,
  FEDSIM_ERR_CONFIG = 11,
  FEDSIM_ERR_INTERNAL = 99
} fedsim_status;

typedef struct fedsim_dataset fedsim_dataset;
typedef struct fedsim_trajectory fedsim_trajectory;
typedef struct fedsim_sweep fedsim_sweep;

typedef struct fedsim_point {
  int64_t t;
  double loss;
  double drift;
  double grad_norm;
  int64_t comm_round;
} fedsim_point;

typedef struct fedsim_fstar_result {
  double f_star;
  double grad_norm;
  double tol;
  int64_t iterations;
} fedsim_fstar_result;

typedef void (*fedsim_log_fn)(const char* line, void* user);

FEDSIM_API const char* fedsim_version(void);
FEDSIM_API const char* fedsim_last_error(void);

/* Strings returned through char** out-parameters are released here. */
FEDSIM_API void fedsim_string_free(char* s);

/* --- datasets ------------------------------------------------------------ */

FEDSIM_API fedsim_status fedsim_dataset_load_libsvm(const char* path, fedsim_dataset** out);
FEDSIM_API fedsim_status fedsim_dataset_parse_libsvm(const char* text, fedsim_dataset** out);

/* Runs a generator described by a dataset JSON object, e.g.
 * {"generator": "counterexample", "devices": 2, "radius": 1}. Generators
 * that fix their own device split keep it with the handle. */
FEDSIM_API fedsim_status fedsim_dataset_generate(const char* spec_json, fedsim_dataset** out);

FEDSIM_API fedsim_status fedsim_dataset_save_libsvm(const fedsim_dataset* ds, const char* path);
FEDSIM_API size_t fedsim_dataset_rows(const fedsim_dataset* ds);
FEDSIM_API size_t fedsim_dataset_cols(const fedsim_dataset* ds);
/* Device count of the attached split, or 0 when none. */
FEDSIM_API size_t fedsim_dataset_devices(const fedsim_dataset* ds);
FEDSIM_API void fedsim_dataset_free(fedsim_dataset* ds);

/* --- analysis ------------------------------------------------------------- */

/* objective: "reg_logistic", "logistic" or "least_squares". devices == 0
 * uses the dataset's own split, or a single device when it has none. */
FEDSIM_API fedsim_status fedsim_fstar(const fedsim_dataset* ds, const char* objective,
                                      double lambda, double tol, fedsim_fstar_result* out);

FEDSIM_API fedsim_status fedsim_fstar_write_cache(const fedsim_fstar_result* result,
                                                  const char* path);

/* Spectral report as a flat JSON object. */
FEDSIM_API fedsim_status fedsim_spectral_report_json(const fedsim_dataset* ds,
                                                     const char* objective, double lambda,
                                                     size_t devices, char** json_out);

/* --- runs ------------------------------------------------------------------ */

/* config_json: run configuration; base_dir resolves relative paths (may be
 * NULL). seed_override is applied when has_seed is nonzero. */
FEDSIM_API fedsim_status fedsim_run_config(const char* config_json, const char* base_dir,
                                           int has_seed, uint64_t seed_override,
                                           fedsim_trajectory** out);

FEDSIM_API size_t fedsim_trajectory_size(const fedsim_trajectory* traj);
FEDSIM_API fedsim_status fedsim_trajectory_point(const fedsim_trajectory* traj, size_t index,
                                                 fedsim_point* out);
FEDSIM_API fedsim_status fedsim_trajectory_csv(const fedsim_trajectory* traj, char** csv_out);
FEDSIM_API fedsim_status fedsim_trajectory_write_svg(const fedsim_trajectory* traj,
                                                     const char* path, double f_star);
FEDSIM_API void fedsim_trajectory_free(fedsim_trajectory* traj);

/* --- sweeps ---------------------------------------------------------------- */

FEDSIM_API fedsim_status fedsim_sweep_config(const char* config_json, const char* base_dir,
                                             size_t jobs, fedsim_log_fn log, void* user,
                                             fedsim_sweep** out);
FEDSIM_API size_t fedsim_sweep_rows(const fedsim_sweep* sweep);
/* Iterations to epsilon for a row, or -1 when not reached. */
FEDSIM_API int64_t fedsim_sweep_iterations(const fedsim_sweep* sweep, size_t row);
FEDSIM_API fedsim_status fedsim_sweep_csv(const fedsim_sweep* sweep, char** csv_out);
FEDSIM_API fedsim_status fedsim_sweep_write_csv(const fedsim_sweep* sweep, const char* path);
FEDSIM_API fedsim_status fedsim_sweep_write_svg(const fedsim_sweep* sweep, const char* path);
FEDSIM_API void fedsim_sweep_free(fedsim_sweep* sweep);

#ifdef __cplusplus
}
#endif

#endif /* FEDSIM_FEDSIM_H */
