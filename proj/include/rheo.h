/*
 Copyright 2026 The rheo Authors
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

#ifndef RHEO_H_
#define RHEO_H_

/*
 C interface to the rheo operator-surrogate library.

 Every function returns a rheo_status. On failure the message for the calling
 thread is available from rheo_last_error() until the next call on that
 thread. Handles are opaque; release them with the matching _free function.
 Options and configurations are passed as JSON text; unknown keys are ignored
 and missing keys take their defaults.
*/

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RHEO_API __declspec(dllexport)
#else
#define RHEO_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rheo_status {
  RHEO_OK = 0,
  RHEO_ERR_INVALID_ARGUMENT = 1,
  RHEO_ERR_SHAPE_MISMATCH = 2,
  RHEO_ERR_CONFIGURATION = 3,
  RHEO_ERR_DIVERGENCE = 4,
  RHEO_ERR_IO = 5,
  RHEO_ERR_BAD_MAGIC = 6,
  RHEO_ERR_SIZE_MISMATCH = 7,
  RHEO_ERR_DUPLICATE_CHANNEL = 8,
  RHEO_ERR_SCHEMA = 9,
  RHEO_ERR_STATE = 10,
  RHEO_ERR_NUMERICAL = 11,
  RHEO_ERR_INTERNAL = 12
} rheo_status;

typedef struct rheo_dataset rheo_dataset;
typedef struct rheo_surrogate rheo_surrogate;

RHEO_API const char* rheo_version(void);
RHEO_API const char* rheo_status_name(rheo_status status);
/* Message for the last failed call on this thread; "" after success. */
RHEO_API const char* rheo_last_error(void);

/* ---- datasets ---- */

RHEO_API rheo_status rheo_dataset_read(const char* path, rheo_dataset** out);
/* Atomic: the file at path is either the old one or the complete new one. */
RHEO_API rheo_status rheo_dataset_write(const rheo_dataset* data, const char* path);
RHEO_API void rheo_dataset_free(rheo_dataset* data);

RHEO_API rheo_status rheo_dataset_shape(const rheo_dataset* data, size_t* n_samples,
                                        size_t* n_points, size_t* n_steps,
                                        size_t* n_channels, size_t* coord_dim);
/* The returned string lives as long as the dataset. */
RHEO_API rheo_status rheo_dataset_channel_name(const rheo_dataset* data, size_t channel,
                                               const char** name);
/* Field block of one sample, laid out [step][point][channel]. */
RHEO_API rheo_status rheo_dataset_values(const rheo_dataset* data, size_t sample,
                                         const double** values, size_t* count);

/* ---- generators ---- */

/*
 Keys: model (tevp|giesekus|oldroydb), protocol (grf|oscillatory|shear|
 extension), n_samples, n_points, t_end, seed, grf_length_scale,
 grf_amplitude, grf_extension_amplitude, gamma0_min/max, omega_min/max,
 rate_min/max, substeps, and parameter objects tevp, giesekus, oldroydb.
*/
RHEO_API rheo_status rheo_generate_rheometric(const char* options_json, rheo_dataset** out);

/*
 Keys: n_samples, dpdx_min, dpdx_max, dpdx_values, and a channel object
 (H, ny, rho, eta_s, eta_p, tau1, dt, t_end, snapshots).
*/
RHEO_API rheo_status rheo_generate_flow1d(const char* options_json, rheo_dataset** out);

/* Replicates channel-flow records onto a planar nx-column point cloud. */
RHEO_API rheo_status rheo_export_planar(const rheo_dataset* flow1d, size_t nx, double length,
                                        rheo_dataset** out);

/* ---- training and inference ---- */

typedef void (*rheo_epoch_callback)(size_t epoch, double train_loss, double validation_loss,
                                    void* user);

/*
 config_json holds objects model, task, train and split (see README). The
 returned surrogate carries the best-validation weights and the training
 history. callback may be NULL.
*/
RHEO_API rheo_status rheo_train(const rheo_dataset* data, const char* config_json,
                                rheo_epoch_callback callback, void* user,
                                rheo_surrogate** out);

RHEO_API rheo_status rheo_surrogate_save(const rheo_surrogate* surrogate, const char* path);
RHEO_API rheo_status rheo_surrogate_load(const char* path, rheo_surrogate** out);
RHEO_API void rheo_surrogate_free(rheo_surrogate* surrogate);

/* Loss history as comma-separated text (epoch 0 is the initial loss). */
RHEO_API rheo_status rheo_surrogate_write_history(const rheo_surrogate* surrogate,
                                                  const char* path);
RHEO_API rheo_status rheo_surrogate_condition_steps(const rheo_surrogate* surrogate,
                                                    size_t* condition_steps);

/* Temporal models condition on the first condition_steps snapshots. */
RHEO_API rheo_status rheo_predict(const rheo_surrogate* surrogate, const rheo_dataset* data,
                                  size_t condition_steps, rheo_dataset** out);

/*
 Writes the report as JSON to report_path and, when errors_path is not NULL,
 the per-point error fields as a dataset file. mean_relative_l2 may be NULL.
*/
RHEO_API rheo_status rheo_evaluate(rheo_surrogate* surrogate, const rheo_dataset* data,
                                   size_t condition_steps, const char* report_path,
                                   const char* errors_path, double* mean_relative_l2);

/* ---- plots ---- */

/* what: series | heatmap | error. channel may be NULL. Writes out.svg and out.csv. */
RHEO_API rheo_status rheo_plot_dataset(const rheo_dataset* data, const char* what,
                                       size_t sample, const char* channel, size_t step,
                                       const char* out);
RHEO_API rheo_status rheo_plot_report(const char* report_path, const char* out);

#ifdef __cplusplus
}
#endif

#endif  // RHEO_H_
