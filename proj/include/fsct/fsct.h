// Copyright 2026 The fsct Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FSCT_FSCT_H_
#define FSCT_FSCT_H_

/*
 * C interface of the few-shot cartoon translation library.
 *
 * Every function returns FSCT_OK or an error status; the message of the most
 * recent failure on the calling thread is available from fsct_last_error().
 * Models are opaque handles released with fsct_model_free(). A model handle
 * may be shared by concurrent readers (translate, describe, save, export).
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FSCT_API __declspec(dllexport)
#elif defined(__GNUC__)
#define FSCT_API __attribute__((visibility("default")))
#else
#define FSCT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fsct_status {
  FSCT_OK = 0,
  FSCT_ERR_INVALID_ARGUMENT = 1,
  FSCT_ERR_SHAPE = 2,
  FSCT_ERR_UNKNOWN_GROUP = 3,
  FSCT_ERR_CONTRACT = 4,
  FSCT_ERR_IO = 5,
  FSCT_ERR_FORMAT = 6,
  FSCT_ERR_INTEGRITY = 7,
  FSCT_ERR_VERSION = 8,
  FSCT_ERR_DATA = 9,
  FSCT_ERR_NUMERIC = 10,
  FSCT_ERR_EXISTS = 11,
  FSCT_ERR_INTERNAL = 12
} fsct_status;

typedef enum fsct_direction {
  FSCT_REAL_TO_CARTOON = 0,
  FSCT_CARTOON_TO_REAL = 1
} fsct_direction;

typedef struct fsct_model fsct_model;

FSCT_API const char* fsct_version(void);
/* snake_case name of a status, e.g. "integrity". */
FSCT_API const char* fsct_status_name(fsct_status status);
/* Message of the last failure on this thread; empty after a success. */
FSCT_API const char* fsct_last_error(void);

/* Writes a synthetic dataset under root/group<k>/{real,cartoon}/. */
FSCT_API fsct_status fsct_synth_data(const char* root, int groups, int per_group, int size,
                                     uint64_t seed, int overwrite);

/*
 * Training runs. config_json is a run configuration
 *   {"model": {...}, "split": {...}, "train": {...}, "weights": {...}, "data": "DIR"}
 * (NULL or "{}" selects every default). The run directory receives
 *   config.json    the fully resolved configuration
 *   metrics.jsonl  one record per step
 *   timing.jsonl   wall-clock milliseconds per step
 *   model.ckpt     the final checkpoint (plus step<N>.ckpt at the configured cadence)
 * Existing outputs are only replaced when overwrite is nonzero.
 */
FSCT_API fsct_status fsct_train_basic(const char* config_json, const char* out_dir, int overwrite);
/* basic_ckpt may be single-branch (grafted first) or an already grafted model. */
FSCT_API fsct_status fsct_train_fewshot(const char* config_json, const char* basic_ckpt,
                                        const char* out_dir, int overwrite);

FSCT_API fsct_status fsct_model_load(const char* path, fsct_model** out);
FSCT_API void fsct_model_free(fsct_model* model);
FSCT_API fsct_status fsct_model_save(const fsct_model* model, const char* path, int overwrite);
/*
 * Grafts a single-branch model onto groups 0..groups-1. split_json may be
 * NULL for the default split. A model already holding exactly those groups is
 * copied unchanged; other group sets fail with FSCT_ERR_UNKNOWN_GROUP.
 */
FSCT_API fsct_status fsct_model_graft(const fsct_model* basic, int groups, const char* split_json,
                                      uint64_t seed, fsct_model** out);
/* Checkpoint manifest as JSON; release with fsct_string_free(). */
FSCT_API fsct_status fsct_model_describe(const fsct_model* model, char** out_json);
FSCT_API void fsct_string_free(char* s);
FSCT_API int fsct_model_group_count(const fsct_model* model);
FSCT_API int fsct_model_image_size(const fsct_model* model);

/*
 * Inference on a channel-major [3, S, S] buffer with values in [-1, 1];
 * len is the element count of both buffers (3 * S * S).
 */
FSCT_API fsct_status fsct_translate(const fsct_model* model, int group, fsct_direction direction,
                                    const float* input, float* output, size_t len);
/* PNG/JPEG in, PNG/JPEG out (by extension). Inputs are resized to S x S. */
FSCT_API fsct_status fsct_translate_file(const fsct_model* model, int group,
                                         fsct_direction direction, const char* input,
                                         const char* output, int overwrite);
/* Writes out_dir/attention_<i>.png, five columns per panel. */
FSCT_API fsct_status fsct_export_attention(const fsct_model* model, int group,
                                           fsct_direction direction, const char* const* inputs,
                                           size_t n_inputs, const char* out_dir, int overwrite);

#ifdef __cplusplus
}
#endif

#endif /* FSCT_FSCT_H_ */
