/*
 * Copyright 2026 The heis-tsp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the heis-tsp library. Handles are opaque; every call returns a status code
 * and, on failure, leaves a message for heis_last_error() on the calling thread. Strings
 * returned through char** are owned by the caller and released with heis_string_free(). */

#ifndef HEIS_TSP_H
#define HEIS_TSP_H

#include <stddef.h>

#if defined(_WIN32)
#define HEIS_API __declspec(dllexport)
#else
#define HEIS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum heis_status {
  HEIS_OK = 0,
  HEIS_E_INVALID = 1,     /* bad argument or parameter */
  HEIS_E_IO = 2,          /* file could not be read or written */
  HEIS_E_DOMAIN = 3,      /* input outside the domain of the operation */
  HEIS_E_HYPOTHESIS = 4,  /* a lemma's hypotheses do not hold for the input */
  HEIS_E_UNKNOWN = 5,     /* unknown experiment, generator or check name */
  HEIS_E_INTERNAL = 6
} heis_status;

typedef struct heis_params heis_params;
typedef struct heis_curve heis_curve;

HEIS_API const char* heis_version(void);
HEIS_API const char* heis_last_error(void);
HEIS_API const char* heis_status_name(heis_status s);
HEIS_API void heis_string_free(char* s);

/* Parameters: defaults on creation; keys mirror the command-line flags
 * (A, J, kappa, delta, eps0, eta, epsilon, M, seed, depth, p, q, c, stages, samples). */
HEIS_API heis_status heis_params_new(heis_params** out);
HEIS_API void heis_params_free(heis_params* p);
HEIS_API heis_status heis_params_set(heis_params* p, const char* key, const char* value);
HEIS_API heis_status heis_params_load_config(heis_params* p, const char* text);
HEIS_API heis_status heis_params_validate(const heis_params* p);
HEIS_API heis_status heis_params_json(const heis_params* p, char** out);

/* Metric on R^3 with the Koranyi gauge; eta in (0,16]. */
HEIS_API heis_status heis_distance(double eta, const double a[3], const double b[3], double* out);

/* Curves. kind: oscillating (q, c, stages), segment, circle, square, walk (seed). */
HEIS_API heis_status heis_curve_generate(const char* kind, const heis_params* p, heis_curve** out);
HEIS_API heis_status heis_curve_read(const char* path, double eta, heis_curve** out);
HEIS_API heis_status heis_curve_write(const heis_curve* c, const char* path);
HEIS_API heis_status heis_curve_info(const heis_curve* c, double eta, size_t* points,
                                     double* length, int* closed);
HEIS_API void heis_curve_free(heis_curve* c);

/* beta of the curve image in the ball B(center, radius). */
HEIS_API heis_status heis_beta_ball(const heis_curve* c, double eta, const double center[3],
                                    double radius, double* beta);

/* Multiscale sums; either output pointer may be NULL. */
HEIS_API heis_status heis_beta_sum(const heis_curve* c, const heis_params* p, char** csv,
                                   char** json);

/* which: prop4 | lemmas | martingale. *violations is set to the number of failed checks. */
HEIS_API heis_status heis_verify(const char* which, const heis_params* p, char** json,
                                 long* violations);

/* Builds and audits a filtration; *ok is 1 when every audited property holds. */
HEIS_API heis_status heis_filtration_audit(const heis_params* p, char** json, int* ok);

/* name: dichotomy | mainbound | prop4 | lemmas | martingale | filtration-audit. */
HEIS_API heis_status heis_run_experiment(const char* name, const heis_params* p,
                                         const char* out_dir, int* violations);

/* Concatenates CSV files sharing one header, prefixing a "source" column. */
HEIS_API heis_status heis_merge_csv(const char* const* paths, size_t n, const char* out_path);

#ifdef __cplusplus
}
#endif

#endif /* HEIS_TSP_H */
