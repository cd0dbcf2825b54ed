/* Copyright 2026 The qkdsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the qkdsim library.
 *
 * Handles are opaque. Every function returning qkdsim_status leaves a
 * message for qkdsim_last_error() on failure; the message is per thread and
 * stays valid until the next failing call on that thread.
 */

#ifndef QKDSIM_QKDSIM_H
#define QKDSIM_QKDSIM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define QKDSIM_API __declspec(dllexport)
#else
#define QKDSIM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qkdsim_status {
    QKDSIM_OK = 0,
    QKDSIM_ERR_ARGUMENT = 1,
    QKDSIM_ERR_CONFIG = 2,
    QKDSIM_ERR_INVARIANT = 3,
    QKDSIM_ERR_IO = 4,
    QKDSIM_ERR_INTERNAL = 5
} qkdsim_status;

typedef struct qkdsim_config qkdsim_config;
typedef struct qkdsim_report qkdsim_report;

QKDSIM_API const char *qkdsim_version(void);
QKDSIM_API const char *qkdsim_last_error(void);

/* Defaults. */
QKDSIM_API qkdsim_status qkdsim_config_create(qkdsim_config **out);
/* Defaults overlaid with a config file. Parse errors carry "line N: ". */
QKDSIM_API qkdsim_status qkdsim_config_load(const char *path, qkdsim_config **out);
/* "section.key", value text. */
QKDSIM_API qkdsim_status qkdsim_config_set(qkdsim_config *cfg, const char *key, const char *value);
/* Canonical value text, copied into buf (NUL terminated). *needed gets the
 * full length including the terminator; may be NULL. */
QKDSIM_API qkdsim_status qkdsim_config_get(const qkdsim_config *cfg, const char *key, char *buf, size_t size,
                                           size_t *needed);
QKDSIM_API qkdsim_status qkdsim_config_validate(const qkdsim_config *cfg);
QKDSIM_API uint64_t qkdsim_config_hash(const qkdsim_config *cfg);
QKDSIM_API void qkdsim_config_destroy(qkdsim_config *cfg);

/* Runs a subcommand ("calibrate", "skr-curve", "stability",
 * "mc-vs-analytic", "spgd-demo") and writes its files into out_dir (NULL
 * keeps them in memory only). On QKDSIM_ERR_INVARIANT *out still receives
 * the partial report when one exists. */
QKDSIM_API qkdsim_status qkdsim_run(const qkdsim_config *cfg, const char *experiment, const char *out_dir,
                                    qkdsim_report **out);
QKDSIM_API const char *qkdsim_report_text(const qkdsim_report *rep);
QKDSIM_API size_t qkdsim_report_file_count(const qkdsim_report *rep);
/* File name and content of entry i; NULL when out of range. */
QKDSIM_API const char *qkdsim_report_file_name(const qkdsim_report *rep, size_t i);
QKDSIM_API const char *qkdsim_report_file_content(const qkdsim_report *rep, size_t i);
QKDSIM_API void qkdsim_report_destroy(qkdsim_report *rep);

/* Binary Shannon entropy; NaN outside [0, 1]. */
QKDSIM_API double qkdsim_binary_entropy(double p);
/* Displacement probabilities for the config's detector at bin_period_ps. */
QKDSIM_API qkdsim_status qkdsim_timing_crosstalk(const qkdsim_config *cfg, double bin_period_ps, double *p_adjacent,
                                                 double *p_beyond);

typedef struct qkdsim_counts {
    /* [basis][intensity]: basis 0 = Z, 1 = X; intensity 0 = mu1, 1 = mu2. */
    double n[2][2];
    double m[2][2];
    /* [state][intensity], states H, V, +, -. */
    double sent[4][2];
    double duration_s;
} qkdsim_counts;

/* Secret key length for counts under the config's protocol and security
 * parameters. */
QKDSIM_API qkdsim_status qkdsim_secret_length(const qkdsim_config *cfg, const qkdsim_counts *counts, int asymptotic,
                                              double *length, double *skr_bps);

#ifdef __cplusplus
}
#endif

#endif
