// Copyright 2026 The qkdsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qkdsim/qkdsim.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <new>
#include <string>

#include "qkdsim/config.h"
#include "qkdsim/errors.h"
#include "qkdsim/experiments.h"
#include "qkdsim/finitekey.h"
#include "qkdsim/link.h"

struct qkdsim_config {
    qkdsim::ExperimentConfig cfg;
};

struct qkdsim_report {
    qkdsim::RunReport rep;
};

namespace {

thread_local std::string g_last_error;

qkdsim_status fail(qkdsim_status s, const std::string &msg) {
    g_last_error = msg;
    return s;
}

template <typename F>
qkdsim_status guarded(F &&f) {
    try {
        return f();
    } catch (const qkdsim::ConfigError &e) {
        return fail(QKDSIM_ERR_CONFIG, e.what());
    } catch (const qkdsim::InvariantError &e) {
        return fail(QKDSIM_ERR_INVARIANT, e.what());
    } catch (const qkdsim::ContractError &e) {
        return fail(QKDSIM_ERR_ARGUMENT, e.what());
    } catch (const qkdsim::UndefinedQberError &e) {
        return fail(QKDSIM_ERR_ARGUMENT, e.what());
    } catch (const std::bad_alloc &) {
        return fail(QKDSIM_ERR_INTERNAL, "out of memory");
    } catch (const std::exception &e) {
        return fail(QKDSIM_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(QKDSIM_ERR_INTERNAL, "unknown error");
    }
}

}  // namespace

extern "C" {

const char *qkdsim_version(void) {
    return qkdsim::kVersion;
}

const char *qkdsim_last_error(void) {
    return g_last_error.c_str();
}

qkdsim_status qkdsim_config_create(qkdsim_config **out) {
    if (!out) return fail(QKDSIM_ERR_ARGUMENT, "null output pointer");
    return guarded([&] {
        *out = new qkdsim_config{};
        return QKDSIM_OK;
    });
}

qkdsim_status qkdsim_config_load(const char *path, qkdsim_config **out) {
    if (!path || !out) return fail(QKDSIM_ERR_ARGUMENT, "null argument");
    *out = nullptr;
    return guarded([&] {
        auto *c = new qkdsim_config{qkdsim::load_config(path)};
        *out = c;
        return QKDSIM_OK;
    });
}

qkdsim_status qkdsim_config_set(qkdsim_config *cfg, const char *key, const char *value) {
    if (!cfg || !key || !value) return fail(QKDSIM_ERR_ARGUMENT, "null argument");
    return guarded([&] {
        qkdsim::ExperimentConfig next = cfg->cfg;
        next.set(key, value);
        cfg->cfg = next;
        return QKDSIM_OK;
    });
}

qkdsim_status qkdsim_config_get(const qkdsim_config *cfg, const char *key, char *buf, size_t size, size_t *needed) {
    if (!cfg || !key) return fail(QKDSIM_ERR_ARGUMENT, "null argument");
    return guarded([&] {
        std::string v = cfg->cfg.get(key);
        if (needed) *needed = v.size() + 1;
        if (buf && size > 0) {
            size_t n = std::min(size - 1, v.size());
            std::memcpy(buf, v.data(), n);
            buf[n] = '\0';
        }
        return QKDSIM_OK;
    });
}

qkdsim_status qkdsim_config_validate(const qkdsim_config *cfg) {
    if (!cfg) return fail(QKDSIM_ERR_ARGUMENT, "null config");
    return guarded([&] {
        cfg->cfg.validate();
        return QKDSIM_OK;
    });
}

uint64_t qkdsim_config_hash(const qkdsim_config *cfg) {
    return cfg ? cfg->cfg.hash() : 0;
}

void qkdsim_config_destroy(qkdsim_config *cfg) {
    delete cfg;
}

qkdsim_status qkdsim_run(const qkdsim_config *cfg, const char *experiment, const char *out_dir,
                         qkdsim_report **out) {
    if (!cfg || !experiment || !out) return fail(QKDSIM_ERR_ARGUMENT, "null argument");
    *out = nullptr;
    auto emit = [&](const qkdsim::RunReport &rep) {
        if (out_dir) {
            try {
                qkdsim::write_report(rep, out_dir);
            } catch (const std::exception &e) {
                *out = new qkdsim_report{rep};
                return fail(QKDSIM_ERR_IO, e.what());
            }
        }
        *out = new qkdsim_report{rep};
        return QKDSIM_OK;
    };
    return guarded([&] {
        try {
            return emit(qkdsim::run_experiment(experiment, cfg->cfg));
        } catch (const qkdsim::InvariantReportError &e) {
            qkdsim_status s = emit(e.report);
            return s == QKDSIM_OK ? fail(QKDSIM_ERR_INVARIANT, e.what()) : s;
        }
    });
}

const char *qkdsim_report_text(const qkdsim_report *rep) {
    return rep ? rep->rep.text.c_str() : nullptr;
}

size_t qkdsim_report_file_count(const qkdsim_report *rep) {
    return rep ? rep->rep.files.size() : 0;
}

const char *qkdsim_report_file_name(const qkdsim_report *rep, size_t i) {
    return rep && i < rep->rep.files.size() ? rep->rep.files[i].name.c_str() : nullptr;
}

const char *qkdsim_report_file_content(const qkdsim_report *rep, size_t i) {
    return rep && i < rep->rep.files.size() ? rep->rep.files[i].content.c_str() : nullptr;
}

void qkdsim_report_destroy(qkdsim_report *rep) {
    delete rep;
}

double qkdsim_binary_entropy(double p) {
    try {
        return qkdsim::binary_entropy(p);
    } catch (const std::exception &e) {
        g_last_error = e.what();
        return std::numeric_limits<double>::quiet_NaN();
    }
}

qkdsim_status qkdsim_timing_crosstalk(const qkdsim_config *cfg, double bin_period_ps, double *p_adjacent,
                                      double *p_beyond) {
    if (!cfg || !p_adjacent || !p_beyond) return fail(QKDSIM_ERR_ARGUMENT, "null argument");
    return guarded([&] {
        qkdsim::CrosstalkProbs x = qkdsim::timing_crosstalk(cfg->cfg.link.detector, bin_period_ps);
        *p_adjacent = x.p_adjacent;
        *p_beyond = x.p_beyond;
        return QKDSIM_OK;
    });
}

qkdsim_status qkdsim_secret_length(const qkdsim_config *cfg, const qkdsim_counts *counts, int asymptotic,
                                   double *length, double *skr_bps) {
    if (!cfg || !counts || !length) return fail(QKDSIM_ERR_ARGUMENT, "null argument");
    return guarded([&] {
        qkdsim::ObservedCounts oc;
        double pulses = 0.0;
        for (int b = 0; b < 2; ++b) {
            for (int k = 0; k < 2; ++k) {
                oc.n[b][k] = counts->n[b][k];
                oc.m[b][k] = counts->m[b][k];
            }
        }
        for (int s = 0; s < 4; ++s) {
            for (int k = 0; k < 2; ++k) {
                oc.sent[s][k] = counts->sent[s][k];
                pulses += counts->sent[s][k];
            }
        }
        oc.block_pulses = pulses;
        oc.duration_s = counts->duration_s;
        qkdsim::SecretLengthResult r =
            qkdsim::secret_length(oc, cfg->cfg.protocol, cfg->cfg.security, asymptotic != 0);
        *length = r.l;
        if (skr_bps) *skr_bps = r.skr_bps;
        return QKDSIM_OK;
    });
}

}  // extern "C"
