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

// Experiment runners behind the CLI subcommands. Runners build their output
// files in memory; write_report puts them on disk. Every CSV starts with
// '#' lines carrying the library version, config hash and seed.

#ifndef QKDSIM_EXPERIMENTS_H
#define QKDSIM_EXPERIMENTS_H

#include <string>
#include <utility>
#include <vector>

#include "qkdsim/config.h"
#include "qkdsim/errors.h"

namespace qkdsim {

inline constexpr const char *kVersion = "0.1.0";

struct OutputFile {
    std::string name;
    std::string content;
};

struct RunReport {
    /// Human-readable summary.
    std::string text;
    std::vector<OutputFile> files;
};

/// Names accepted by run_experiment.
std::vector<std::string> experiment_names();

/// Throws ConfigError for an unknown name or invalid config, and
/// InvariantError when a run fails its own check (calibration not
/// converging, MC tallies outside the sigma limit). On an invariant failure
/// the partial report is available through InvariantReportError.
RunReport run_experiment(const std::string &name, const ExperimentConfig &cfg);

struct InvariantReportError : InvariantError {
    InvariantReportError(const std::string &msg, RunReport partial)
        : InvariantError(msg), report(std::move(partial)) {
    }
    RunReport report;
};

RunReport run_calibrate(const ExperimentConfig &cfg);
RunReport run_skr_curve(const ExperimentConfig &cfg);
RunReport run_stability(const ExperimentConfig &cfg);
RunReport run_mc_vs_analytic(const ExperimentConfig &cfg);
RunReport run_spgd_demo(const ExperimentConfig &cfg);

/// Creates `dir` if needed and writes every file; returns the paths.
std::vector<std::string> write_report(const RunReport &report, const std::string &dir);

/// '#' header lines for an output file.
std::string csv_preamble(const ExperimentConfig &cfg, const std::string &kind);

struct MetricSummary {
    std::string metric;
    double mean = 0.0;
    /// Sample standard deviation; 0 when n == 1.
    double std = 0.0;
    double min = 0.0;
    double max = 0.0;
    int n = 0;
    bool single = false;
};

/// Requires at least one value.
MetricSummary summarize(const std::string &metric, const std::vector<double> &values);

struct TrendFit {
    double slope = 0.0;
    /// Classical OLS standard error.
    double stderr_slope = 0.0;
    /// Newey-West standard error with Bartlett weights up to `lag`.
    double stderr_hac = 0.0;
    int lag = 0;
};

/// Least-squares line through (i, values[i]). Needs >= 3 values. The HAC
/// lag is floor(4 (n/100)^(2/9)).
TrendFit linear_trend(const std::vector<double> &values);

/// Table text and metric,mean,std,min,max,n,single CSV rows (no header
/// lines).
std::string summary_table(const std::vector<MetricSummary> &rows);
std::string summary_csv(const std::vector<MetricSummary> &rows);

/// Calibrated chip used by every runner; throws InvariantError if the
/// calibration does not converge.
CalibrationResult calibrate_from_config(const ExperimentConfig &cfg);

}  // namespace qkdsim

#endif
