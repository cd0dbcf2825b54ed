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

// Experiment configuration: sectioned key = value text.
//
//   # comment
//   [link]
//   length_km = 150
//
// Every key has a default; unknown keys are errors. Lists are comma
// separated. The config hash covers the canonical rendering of every key
// except experiment.out_dir.

#ifndef QKDSIM_CONFIG_H
#define QKDSIM_CONFIG_H

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "qkdsim/calibration.h"
#include "qkdsim/finitekey.h"
#include "qkdsim/link.h"
#include "qkdsim/protocol.h"
#include "qkdsim/spgd.h"

namespace qkdsim {

struct CalibrationConfig {
    CalibrationOptions options;
    /// Gaussian noise per probe sample; 0 uses the noiseless model.
    double noise_sigma = 0.0;
    int grid_resolution = 128;
};

struct OptimizerConfig {
    bool enabled = true;
    SearchSpace space;
};

struct SpgdConfig {
    SpgdParams params;
    double dt_s = 0.25;
};

struct ExperimentSettings {
    std::uint64_t seed = 1;
    std::vector<double> distances_km{100, 125, 150, 175, 200, 225, 250, 275};
    /// Distance used by stability, mc-vs-analytic and spgd-demo.
    double operating_km = 150.0;
    int stability_blocks = 100;
    double stability_block_s = 100.0;
    /// Compensation time before the first recorded block.
    double stability_warmup_s = 1000.0;
    double spgd_duration_s = 1e4;
    int mc_seeds = 10;
    std::int64_t mc_pulses = 1'000'000;
    double mc_sigma_limit = 4.0;
    std::string out_dir = "out";
};

struct ExperimentConfig {
    ChipParams chip = ChipParams::defaults();
    CalibrationConfig calibration;
    LinkParams link;
    ProtocolParams protocol;
    SecurityParams security;
    OptimizerConfig optimizer;
    SpgdConfig spgd;
    ExperimentSettings experiment;

    ExperimentConfig();

    /// Sets "section.key" from text. Throws ConfigError (tagged with `line`
    /// when non-zero) for unknown keys or malformed values.
    void set(const std::string &dotted_key, const std::string &value, int line = 0);
    /// Canonical text of one key.
    std::string get(const std::string &dotted_key) const;

    /// Throws ConfigError on any violated invariant.
    void validate() const;

    /// (section.key, canonical value) for every key, in schema order.
    std::vector<std::pair<std::string, std::string>> canonical() const;
    /// FNV-1a over the canonical rendering, out_dir excluded.
    std::uint64_t hash() const;
    std::string hash_hex() const;
};

/// All known keys in schema order.
std::vector<std::string> config_keys();

/// Defaults overlaid with the file contents, then validated.
ExperimentConfig parse_config(std::istream &in);
ExperimentConfig load_config(const std::string &path);

/// "section.key=value" override.
void apply_override(ExperimentConfig &cfg, const std::string &assignment);

/// Canonical config file text (round-trips through parse_config).
std::string render_config(const ExperimentConfig &cfg);

}  // namespace qkdsim

#endif
