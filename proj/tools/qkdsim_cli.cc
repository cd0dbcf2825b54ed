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

// qkdsim command line: one subcommand per experiment.
//
//   qkdsim skr-curve --config configs/default.ini --set link.drift_rate=0 --out out/
//
// Exit codes: 0 success, 2 configuration or usage error, 3 invariant
// failure, 1 anything else.

#include <cinttypes>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qkdsim/qkdsim.h"

namespace {

int exit_code(qkdsim_status s) {
    switch (s) {
        case QKDSIM_OK:
            return 0;
        case QKDSIM_ERR_CONFIG:
            return 2;
        case QKDSIM_ERR_INVARIANT:
            return 3;
        default:
            return 1;
    }
}

struct Options {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
    std::int64_t seed = -1;
    bool quiet = false;
};

int report_error(qkdsim_status s, const std::string &context) {
    std::fprintf(stderr, "qkdsim: %s%s\n", context.c_str(), qkdsim_last_error());
    return exit_code(s);
}

int build_config(const Options &opt, qkdsim_config **cfg) {
    qkdsim_status s = opt.config.empty() ? qkdsim_config_create(cfg) : qkdsim_config_load(opt.config.c_str(), cfg);
    if (s != QKDSIM_OK) {
        return report_error(s, opt.config.empty() ? "" : opt.config + ": ");
    }
    for (const auto &a : opt.sets) {
        size_t eq = a.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "qkdsim: --set expects section.key=value, got '%s'\n", a.c_str());
            return 2;
        }
        s = qkdsim_config_set(*cfg, a.substr(0, eq).c_str(), a.substr(eq + 1).c_str());
        if (s != QKDSIM_OK) {
            return report_error(s, "--set " + a + ": ");
        }
    }
    if (opt.seed >= 0) {
        s = qkdsim_config_set(*cfg, "experiment.seed", std::to_string(opt.seed).c_str());
        if (s != QKDSIM_OK) return report_error(s, "--seed: ");
    }
    if (!opt.out.empty()) {
        s = qkdsim_config_set(*cfg, "experiment.out_dir", opt.out.c_str());
        if (s != QKDSIM_OK) return report_error(s, "--out: ");
    }
    s = qkdsim_config_validate(*cfg);
    if (s != QKDSIM_OK) return report_error(s, "");
    return 0;
}

int run(const std::string &name, const Options &opt) {
    qkdsim_config *cfg = nullptr;
    int rc = build_config(opt, &cfg);
    if (rc != 0) {
        qkdsim_config_destroy(cfg);
        return rc;
    }
    char out_dir[4096];
    qkdsim_config_get(cfg, "experiment.out_dir", out_dir, sizeof out_dir, nullptr);

    qkdsim_report *rep = nullptr;
    qkdsim_status s = qkdsim_run(cfg, name.c_str(), out_dir, &rep);
    if (rep) {
        if (!opt.quiet) {
            std::fputs(qkdsim_report_text(rep), stdout);
            for (size_t i = 0; i < qkdsim_report_file_count(rep); ++i) {
                std::printf("  wrote %s/%s\n", out_dir, qkdsim_report_file_name(rep, i));
            }
            std::printf("  config_hash=%016" PRIx64 "\n", qkdsim_config_hash(cfg));
        }
        qkdsim_report_destroy(rep);
    }
    qkdsim_config_destroy(cfg);
    if (s != QKDSIM_OK) {
        return report_error(s, name + ": ");
    }
    return 0;
}

int show_config(const Options &opt) {
    qkdsim_config *cfg = nullptr;
    int rc = build_config(opt, &cfg);
    if (rc == 0) {
        std::printf("%016" PRIx64 "\n", qkdsim_config_hash(cfg));
    }
    qkdsim_config_destroy(cfg);
    return rc;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"qkdsim: polarization-encoding QKD transmitter and link simulator"};
    app.set_version_flag("--version", qkdsim_version());
    app.require_subcommand(1);

    Options opt;
    auto add_common = [&](CLI::App *sub) {
        sub->add_option("--config", opt.config, "Config file (section/key = value)");
        sub->add_option("--set", opt.sets, "Override, section.key=value (repeatable)");
        sub->add_option("--out", opt.out, "Output directory");
        sub->add_option("--seed", opt.seed, "Experiment seed")->check(CLI::NonNegativeNumber);
        sub->add_flag("-q,--quiet", opt.quiet, "Suppress the summary on stdout");
    };

    struct Sub {
        const char *name;
        const char *help;
    };
    const Sub subs[] = {
        {"calibrate", "Calibrate the four BB84 states; trajectory and landscape CSVs"},
        {"skr-curve", "Secret key rate over distance"},
        {"stability", "Repeated blocks with drift and SPGD compensation"},
        {"mc-vs-analytic", "Monte Carlo tallies against the analytic expectation"},
        {"spgd-demo", "Polarization compensation trace"},
    };
    std::string chosen;
    for (const auto &s : subs) {
        CLI::App *sub = app.add_subcommand(s.name, s.help);
        add_common(sub);
        sub->callback([&chosen, name = std::string(s.name)] { chosen = name; });
    }
    CLI::App *hash = app.add_subcommand("config-hash", "Print the hash of the effective configuration");
    add_common(hash);
    hash->callback([&chosen] { chosen = "config-hash"; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    if (chosen == "config-hash") {
        return show_config(opt);
    }
    return run(chosen, opt);
}
