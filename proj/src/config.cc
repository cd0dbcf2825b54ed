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

#include "qkdsim/config.h"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "qkdsim/errors.h"

namespace qkdsim {

namespace {

using Cfg = ExperimentConfig;

struct Field {
    std::string key;
    std::function<std::string(const Cfg &)> get;
    std::function<void(Cfg &, const std::string &)> set;
};

std::string trim(const std::string &s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) {
        return "";
    }
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string fmt_double(double x) {
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

double parse_double(const std::string &s) {
    std::string t = trim(s);
    if (t.empty()) {
        throw ConfigError("expected a number, got an empty value");
    }
    errno = 0;
    char *end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || errno == ERANGE || std::isnan(v)) {
        throw ConfigError("expected a number, got '" + t + "'");
    }
    return v;
}

long long parse_int(const std::string &s) {
    double v = parse_double(s);
    if (v != std::floor(v) || std::abs(v) > 9.0e18) {
        throw ConfigError("expected an integer, got '" + trim(s) + "'");
    }
    return static_cast<long long>(v);
}

bool parse_bool(const std::string &s) {
    std::string t = trim(s);
    if (t == "true" || t == "1" || t == "yes" || t == "on") {
        return true;
    }
    if (t == "false" || t == "0" || t == "no" || t == "off") {
        return false;
    }
    throw ConfigError("expected a boolean, got '" + t + "'");
}

std::vector<double> parse_list(const std::string &s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(parse_double(item));
    }
    if (out.empty()) {
        throw ConfigError("expected a comma-separated list of numbers");
    }
    return out;
}

std::string fmt_list(const std::vector<double> &v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        out += (i ? "," : "") + fmt_double(v[i]);
    }
    return out;
}

Field real(const std::string &key, std::function<double &(Cfg &)> ref) {
    return {key, [ref](const Cfg &c) { return fmt_double(ref(const_cast<Cfg &>(c))); },
            [ref](Cfg &c, const std::string &v) { ref(c) = parse_double(v); }};
}

Field integer(const std::string &key, std::function<long long(const Cfg &)> get,
              std::function<void(Cfg &, long long)> set) {
    return {key, [get](const Cfg &c) { return std::to_string(get(c)); },
            [set](Cfg &c, const std::string &v) { set(c, parse_int(v)); }};
}

Field boolean(const std::string &key, std::function<bool &(Cfg &)> ref) {
    return {key, [ref](const Cfg &c) { return std::string(ref(const_cast<Cfg &>(c)) ? "true" : "false"); },
            [ref](Cfg &c, const std::string &v) { ref(c) = parse_bool(v); }};
}

Field range(const std::string &key, std::function<std::array<double, 2> &(Cfg &)> ref, int idx) {
    return real(key, [ref, idx](Cfg &c) -> double & { return ref(c)[idx]; });
}

void set_curve_column(Cfg &c, const std::vector<double> &v, bool rates) {
    auto &curve = c.link.detector.eff_curve;
    if (curve.size() < v.size()) {
        auto pad = curve.empty() ? std::pair<double, double>{1.0, 1.0} : curve.back();
        curve.resize(v.size(), pad);
    } else {
        curve.resize(v.size());
    }
    for (size_t i = 0; i < v.size(); ++i) {
        (rates ? curve[i].first : curve[i].second) = v[i];
    }
}

const std::vector<Field> &schema() {
    static const std::vector<Field> fields = [] {
        std::vector<Field> f;
        // chip
        f.push_back({"chip.gc_isolation_db", [](const Cfg &c) { return fmt_double(c.chip.gc_isolation_db); },
                     [](Cfg &c, const std::string &v) { c.chip.set_isolation_db(parse_double(v)); }});
        f.push_back(real("chip.zeta", [](Cfg &c) -> double & { return c.chip.zeta; }));
        f.push_back(real("chip.v_2pi", [](Cfg &c) -> double & { return c.chip.v_2pi; }));
        f.push_back(real("chip.ep_loss_slope_db_per_v", [](Cfg &c) -> double & { return c.chip.ep_loss_slope_db_per_v; }));
        f.push_back(real("chip.mzi_er_floor_db", [](Cfg &c) -> double & { return c.chip.mzi_er_floor_db; }));
        f.push_back(real("chip.insertion_loss_db", [](Cfg &c) -> double & { return c.chip.insertion_loss_db; }));
        f.push_back(real("chip.v_max", [](Cfg &c) -> double & { return c.chip.v_max; }));
        f.push_back(real("chip.mu_cal", [](Cfg &c) -> double & { return c.chip.mu_cal; }));
        // calibration
        f.push_back(real("calibration.target_error",
                         [](Cfg &c) -> double & { return c.calibration.options.target_error; }));
        f.push_back(integer(
            "calibration.max_sweeps", [](const Cfg &c) { return c.calibration.options.max_sweeps; },
            [](Cfg &c, long long v) { c.calibration.options.max_sweeps = static_cast<int>(v); }));
        f.push_back(integer(
            "calibration.max_evals_per_search",
            [](const Cfg &c) { return c.calibration.options.max_evals_per_search; },
            [](Cfg &c, long long v) { c.calibration.options.max_evals_per_search = static_cast<int>(v); }));
        f.push_back(integer(
            "calibration.samples_per_measurement",
            [](const Cfg &c) { return c.calibration.options.samples_per_measurement; },
            [](Cfg &c, long long v) { c.calibration.options.samples_per_measurement = static_cast<int>(v); }));
        f.push_back(real("calibration.noise_sigma", [](Cfg &c) -> double & { return c.calibration.noise_sigma; }));
        f.push_back(boolean("calibration.random_start",
                            [](Cfg &c) -> bool & { return c.calibration.options.random_start; }));
        f.push_back(integer(
            "calibration.grid_resolution", [](const Cfg &c) { return c.calibration.grid_resolution; },
            [](Cfg &c, long long v) { c.calibration.grid_resolution = static_cast<int>(v); }));
        // link
        f.push_back(real("link.length_km", [](Cfg &c) -> double & { return c.link.length_km; }));
        f.push_back(real("link.atten_db_per_km", [](Cfg &c) -> double & { return c.link.atten_db_per_km; }));
        f.push_back(real("link.drift_rate", [](Cfg &c) -> double & { return c.link.drift_rate; }));
        f.push_back(real("link.basis_split", [](Cfg &c) -> double & { return c.link.basis_split; }));
        f.push_back(real("link.pbs_er_db", [](Cfg &c) -> double & { return c.link.pbs_er_db; }));
        f.push_back(real("link.bob_loss_db", [](Cfg &c) -> double & { return c.link.bob_loss_db; }));
        f.push_back(real("link.rep_rate_hz", [](Cfg &c) -> double & { return c.link.rep_rate_hz; }));
        // detector
        f.push_back({"detector.eff_rates_hz",
                     [](const Cfg &c) {
                         std::vector<double> v;
                         for (auto &p : c.link.detector.eff_curve) v.push_back(p.first);
                         return fmt_list(v);
                     },
                     [](Cfg &c, const std::string &v) { set_curve_column(c, parse_list(v), true); }});
        f.push_back({"detector.eff_values",
                     [](const Cfg &c) {
                         std::vector<double> v;
                         for (auto &p : c.link.detector.eff_curve) v.push_back(p.second);
                         return fmt_list(v);
                     },
                     [](Cfg &c, const std::string &v) { set_curve_column(c, parse_list(v), false); }});
        f.push_back(real("detector.dark_rate_hz", [](Cfg &c) -> double & { return c.link.detector.dark_rate_hz; }));
        f.push_back(real("detector.jitter_fwhm_ps", [](Cfg &c) -> double & { return c.link.detector.jitter_fwhm_ps; }));
        f.push_back(real("detector.jitter_fw1pm_ps",
                         [](Cfg &c) -> double & { return c.link.detector.jitter_fw1pm_ps; }));
        f.push_back(real("detector.laser_fwhm_ps", [](Cfg &c) -> double & { return c.link.detector.laser_fwhm_ps; }));
        f.push_back(real("detector.laser_jitter_rms_ps",
                         [](Cfg &c) -> double & { return c.link.detector.laser_jitter_rms_ps; }));
        f.push_back(boolean("detector.jitter_tails", [](Cfg &c) -> bool & { return c.link.detector.jitter_tails; }));
        // protocol
        f.push_back(real("protocol.mu1", [](Cfg &c) -> double & { return c.protocol.mu1; }));
        f.push_back(real("protocol.mu2", [](Cfg &c) -> double & { return c.protocol.mu2; }));
        f.push_back(real("protocol.p_mu1", [](Cfg &c) -> double & { return c.protocol.p_mu1; }));
        f.push_back(real("protocol.pz_alice", [](Cfg &c) -> double & { return c.protocol.pz_alice; }));
        f.push_back(integer(
            "protocol.block_pulses", [](const Cfg &c) { return static_cast<long long>(c.protocol.block_pulses); },
            [](Cfg &c, long long v) { c.protocol.block_pulses = v; }));
        // security
        f.push_back(real("security.eps_sec", [](Cfg &c) -> double & { return c.security.eps_sec; }));
        f.push_back(real("security.eps_cor", [](Cfg &c) -> double & { return c.security.eps_cor; }));
        f.push_back(real("security.f_ec", [](Cfg &c) -> double & { return c.security.f_ec; }));
        // optimizer
        f.push_back(boolean("optimizer.enabled", [](Cfg &c) -> bool & { return c.optimizer.enabled; }));
        auto sp = [](auto member) {
            return [member](Cfg &c) -> std::array<double, 2> & { return c.optimizer.space.*member; };
        };
        f.push_back(range("optimizer.mu1_min", sp(&SearchSpace::mu1), 0));
        f.push_back(range("optimizer.mu1_max", sp(&SearchSpace::mu1), 1));
        f.push_back(range("optimizer.mu2_min", sp(&SearchSpace::mu2), 0));
        f.push_back(range("optimizer.mu2_max", sp(&SearchSpace::mu2), 1));
        f.push_back(range("optimizer.p_mu1_min", sp(&SearchSpace::p_mu1), 0));
        f.push_back(range("optimizer.p_mu1_max", sp(&SearchSpace::p_mu1), 1));
        f.push_back(range("optimizer.pz_alice_min", sp(&SearchSpace::pz_alice), 0));
        f.push_back(range("optimizer.pz_alice_max", sp(&SearchSpace::pz_alice), 1));
        // spgd
        f.push_back(real("spgd.gain", [](Cfg &c) -> double & { return c.spgd.params.gain; }));
        f.push_back(real("spgd.perturbation", [](Cfg &c) -> double & { return c.spgd.params.perturbation; }));
        f.push_back(real("spgd.range", [](Cfg &c) -> double & { return c.spgd.params.range; }));
        f.push_back(real("spgd.probe_budget", [](Cfg &c) -> double & { return c.spgd.params.probe_budget; }));
        f.push_back(real("spgd.dt_s", [](Cfg &c) -> double & { return c.spgd.dt_s; }));
        // experiment
        f.push_back(integer(
            "experiment.seed", [](const Cfg &c) { return static_cast<long long>(c.experiment.seed); },
            [](Cfg &c, long long v) {
                if (v < 0) throw ConfigError("experiment.seed must be non-negative");
                c.experiment.seed = static_cast<std::uint64_t>(v);
            }));
        f.push_back({"experiment.distances_km", [](const Cfg &c) { return fmt_list(c.experiment.distances_km); },
                     [](Cfg &c, const std::string &v) { c.experiment.distances_km = parse_list(v); }});
        f.push_back(real("experiment.operating_km", [](Cfg &c) -> double & { return c.experiment.operating_km; }));
        f.push_back(integer(
            "experiment.stability_blocks", [](const Cfg &c) { return c.experiment.stability_blocks; },
            [](Cfg &c, long long v) { c.experiment.stability_blocks = static_cast<int>(v); }));
        f.push_back(real("experiment.stability_block_s",
                         [](Cfg &c) -> double & { return c.experiment.stability_block_s; }));
        f.push_back(real("experiment.stability_warmup_s",
                         [](Cfg &c) -> double & { return c.experiment.stability_warmup_s; }));
        f.push_back(real("experiment.spgd_duration_s",
                         [](Cfg &c) -> double & { return c.experiment.spgd_duration_s; }));
        f.push_back(integer(
            "experiment.mc_seeds", [](const Cfg &c) { return c.experiment.mc_seeds; },
            [](Cfg &c, long long v) { c.experiment.mc_seeds = static_cast<int>(v); }));
        f.push_back(integer(
            "experiment.mc_pulses", [](const Cfg &c) { return static_cast<long long>(c.experiment.mc_pulses); },
            [](Cfg &c, long long v) { c.experiment.mc_pulses = v; }));
        f.push_back(real("experiment.mc_sigma_limit", [](Cfg &c) -> double & { return c.experiment.mc_sigma_limit; }));
        f.push_back({"experiment.out_dir", [](const Cfg &c) { return c.experiment.out_dir; },
                     [](Cfg &c, const std::string &v) { c.experiment.out_dir = trim(v); }});
        return f;
    }();
    return fields;
}

const Field &find_field(const std::string &key, int line) {
    for (const auto &f : schema()) {
        if (f.key == key) {
            return f;
        }
    }
    throw ConfigError("unknown key '" + key + "'", line);
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
    protocol.block_pulses = 500'000'000'000LL;
}

void ExperimentConfig::set(const std::string &dotted_key, const std::string &value, int line) {
    const Field &f = find_field(trim(dotted_key), line);
    try {
        f.set(*this, value);
    } catch (const ConfigError &e) {
        if (line > 0 && e.line == 0) {
            throw ConfigError(f.key + ": " + e.what(), line);
        }
        throw;
    }
}

std::string ExperimentConfig::get(const std::string &dotted_key) const {
    return find_field(dotted_key, 0).get(*this);
}

void ExperimentConfig::validate() const {
    chip.validate();
    const auto &o = calibration.options;
    if (!(o.target_error > 0.0 && o.target_error < 0.1)) {
        throw ConfigError("calibration.target_error must lie in (0, 0.1)");
    }
    if (o.max_sweeps < 1 || o.max_evals_per_search < 10 || o.samples_per_measurement < 1) {
        throw ConfigError("calibration: need max_sweeps >= 1, max_evals_per_search >= 10, samples >= 1");
    }
    if (!(calibration.noise_sigma >= 0.0)) {
        throw ConfigError("calibration.noise_sigma must be non-negative");
    }
    if (calibration.grid_resolution < 64) {
        throw ConfigError("calibration.grid_resolution must be >= 64");
    }
    link.validate();
    protocol.validate();
    security.validate();
    optimizer.space.validate();
    spgd.params.validate();
    if (!(spgd.dt_s > 0.0)) {
        throw ConfigError("spgd.dt_s must be positive");
    }
    const auto &e = experiment;
    for (double d : e.distances_km) {
        if (!(d >= 0.0)) {
            throw ConfigError("experiment.distances_km must be non-negative");
        }
    }
    if (!(e.operating_km >= 0.0) || e.stability_blocks < 1 || !(e.stability_block_s > 0.0) ||
        !(e.stability_warmup_s >= 0.0) ||
        !(e.spgd_duration_s > 0.0) || e.mc_seeds < 1 || e.mc_pulses < 1 || !(e.mc_sigma_limit > 0.0)) {
        throw ConfigError("experiment: counts and durations must be positive");
    }
    if (e.out_dir.empty()) {
        throw ConfigError("experiment.out_dir must not be empty");
    }
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::canonical() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto &f : schema()) {
        out.emplace_back(f.key, f.get(*this));
    }
    return out;
}

std::uint64_t ExperimentConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto &[k, v] : canonical()) {
        if (k == "experiment.out_dir") {
            continue;
        }
        std::string line = k + "=" + v + "\n";
        for (unsigned char ch : line) {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::string ExperimentConfig::hash_hex() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
    return buf;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto &f : schema()) {
        keys.push_back(f.key);
    }
    return keys;
}

ExperimentConfig parse_config(std::istream &in) {
    ExperimentConfig cfg;
    std::string raw;
    std::string section;
    std::set<std::string> seen;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("unterminated section header", line_no);
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw ConfigError("empty section name", line_no);
            }
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("expected 'key = value'", line_no);
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        size_t hash = value.find(" #");
        if (hash != std::string::npos) {
            value = trim(value.substr(0, hash));
        }
        if (key.empty()) {
            throw ConfigError("missing key before '='", line_no);
        }
        if (section.empty()) {
            throw ConfigError("key '" + key + "' appears before any [section]", line_no);
        }
        std::string dotted = section + "." + key;
        if (!seen.insert(dotted).second) {
            throw ConfigError("duplicate key '" + dotted + "'", line_no);
        }
        cfg.set(dotted, value, line_no);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    return parse_config(in);
}

void apply_override(ExperimentConfig &cfg, const std::string &assignment) {
    size_t eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("override must look like section.key=value: '" + assignment + "'");
    }
    cfg.set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

std::string render_config(const ExperimentConfig &cfg) {
    std::string out;
    std::string section;
    for (const auto &[k, v] : cfg.canonical()) {
        std::string s = k.substr(0, k.find('.'));
        if (s != section) {
            out += (section.empty() ? "[" : "\n[") + s + "]\n";
            section = s;
        }
        out += k.substr(k.find('.') + 1) + " = " + v + "\n";
    }
    return out;
}

}  // namespace qkdsim
