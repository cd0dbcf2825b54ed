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

#include "qkdsim/experiments.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "qkdsim/rng.h"

namespace qkdsim {

namespace {

std::string fmt(const char *f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

std::string g17(double x) {
    return fmt("%.17g", x);
}

ProtocolParams run_protocol(const ExperimentConfig &cfg) {
    ProtocolParams pp = cfg.protocol;
    pp.seed = cfg.experiment.seed;
    return pp;
}

LinkParams operating_link(const ExperimentConfig &cfg) {
    LinkParams lp = cfg.link;
    lp.length_km = cfg.experiment.operating_km;
    lp.validate();
    return lp;
}

ProtocolParams operating_point(const ExperimentConfig &cfg, const LinkParams &lp, const CalibrationResult &cal) {
    ProtocolParams pp = run_protocol(cfg);
    if (!cfg.optimizer.enabled) {
        return pp;
    }
    OptimizedPoint best = optimize_params(lp, cfg.chip, cal, cfg.security, cfg.optimizer.space, pp);
    return best.params;
}

std::string params_line(const ProtocolParams &pp) {
    return "mu1=" + fmt("%.4f", pp.mu1) + " mu2=" + fmt("%.4f", pp.mu2) + " p_mu1=" + fmt("%.4f", pp.p_mu1) +
           " pz_alice=" + fmt("%.4f", pp.pz_alice);
}

// Same model with the single-photon projections recomputed for a new
// channel and EPC.
PulseModel with_projections(const PulseModel &base, const LinkParams &lp, const PolTransform &channel,
                            const PolTransform &epc) {
    PulseModel m = base;
    for (int s = 0; s < 4; ++s) {
        m.proj[s] = projection_probs(m.states[s], channel, epc, lp);
    }
    return m;
}

struct Tally {
    std::string name;
    double observed;
    double expected;
};

std::vector<Tally> tallies(const ObservedCounts &obs, const ObservedCounts &exp) {
    static const char *basis[2] = {"Z", "X"};
    static const char *level[2] = {"mu1", "mu2"};
    static const char *state[4] = {"H", "V", "plus", "minus"};
    std::vector<Tally> t;
    for (int b = 0; b < 2; ++b) {
        for (int k = 0; k < 2; ++k) {
            t.push_back({std::string("n_") + basis[b] + "_" + level[k], obs.n[b][k], exp.n[b][k]});
            t.push_back({std::string("m_") + basis[b] + "_" + level[k], obs.m[b][k], exp.m[b][k]});
        }
    }
    for (int s = 0; s < 4; ++s) {
        for (int k = 0; k < 2; ++k) {
            t.push_back({std::string("sent_") + state[s] + "_" + level[k], obs.sent[s][k], exp.sent[s][k]});
        }
    }
    t.push_back({"double_clicks", obs.double_clicks, exp.double_clicks});
    t.push_back({"crosstalk_events", obs.crosstalk_events, exp.crosstalk_events});
    t.push_back({"single_photon_z", obs.single_photon_z, exp.single_photon_z});
    return t;
}

}  // namespace

std::vector<std::string> experiment_names() {
    return {"calibrate", "skr-curve", "stability", "mc-vs-analytic", "spgd-demo"};
}

RunReport run_experiment(const std::string &name, const ExperimentConfig &cfg) {
    cfg.validate();
    if (name == "calibrate") return run_calibrate(cfg);
    if (name == "skr-curve") return run_skr_curve(cfg);
    if (name == "stability") return run_stability(cfg);
    if (name == "mc-vs-analytic") return run_mc_vs_analytic(cfg);
    if (name == "spgd-demo") return run_spgd_demo(cfg);
    throw ConfigError("unknown experiment '" + name + "'");
}

std::string csv_preamble(const ExperimentConfig &cfg, const std::string &kind) {
    std::string out;
    out += "# qkdsim " + std::string(kVersion) + "\n";
    out += "# kind=" + kind + "\n";
    out += "# config_hash=" + cfg.hash_hex() + "\n";
    out += "# seed=" + std::to_string(cfg.experiment.seed) + "\n";
    return out;
}

std::vector<std::string> write_report(const RunReport &report, const std::string &dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
    }
    std::vector<std::string> paths;
    for (const auto &f : report.files) {
        fs::path p = fs::path(dir) / f.name;
        std::ofstream out(p, std::ios::binary);
        out << f.content;
        if (!out) {
            throw std::runtime_error("cannot write '" + p.string() + "'");
        }
        paths.push_back(p.string());
    }
    return paths;
}

MetricSummary summarize(const std::string &metric, const std::vector<double> &values) {
    if (values.empty()) {
        throw ContractError("summarize: need at least one value");
    }
    MetricSummary s;
    s.metric = metric;
    s.n = static_cast<int>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / s.n;
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    if (s.n == 1) {
        s.single = true;
        return s;
    }
    double ss = 0.0;
    for (double v : values) {
        ss += (v - s.mean) * (v - s.mean);
    }
    s.std = std::sqrt(ss / (s.n - 1));
    return s;
}

TrendFit linear_trend(const std::vector<double> &y) {
    const size_t n = y.size();
    if (n < 3) {
        throw ContractError("linear_trend: need at least 3 values");
    }
    double xm = 0.5 * static_cast<double>(n - 1);
    double ym = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0;
    double sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double dx = static_cast<double>(i) - xm;
        sxx += dx * dx;
        sxy += dx * (y[i] - ym);
    }
    TrendFit t;
    t.slope = sxy / sxx;
    std::vector<double> u(n);
    double rss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double r = y[i] - ym - t.slope * (static_cast<double>(i) - xm);
        rss += r * r;
        u[i] = (static_cast<double>(i) - xm) * r;
    }
    t.stderr_slope = std::sqrt(rss / static_cast<double>(n - 2) / sxx);

    t.lag = static_cast<int>(std::floor(4.0 * std::pow(static_cast<double>(n) / 100.0, 2.0 / 9.0)));
    t.lag = std::min<int>(t.lag, static_cast<int>(n) - 1);
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) {
        s += u[i] * u[i];
    }
    for (int l = 1; l <= t.lag; ++l) {
        double w = 1.0 - static_cast<double>(l) / (t.lag + 1.0);
        double c = 0.0;
        for (size_t i = static_cast<size_t>(l); i < n; ++i) {
            c += u[i] * u[i - l];
        }
        s += 2.0 * w * c;
    }
    double dof = static_cast<double>(n) / static_cast<double>(n - 2);
    t.stderr_hac = std::sqrt(std::max(s, 0.0) * dof) / sxx;
    return t;
}

std::string summary_table(const std::vector<MetricSummary> &rows) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-10s %14s %14s %14s %14s %5s\n", "metric", "mean", "std", "min", "max", "n");
    out += buf;
    for (const auto &r : rows) {
        std::snprintf(buf, sizeof buf, "%-10s %14.6g %14.6g %14.6g %14.6g %5d%s\n", r.metric.c_str(), r.mean, r.std,
                      r.min, r.max, r.n, r.single ? "  (n=1, std undefined)" : "");
        out += buf;
    }
    return out;
}

std::string summary_csv(const std::vector<MetricSummary> &rows) {
    std::string out = "metric,mean,std,min,max,n,single\n";
    for (const auto &r : rows) {
        out += r.metric + "," + g17(r.mean) + "," + g17(r.std) + "," + g17(r.min) + "," + g17(r.max) + "," +
               std::to_string(r.n) + "," + (r.single ? "1" : "0") + "\n";
    }
    return out;
}

CalibrationResult calibrate_from_config(const ExperimentConfig &cfg) {
    ProjectionProbe probe = model_probe(cfg.chip);
    if (cfg.calibration.noise_sigma > 0.0) {
        probe = noisy_probe(probe, cfg.calibration.noise_sigma, stream_seed(cfg.experiment.seed, 21));
    }
    CalibrationOptions opt = cfg.calibration.options;
    opt.seed = stream_seed(cfg.experiment.seed, 20);
    try {
        return calibrate(cfg.chip, probe, opt);
    } catch (const CalibrationError &e) {
        throw InvariantError(std::string("calibration did not converge: ") + e.what());
    }
}

RunReport run_calibrate(const ExperimentConfig &cfg) {
    RunReport rep;
    ProjectionProbe probe = model_probe(cfg.chip);
    if (cfg.calibration.noise_sigma > 0.0) {
        probe = noisy_probe(probe, cfg.calibration.noise_sigma, stream_seed(cfg.experiment.seed, 21));
    }
    CalibrationOptions opt = cfg.calibration.options;
    opt.seed = stream_seed(cfg.experiment.seed, 20);

    CalibrationResult cal;
    std::string failure;
    try {
        cal = calibrate(cfg.chip, probe, opt);
    } catch (const CalibrationError &e) {
        cal = e.best();
        failure = e.what();
    }

    std::ostringstream traj;
    traj << csv_preamble(cfg, "trajectory");
    write_trajectory_csv(traj, cal.trajectory);
    rep.files.push_back({"trajectory.csv", traj.str()});
    std::ostringstream xtraj;
    xtraj << csv_preamble(cfg, "x_trajectory");
    write_trajectory_csv(xtraj, cal.x_trajectory);
    rep.files.push_back({"x_trajectory.csv", xtraj.str()});

    GridOracleResult grid = grid_oracle(cfg.chip, cfg.calibration.grid_resolution);
    std::string land = csv_preamble(cfg, "landscape") + "dphi2_rad,dphi3_rad,r_err\n";
    for (int i = 0; i < grid.resolution; ++i) {
        for (int j = 0; j < grid.resolution; ++j) {
            land += g17(grid.axis(i)) + "," + g17(grid.axis(j)) + "," + g17(grid.at(i, j)) + "\n";
        }
    }
    rep.files.push_back({"landscape.csv", land});

    std::string settings = csv_preamble(cfg, "settings") +
                           "state,v_ep1_plus,v_ep1_minus,v_ep2_plus,v_ep2_minus,v_ep3_plus,v_ep3_minus,"
                           "phi_tp1,phi_tp2,phi_tp3,phi_tp_voa,residual\n";
    static const char *names[4] = {"H", "V", "plus", "minus"};
    for (int s = 0; s < 4; ++s) {
        const DriveSettings &d = cal.settings[s];
        settings += std::string(names[s]) + "," + g17(d.v_ep1_plus) + "," + g17(d.v_ep1_minus) + "," +
                    g17(d.v_ep2_plus) + "," + g17(d.v_ep2_minus) + "," + g17(d.v_ep3_plus) + "," +
                    g17(d.v_ep3_minus) + "," + g17(d.phi_tp1) + "," + g17(d.phi_tp2) + "," + g17(d.phi_tp3) + "," +
                    g17(d.phi_tp_voa) + "," + g17(cal.residual_error[s]) + "\n";
    }
    rep.files.push_back({"settings.csv", settings});

    std::ostringstream text;
    text << "calibrate: gc_isolation_db=" << cfg.chip.gc_isolation_db << " zeta=" << cfg.chip.zeta << "\n";
    text << "  Z sweeps: " << cal.iterations_used << "  R_err(V)=" << fmt("%.3e", cal.residual_error[1])
         << "  R_err(H)=" << fmt("%.3e", cal.residual_error[0]) << "\n";
    if (cal.x_complete) {
        IntensityImbalance imb = intensity_imbalance(cal, cfg.chip);
        text << "  X sweeps: " << cal.x_iterations_used << "  chi=" << fmt("%.6f", cal.chi)
             << "  MUB defect=" << fmt("%.3e", mub_defect(cal, cfg.chip))
             << "  intensity imbalance=" << fmt("%.4f", imb.signal) << "\n";
    }
    text << "  grid " << grid.resolution << "^2 minimum: R_err=" << fmt("%.3e", grid.global.refined_r_err)
         << " at (" << fmt("%.4f", grid.global.refined_dphi2) << ", " << fmt("%.4f", grid.global.refined_dphi3)
         << "), " << grid.local_minima.size() << " local minima\n";
    rep.text = text.str();
    if (!failure.empty()) {
        rep.text += "  FAILED: " + failure + "\n";
        throw InvariantReportError("calibration did not converge: " + failure, rep);
    }
    return rep;
}

RunReport run_skr_curve(const ExperimentConfig &cfg) {
    CalibrationResult cal = calibrate_from_config(cfg);
    auto curve = skr_vs_distance(cfg.experiment.distances_km, cfg.link, cfg.chip, cal, cfg.security,
                                 cfg.optimizer.space, run_protocol(cfg), cfg.optimizer.enabled);
    RunReport rep;
    std::ostringstream csv;
    csv << csv_preamble(cfg, "skr_curve");
    write_skr_csv(csv, curve);
    rep.files.push_back({"skr_curve.csv", csv.str()});

    std::string text = "skr-curve (" + std::string(cfg.optimizer.enabled ? "optimized" : "fixed") + " parameters)\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "%10s %14s %9s %9s %7s %7s %7s %7s\n", "km", "skr_bps", "qber_z", "qber_x", "mu1",
                  "mu2", "p_mu1", "pz");
    text += buf;
    for (const auto &p : curve) {
        std::snprintf(buf, sizeof buf, "%10.1f %14.6g %9.5f %9.5f %7.4f %7.4f %7.4f %7.4f\n", p.distance_km, p.skr_bps,
                      p.qber_z, p.qber_x, p.params.mu1, p.params.mu2, p.params.p_mu1, p.params.pz_alice);
        text += buf;
    }
    rep.text = text;
    return rep;
}

RunReport run_stability(const ExperimentConfig &cfg) {
    CalibrationResult cal = calibrate_from_config(cfg);
    LinkParams lp = operating_link(cfg);
    ProtocolParams pp = operating_point(cfg, lp, cal);
    const auto states = alice_states(cal, cfg.chip);
    const PulseModel base = make_pulse_model(lp, states, PolTransform::identity(), ideal_epc(cal.chi), pp.mean_mu());

    const std::uint64_t seed = cfg.experiment.seed;
    SpgdController ctrl;
    ctrl.params = cfg.spgd.params;
    ctrl.voltages = {-cal.chi, 0.0, 0.0, 0.0};
    Compensator comp(lp, states, ctrl, {stream_seed(seed, 31), stream_seed(seed, 32), stream_seed(seed, 33)});
    std::mt19937_64 rng(stream_seed(seed, 34));

    // One SPGD step and one binned batch per spgd.dt_s.
    const long batches = std::max(1L, std::lround(cfg.experiment.stability_block_s / cfg.spgd.dt_s));
    const double batch_pulses = cfg.experiment.stability_block_s * lp.rep_rate_hz / static_cast<double>(batches);
    const double dt = cfg.experiment.stability_block_s / static_cast<double>(batches);
    const long warmup = std::lround(cfg.experiment.stability_warmup_s / dt);
    for (long i = 0; i < warmup; ++i) {
        comp.advance(dt);
    }

    std::vector<double> skr, qz, qx, mis;
    std::string rows = csv_preamble(cfg, "stability") + "block,t_end_s,skr_bps,qber_z,qber_x,misalignment,l\n";
    for (int b = 0; b < cfg.experiment.stability_blocks; ++b) {
        ObservedCounts block;
        double mis_sum = 0.0;
        for (long i = 0; i < batches; ++i) {
            mis_sum += comp.advance(dt);
            PulseModel m = with_projections(base, lp, comp.channel().birefringence, comp.epc());
            block += sample_block_binned(pp, m, batch_pulses, rng);
        }
        SecretLengthResult r = secret_length(block, pp, cfg.security);
        skr.push_back(r.skr_bps);
        qz.push_back(r.qber_z);
        qx.push_back(r.qber_x);
        mis.push_back(mis_sum / static_cast<double>(batches));
        rows += std::to_string(b) + "," + g17(comp.channel().elapsed_s) + "," + g17(r.skr_bps) + "," +
                g17(r.qber_z) + "," + g17(r.qber_x) + "," + g17(mis.back()) + "," + g17(r.l) + "\n";
    }

    RunReport rep;
    rep.files.push_back({"stability.csv", rows});
    std::vector<MetricSummary> sum{summarize("skr_bps", skr), summarize("qber_z", qz), summarize("qber_x", qx),
                                   summarize("misalign", mis)};
    rep.files.push_back({"summary.csv", csv_preamble(cfg, "summary") + summary_csv(sum)});

    std::string text = "stability at " + fmt("%.1f", lp.length_km) + " km, " +
                       std::to_string(cfg.experiment.stability_blocks) + " blocks of " +
                       fmt("%.6g", cfg.experiment.stability_block_s) + " s\n  " + params_line(pp) + "\n";
    text += summary_table(sum);
    if (skr.size() >= 3) {
        TrendFit t = linear_trend(skr);
        text += "  SKR relative std " + fmt("%.4f", sum[0].mean > 0 ? sum[0].std / sum[0].mean : 0.0) +
                ", trend slope " + fmt("%.4g", t.slope) + " bps/block (OLS se " + fmt("%.4g", t.stderr_slope) +
                ", HAC se " + fmt("%.4g", t.stderr_hac) + ")\n";
    }
    rep.text = text;
    return rep;
}

RunReport run_mc_vs_analytic(const ExperimentConfig &cfg) {
    CalibrationResult cal = calibrate_from_config(cfg);
    LinkParams lp = operating_link(cfg);
    ProtocolParams pp = run_protocol(cfg);
    pp.block_pulses = cfg.experiment.mc_pulses;
    const PulseModel model = make_pulse_model(pp, lp, cal, cfg.chip);
    const ObservedCounts expect = expected_statistics(pp, model);
    const double limit = cfg.experiment.mc_sigma_limit;

    std::string rows = csv_preamble(cfg, "mc_vs_analytic") + "run,tally,observed,expected,z\n";
    double worst = 0.0;
    std::string worst_name;
    int failures = 0;
    for (int r = 0; r < cfg.experiment.mc_seeds; ++r) {
        ObservedCounts obs = simulate_block(pp, model, stream_seed(cfg.experiment.seed, 100 + r));
        for (const auto &t : tallies(obs, expect)) {
            double z = (t.observed - t.expected) / std::sqrt(std::max(t.expected, 1.0));
            rows += std::to_string(r) + "," + t.name + "," + g17(t.observed) + "," + g17(t.expected) + "," + g17(z) +
                    "\n";
            if (std::abs(z) > worst) {
                worst = std::abs(z);
                worst_name = t.name + " (run " + std::to_string(r) + ")";
            }
            if (std::abs(z) > limit) {
                ++failures;
            }
        }
    }
    RunReport rep;
    rep.files.push_back({"mc_vs_analytic.csv", rows});
    rep.text = "mc-vs-analytic: " + std::to_string(cfg.experiment.mc_seeds) + " runs x " +
               std::to_string(cfg.experiment.mc_pulses) + " pulses at " + fmt("%.1f", lp.length_km) + " km\n" +
               "  worst |z| = " + fmt("%.3f", worst) + " (" + worst_name + "), limit " + fmt("%.2f", limit) + "\n";
    if (failures > 0) {
        rep.text += "  FAILED: " + std::to_string(failures) + " tallies outside the limit\n";
        throw InvariantReportError(std::to_string(failures) + " Monte Carlo tallies outside " + fmt("%.2f", limit) +
                                       " sigma",
                                   rep);
    }
    return rep;
}

RunReport run_spgd_demo(const ExperimentConfig &cfg) {
    CalibrationResult cal = calibrate_from_config(cfg);
    LinkParams lp = operating_link(cfg);
    const auto states = alice_states(cal, cfg.chip);
    SpgdController ctrl;
    ctrl.params = cfg.spgd.params;
    ctrl.voltages = {-cal.chi, 0.0, 0.0, 0.0};
    ChannelState channel;
    const std::uint64_t seed = cfg.experiment.seed;
    auto trace = run_compensation(lp, states, ctrl, channel, cfg.experiment.spgd_duration_s, cfg.spgd.dt_s,
                                  {stream_seed(seed, 41), stream_seed(seed, 42), stream_seed(seed, 43)});
    RunReport rep;
    std::ostringstream csv;
    csv << csv_preamble(cfg, "spgd_trace");
    write_trace_csv(csv, trace);
    rep.files.push_back({"spgd_trace.csv", csv.str()});

    std::vector<double> q;
    for (const auto &s : trace) {
        q.push_back(s.qber_proxy);
    }
    std::string text = "spgd-demo: " + std::to_string(trace.size()) + " steps of " + fmt("%.6g", cfg.spgd.dt_s) +
                       " s, drift_rate " + fmt("%.6g", lp.drift_rate) + "\n";
    if (!q.empty()) {
        std::vector<double> sorted = q;
        std::sort(sorted.begin(), sorted.end());
        size_t idx = static_cast<size_t>(std::ceil(0.95 * static_cast<double>(sorted.size()))) - 1;
        MetricSummary s = summarize("misalign", q);
        text += "  misalignment mean " + fmt("%.5f", s.mean) + ", p95 " + fmt("%.5f", sorted[idx]) + ", max " +
                fmt("%.5f", s.max) + "\n";
    }
    rep.text = text;
    return rep;
}

}  // namespace qkdsim
