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

#include "qkdsim/calibration.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>
#include <random>

#include "qkdsim/errors.h"

namespace qkdsim {

namespace {

const double kGolden = 0.5 * (std::sqrt(5.0) - 1.0);

struct LineResult {
    double x = 0.0;
    double fx = 0.0;
};

// Golden-section search on [lo, hi] using at most `evals` evaluations.
template <class F>
LineResult golden_section(F &&f, double lo, double hi, int evals) {
    double a = lo, b = hi;
    double c = b - kGolden * (b - a);
    double d = a + kGolden * (b - a);
    double fc = f(c);
    double fd = f(d);
    int used = 2;
    while (used < evals) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kGolden * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kGolden * (b - a);
            fd = f(d);
        }
        ++used;
    }
    return fc <= fd ? LineResult{c, fc} : LineResult{d, fd};
}

double wrap_phase(double x) {
    double y = std::remainder(x, 2.0 * kPi);
    return y <= -kPi ? y + 2.0 * kPi : y;
}

class Meter {
   public:
    Meter(const ProjectionProbe &probe, int samples) : probe_(probe), samples_(std::max(1, samples)) {
    }
    double operator()(const DriveSettings &d, const PolarizationState &analyzer) const {
        double s = 0.0;
        for (int i = 0; i < samples_; ++i) {
            s += probe_(d, analyzer);
        }
        return s / samples_;
    }

   private:
    const ProjectionProbe &probe_;
    int samples_;
};

StokesVector model_stokes(const DriveSettings &d, const ChipParams &p) {
    return to_stokes(transmitter_output(d, p).state);
}

PolarizationState state_from_stokes(StokesVector s) {
    double n = s.norm();
    if (!(n > 0.0)) {
        return PolarizationState::horizontal();
    }
    s.s1 /= n;
    s.s2 /= n;
    s.s3 /= n;
    double h = std::sqrt(std::max(0.0, 0.5 * (1.0 + s.s1)));
    if (h < 1e-12) {
        return PolarizationState::vertical();
    }
    return PolarizationState(h, Complex(s.s2, s.s3) / (2.0 * h));
}

void check_options(const CalibrationOptions &opt) {
    if (!(opt.target_error > 0.0) || opt.max_sweeps < 1 || opt.max_evals_per_search < 10 ||
        opt.samples_per_measurement < 1) {
        throw ContractError("calibration options out of range");
    }
}

DriveSettings minus_drive(double dphi2, double ep3, double tp3, const ChipParams &p) {
    DriveSettings d = drive_for_phases(dphi2, tp3, p);
    ArmVoltages v3 = voltages_for_phase(ep3, p);
    d.v_ep3_plus = v3.plus;
    d.v_ep3_minus = v3.minus;
    return d;
}

double grid_value(double dphi2, double dphi3, const ChipParams &p) {
    JonesVector a = encoder_amplitudes(drive_for_phases(dphi2, dphi3, p), p);
    return std::norm(a.h) / a.power();
}

}  // namespace

ProjectionProbe model_probe(const ChipParams &p) {
    return [p](const DriveSettings &d, const PolarizationState &analyzer) {
        return fidelity(analyzer, transmitter_output(d, p).state);
    };
}

ProjectionProbe noisy_probe(ProjectionProbe base, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0)) {
        throw ContractError("noisy_probe: sigma must be non-negative");
    }
    auto rng = std::make_shared<std::mt19937_64>(seed);
    return [base = std::move(base), sigma, rng](const DriveSettings &d, const PolarizationState &analyzer) {
        std::normal_distribution<double> noise(0.0, sigma);
        return base(d, analyzer) + noise(*rng);
    };
}

std::array<PolarizationState, 4> CalibrationResult::prepared_states(const ChipParams &p) const {
    std::array<PolarizationState, 4> out;
    for (int i = 0; i < 4; ++i) {
        out[i] = transmitter_output(settings[i], p).state;
    }
    return out;
}

CalibrationResult calibrate_z(const ChipParams &p, const ProjectionProbe &measure, const CalibrationOptions &opt) {
    check_options(opt);
    p.validate();
    Meter meter(measure, opt.samples_per_measurement);
    const PolarizationState h = PolarizationState::horizontal();
    const PolarizationState v = PolarizationState::vertical();

    double cur2 = kPi;
    double cur3 = 0.0;
    if (opt.random_start) {
        std::mt19937_64 rng(opt.seed);
        std::uniform_real_distribution<double> u(-0.5 * kPi, 0.5 * kPi);
        std::uniform_real_distribution<double> w(-kPi, kPi);
        cur2 = u(rng);
        cur3 = w(rng);
    }
    auto r_at = [&](double x2, double x3) { return meter(drive_for_phases(x2, x3, p), h); };

    CalibrationResult res;
    double cur_r = r_at(cur2, cur3);
    auto record = [&](int it) {
        DriveSettings d = drive_for_phases(cur2, cur3, p);
        res.trajectory.push_back({it, cur2, cur3, cur_r, model_stokes(d, p)});
    };
    record(0);

    const int evals = opt.max_evals_per_search;
    bool done = cur_r < opt.target_error;
    for (int sweep = 1; sweep <= opt.max_sweeps && !done; ++sweep) {
        res.iterations_used = sweep;

        LineResult a = golden_section([&](double x) { return r_at(x, cur3); }, -0.5 * kPi, 0.5 * kPi, evals);
        if (a.fx <= cur_r) {
            cur2 = a.x;
            cur_r = a.fx;
            record(sweep);
        }
        if (cur_r < opt.target_error) {
            done = true;
            break;
        }

        // TP3 is periodic: coarse circular scan on three dphi2 rows (the
        // current one and +-2 atan(sqrt(R_err))), then golden section inside
        // one scan step of the best sample on its row. Near dphi2 = 0 the
        // dphi3 landscape of the current row alone can point away from the
        // zero.
        const int scan = 8;
        const double step = 2.0 * kPi / scan;
        const double offset = std::clamp(2.0 * std::atan(std::sqrt(std::max(cur_r, 0.0))), 0.01, 0.25 * kPi);
        const double rows[3] = {cur2, cur2 + offset, cur2 - offset};
        double best2 = cur2;
        double best3 = cur3;
        double best_r = cur_r;
        for (int row = 0; row < 3; ++row) {
            for (int k = row == 0 ? 1 : 0; k < scan; ++k) {
                double x = wrap_phase(cur3 + k * step);
                double r = r_at(rows[row], x);
                if (r < best_r) {
                    best_r = r;
                    best2 = rows[row];
                    best3 = x;
                }
            }
        }
        LineResult b = golden_section([&](double x) { return r_at(best2, wrap_phase(x)); }, best3 - step,
                                      best3 + step, std::max(10, evals - (3 * scan - 1)));
        if (b.fx < best_r) {
            best_r = b.fx;
            best3 = wrap_phase(b.x);
        }
        if (best_r <= cur_r) {
            cur2 = best2;
            cur3 = best3;
            cur_r = best_r;
            record(sweep);
        }
        done = cur_r < opt.target_error;
    }

    res.settings[kStateH] = drive_for_phases(kPi, cur3, p);
    res.settings[kStateV] = drive_for_phases(cur2, cur3, p);
    res.settings[kStatePlus] = res.settings[kStateH];
    res.settings[kStateMinus] = res.settings[kStateH];
    res.residual_error[kStateV] = cur_r;
    res.residual_error[kStateH] = meter(res.settings[kStateH], v);
    res.z_complete = done;
    if (!done) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "Z calibration did not reach R_err < %.3g in %d sweeps (best %.3g)",
                      opt.target_error, opt.max_sweeps, cur_r);
        throw CalibrationError(buf, std::move(res));
    }
    return res;
}

CalibrationResult calibrate_x(const ChipParams &p, const ProjectionProbe &measure, CalibrationResult res,
                              const CalibrationOptions &opt) {
    check_options(opt);
    if (!res.z_complete) {
        throw ContractError("calibrate_x needs a completed Z calibration");
    }
    Meter meter(measure, opt.samples_per_measurement);
    const PolarizationState h = PolarizationState::horizontal();
    const int evals = opt.max_evals_per_search;
    const double tp3 = res.settings[kStateV].phi_tp3;

    // |+>: balance the H projection with EP2 alone.
    LineResult plus = golden_section(
        [&](double x) { return std::abs(meter(drive_for_phases(x, tp3, p), h) - 0.5); }, 0.0, kPi, evals);
    const double plus2 = plus.x;
    res.settings[kStatePlus] = drive_for_phases(plus2, tp3, p);
    res.residual_error[kStatePlus] = plus.fx;

    // Tomography of the |+> found.
    const DriveSettings &dp = res.settings[kStatePlus];
    StokesVector s{2.0 * meter(dp, h) - 1.0, 2.0 * meter(dp, PolarizationState::diagonal()) - 1.0,
                   2.0 * meter(dp, PolarizationState::right_circular()) - 1.0};
    PolarizationState plus_est = state_from_stokes(s);
    res.chi = plus_est.relative_phase();

    // |->: coordinate descent on EP3 and EP2 minimizing overlap with |+>.
    double cur2 = plus2;
    double cur3 = kPi;
    auto r_at = [&](double x2, double x3) { return meter(minus_drive(x2, x3, tp3, p), plus_est); };
    double cur_r = r_at(cur2, cur3);
    auto record = [&](int it) {
        res.x_trajectory.push_back({it, cur2, cur3, cur_r, model_stokes(minus_drive(cur2, cur3, tp3, p), p)});
    };
    record(0);
    bool done = cur_r < opt.target_error;
    for (int sweep = 1; sweep <= opt.max_sweeps && !done; ++sweep) {
        res.x_iterations_used = sweep;
        LineResult a = golden_section([&](double x) { return r_at(cur2, x); }, 0.5 * kPi, 1.5 * kPi, evals);
        if (a.fx <= cur_r) {
            cur3 = a.x;
            cur_r = a.fx;
            record(sweep);
        }
        if (cur_r < opt.target_error) {
            done = true;
            break;
        }
        LineResult b = golden_section([&](double x) { return r_at(x, cur3); }, 0.0, kPi, evals);
        if (b.fx <= cur_r) {
            cur2 = b.x;
            cur_r = b.fx;
            record(sweep);
        }
        done = cur_r < opt.target_error;
    }
    res.settings[kStateMinus] = minus_drive(cur2, cur3, tp3, p);
    res.residual_error[kStateMinus] = cur_r;
    res.x_complete = done && res.residual_error[kStatePlus] < opt.target_error;
    if (!res.x_complete) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "X calibration did not converge (+ defect %.3g, - overlap %.3g)",
                      res.residual_error[kStatePlus], cur_r);
        throw CalibrationError(buf, std::move(res));
    }
    return res;
}

CalibrationResult calibrate(const ChipParams &p, const ProjectionProbe &measure, const CalibrationOptions &opt) {
    return calibrate_x(p, measure, calibrate_z(p, measure, opt), opt);
}

PhasePair analytic_z_solution(const ChipParams &p) {
    double t3p = ep_transfer(0.0, p).amplitude;
    double t3m = ep_transfer(0.0, p).amplitude;
    return {2.0 * std::atan((t3m / t3p) * std::sin(p.delta)), wrap_phase(p.zeta + kPi)};
}

double GridOracleResult::axis(int i) const {
    return -kPi + (i + 1) * 2.0 * kPi / resolution;
}

GridOracleResult grid_oracle(const ChipParams &p, int resolution) {
    if (resolution < 64) {
        throw ContractError("grid_oracle: resolution must be >= 64");
    }
    p.validate();
    GridOracleResult g;
    g.resolution = resolution;
    const int n = resolution;
    g.landscape.resize(static_cast<size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            g.landscape[static_cast<size_t>(i) * n + j] = grid_value(g.axis(i), g.axis(j), p);
        }
    }

    const double cell = 2.0 * kPi / n;
    auto refine = [&](int i, int j) {
        GridMinimum m{g.axis(i), g.axis(j), g.at(i, j), g.at(i, j), g.axis(i), g.axis(j)};
        const int sub = 64;
        for (int a = 0; a <= sub; ++a) {
            double x2 = m.dphi2 - cell + 2.0 * cell * a / sub;
            if (x2 <= -kPi || x2 > kPi) {
                continue;
            }
            for (int b = 0; b <= sub; ++b) {
                double x3 = m.dphi3 - cell + 2.0 * cell * b / sub;
                double r = grid_value(x2, x3, p);
                if (r < m.refined_r_err) {
                    m.refined_r_err = r;
                    m.refined_dphi2 = x2;
                    m.refined_dphi3 = wrap_phase(x3);
                }
            }
        }
        return m;
    };

    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double v = g.at(i, j);
            bool is_min = true;
            for (int di = -1; di <= 1 && is_min; ++di) {
                int ii = i + di;
                if (ii < 0 || ii >= n) {
                    continue;
                }
                for (int dj = -1; dj <= 1; ++dj) {
                    if (di == 0 && dj == 0) {
                        continue;
                    }
                    int jj = (j + dj + n) % n;
                    double w = g.at(ii, jj);
                    // Ties resolved toward the lower linear index.
                    bool earlier = ii * n + jj < i * n + j;
                    if (w < v || (earlier && w == v)) {
                        is_min = false;
                        break;
                    }
                }
            }
            if (is_min) {
                g.local_minima.push_back(refine(i, j));
            }
        }
    }
    std::sort(g.local_minima.begin(), g.local_minima.end(),
              [](const GridMinimum &a, const GridMinimum &b) { return a.refined_r_err < b.refined_r_err; });
    if (g.local_minima.empty()) {
        throw InvariantError("grid_oracle: no local minimum found");
    }
    g.global = g.local_minima.front();
    return g;
}

IntensityImbalance intensity_imbalance(const CalibrationResult &result, const ChipParams &p,
                                       double decoy_fraction) {
    if (!(decoy_fraction > 0.0 && decoy_fraction <= 1.0)) {
        throw ContractError("intensity_imbalance: decoy_fraction must lie in (0, 1]");
    }
    IntensityImbalance out;
    auto spread = [](const std::array<double, 4> &x) {
        double mean = (x[0] + x[1] + x[2] + x[3]) / 4.0;
        auto [lo, hi] = std::minmax_element(x.begin(), x.end());
        return (*hi - *lo) / mean;
    };
    for (int i = 0; i < 4; ++i) {
        DriveSettings d = result.settings[i];
        out.signal_intensities[i] = transmitter_output(d, p).intensity;
        d.phi_tp1 = 2.0 * std::asin(std::sqrt(decoy_fraction));
        out.decoy_intensities[i] = transmitter_output(d, p).intensity;
    }
    out.signal = spread(out.signal_intensities);
    out.decoy = spread(out.decoy_intensities);
    return out;
}

double mub_defect(const CalibrationResult &result, const ChipParams &p) {
    auto s = result.prepared_states(p);
    double worst = 0.0;
    for (int z : {kStateH, kStateV}) {
        for (int x : {kStatePlus, kStateMinus}) {
            worst = std::max(worst, std::abs(fidelity(s[z], s[x]) - 0.5));
        }
    }
    return worst;
}

void write_trajectory_csv(std::ostream &out, const std::vector<TrajectoryPoint> &trajectory) {
    out << "iteration,dphi2_rad,dphi3_rad,r_err,s1,s2,s3\n";
    char buf[256];
    for (const auto &t : trajectory) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", t.iteration, t.dphi2, t.dphi3,
                      t.r_err, t.stokes.s1, t.stokes.s2, t.stokes.s3);
        out << buf;
    }
}

}  // namespace qkdsim
