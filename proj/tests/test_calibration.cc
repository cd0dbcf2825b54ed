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
#include <limits>
#include <sstream>

#include "gtest/gtest.h"

#include "qkdsim/errors.h"
#include "test_util.h"

using namespace qkdsim;
using qkdsim::testing::random_chip;
using qkdsim::testing::uniform;

namespace {

const PolarizationState H = PolarizationState::horizontal();

ChipParams lossless(double delta, double zeta) {
    ChipParams p = ChipParams::defaults().lossless();
    p.set_delta(delta);
    p.zeta = zeta;
    return p;
}

double r_err(const DriveSettings &d, const ChipParams &p) {
    return fidelity(H, transmitter_output(d, p).state);
}

// Circular distance between two phases.
double phase_gap(double a, double b) {
    return std::abs(std::remainder(a - b, 2.0 * kPi));
}

}  // namespace

TEST(calibrate_z, perfect_coupler_one_sweep) {
    ChipParams p = lossless(0.0, 0.4);
    CalibrationOptions opt;
    opt.target_error = 1e-12;
    CalibrationResult r = calibrate_z(p, model_probe(p), opt);
    EXPECT_EQ(r.iterations_used, 1);
    EXPECT_LT(r.residual_error[kStateV], 1e-12);
    EXPECT_LT(r_err(r.settings[kStateV], p), 1e-12);
}

TEST(calibrate_z, defaults_example) {
    ChipParams p = ChipParams::defaults();
    p.zeta = 0.3;
    CalibrationResult r = calibrate_z(p, model_probe(p));
    EXPECT_LE(r.iterations_used, 3);
    EXPECT_LT(r.residual_error[kStateV], 1e-4);
    ASSERT_FALSE(r.trajectory.empty());
    // Start point is |H> at zero drive.
    EXPECT_EQ(r.trajectory.front().iteration, 0);
    EXPECT_NEAR(r.trajectory.front().r_err, 1.0, 2e-3);
    EXPECT_NEAR(r.residual_error[kStateH], 0.0, 2e-3);
}

TEST(calibrate_z, low_isolation_random_draws) {
    std::mt19937_64 rng(31);
    for (int i = 0; i < 100; ++i) {
        ChipParams p = random_chip(rng, 10.0, 10.0);
        CalibrationResult r = calibrate_z(p, model_probe(p));
        EXPECT_LT(r.residual_error[kStateV], 1e-4);
        EXPECT_LE(r.iterations_used, 5);
    }
}

TEST(calibrate_z, sweep_counts) {
    std::mt19937_64 rng(32);
    for (double iso : {10.0, 15.8, 20.0}) {
        int within3 = 0;
        for (int i = 0; i < 200; ++i) {
            ChipParams p = random_chip(rng, iso, iso);
            CalibrationResult r = calibrate_z(p, model_probe(p));
            within3 += r.iterations_used <= 3;
            EXPECT_LE(r.iterations_used, 5);
        }
        EXPECT_GE(within3, 190) << iso << " dB";
    }
}

TEST(calibrate_z, random_start) {
    std::mt19937_64 rng(33);
    for (int i = 0; i < 50; ++i) {
        ChipParams p = random_chip(rng);
        CalibrationOptions opt;
        opt.random_start = true;
        opt.seed = 100 + i;
        CalibrationResult r = calibrate_z(p, model_probe(p), opt);
        EXPECT_LT(r.residual_error[kStateV], 1e-4);
    }
}

TEST(calibrate_z, trajectory_non_increasing) {
    std::mt19937_64 rng(34);
    for (int i = 0; i < 50; ++i) {
        ChipParams p = random_chip(rng);
        CalibrationOptions opt;
        opt.random_start = true;
        opt.seed = i;
        CalibrationResult r = calibrate_z(p, model_probe(p), opt);
        for (size_t k = 1; k < r.trajectory.size(); ++k) {
            EXPECT_LE(r.trajectory[k].r_err, r.trajectory[k - 1].r_err);
            EXPECT_GE(r.trajectory[k].iteration, r.trajectory[k - 1].iteration);
        }
        for (double e : r.residual_error) {
            EXPECT_GE(e, 0.0);
            EXPECT_LE(e, 1.0);
        }
    }
}

TEST(calibrate_z, failure_carries_best) {
    ChipParams p = ChipParams::defaults();
    p.zeta = 1.0;
    CalibrationOptions opt;
    opt.target_error = 1e-15;
    opt.max_sweeps = 2;
    try {
        calibrate_z(p, model_probe(p), opt);
        FAIL() << "expected CalibrationError";
    } catch (const CalibrationError &e) {
        EXPECT_FALSE(e.best().z_complete);
        EXPECT_EQ(e.best().iterations_used, 2);
        EXPECT_LT(e.best().residual_error[kStateV], 1e-3);
        EXPECT_NE(std::string(e.what()).find("did not reach"), std::string::npos);
    }
}

TEST(calibrate_z, invalid_options) {
    ChipParams p = ChipParams::defaults();
    CalibrationOptions opt;
    opt.target_error = 0.0;
    EXPECT_THROW(calibrate_z(p, model_probe(p), opt), ContractError);
    opt = {};
    opt.max_sweeps = 0;
    EXPECT_THROW(calibrate_z(p, model_probe(p), opt), ContractError);
    opt = {};
    opt.samples_per_measurement = 0;
    EXPECT_THROW(calibrate_z(p, model_probe(p), opt), ContractError);
    EXPECT_THROW(noisy_probe(model_probe(p), -1.0, 1), ContractError);
}

TEST(calibrate_x, needs_z) {
    ChipParams p = ChipParams::defaults();
    EXPECT_THROW(calibrate_x(p, model_probe(p), CalibrationResult{}), ContractError);
}

TEST(calibrate_x, ideal_splitter) {
    ChipParams p = lossless(0.0, 0.0);
    EXPECT_NEAR(r_err(drive_for_phases(kPi / 2, 0.0, p), p), 0.5, 1e-15);
    CalibrationResult r = calibrate(p, model_probe(p));
    EXPECT_TRUE(r.x_complete);
    EXPECT_NEAR(encoder_phases(r.settings[kStatePlus], p).dphi2, kPi / 2, 1e-3);
}

TEST(calibrate_x, defaults_noiseless) {
    ChipParams p = ChipParams::defaults();
    CalibrationResult r = calibrate(p, model_probe(p));
    ASSERT_TRUE(r.x_complete);
    auto s = r.prepared_states(p);
    EXPECT_LT(error_rate(s[kStateMinus], s[kStatePlus].orthogonal()), 1e-4);
    EXPECT_LT(std::abs(fidelity(s[kStatePlus], H) - 0.5), 1e-4);
    // chi is a calibrated quantity, not assumed zero.
    EXPECT_NEAR(r.chi, s[kStatePlus].relative_phase(), 1e-3);
    EXPECT_NEAR(r.chi, 0.02446, 5e-4);
}

TEST(calibrate_x, noisy_probe_averaging) {
    std::mt19937_64 rng(35);
    for (int i = 0; i < 5; ++i) {
        ChipParams p = random_chip(rng, 15.8, 15.8);
        CalibrationOptions opt;
        opt.target_error = 2e-4;
        opt.samples_per_measurement = 100;
        CalibrationResult r = calibrate(p, noisy_probe(model_probe(p), 1e-3, 7 + i), opt);
        auto s = r.prepared_states(p);
        EXPECT_LT(error_rate(s[kStateV], PolarizationState::vertical()), 5e-4);
        EXPECT_LT(error_rate(s[kStateMinus], s[kStatePlus].orthogonal()), 5e-4);
    }
}

TEST(calibrate_x, noisy_probe_deterministic) {
    ChipParams p = ChipParams::defaults();
    ProjectionProbe a = noisy_probe(model_probe(p), 1e-3, 9);
    ProjectionProbe b = noisy_probe(model_probe(p), 1e-3, 9);
    DriveSettings d;
    for (int i = 0; i < 10; ++i) {
        EXPECT_EQ(a(d, H), b(d, H));
    }
}

TEST(calibration, mub_defect) {
    // Pure-state defect scales with sqrt(R_err).
    std::mt19937_64 rng(36);
    for (int i = 0; i < 20; ++i) {
        ChipParams p = random_chip(rng);
        p.mzi_er_floor_db = std::numeric_limits<double>::infinity();
        CalibrationResult r = calibrate(p, model_probe(p));
        EXPECT_LE(mub_defect(r, p), 2.0 * std::sqrt(1e-4));
    }
    ChipParams ideal = lossless(0.0, 0.0);
    EXPECT_LE(mub_defect(calibrate(ideal, model_probe(ideal)), ideal), 2e-4);
}

TEST(calibration, intensity_imbalance) {
    ChipParams ideal = lossless(0.0, 0.0);
    IntensityImbalance zero = intensity_imbalance(calibrate(ideal, model_probe(ideal)), ideal);
    EXPECT_NEAR(zero.signal, 0.0, 1e-6);
    EXPECT_NEAR(zero.decoy, 0.0, 1e-6);

    ChipParams p = ChipParams::defaults();
    CalibrationResult r = calibrate(p, model_probe(p));
    IntensityImbalance imb = intensity_imbalance(r, p);
    EXPECT_NEAR(imb.signal, 0.3939, 5e-4);
    EXPECT_NEAR(imb.decoy, imb.signal, 1e-6);
    double ih = transmitter_output(r.settings[kStateH], p).intensity;
    double iv = transmitter_output(r.settings[kStateV], p).intensity;
    EXPECT_LE(std::abs(ih / iv - 1.0), imb.signal * std::max(ih, iv) / std::min(ih, iv) + 1e-12);
    EXPECT_THROW(intensity_imbalance(r, p, 0.0), ContractError);
}

TEST(analytic_z_solution, examples) {
    PhasePair zero = analytic_z_solution(lossless(0.0, 0.7));
    EXPECT_EQ(zero.dphi2, 0.0);
    EXPECT_NEAR(zero.dphi3, 0.7 + kPi - 2.0 * kPi, 1e-12);

    ChipParams half = lossless(kPi / 6, 0.3);
    PhasePair a = analytic_z_solution(half);
    EXPECT_NEAR(a.dphi2, 0.9273, 5e-5);
    EXPECT_NEAR(phase_gap(a.dphi3, 0.3 + kPi), 0.0, 1e-12);
    EXPECT_LT(r_err(drive_for_phases(a.dphi2, a.dphi3, half), half), 1e-12);

    ChipParams def = ChipParams::defaults().lossless();
    PhasePair b = analytic_z_solution(def);
    EXPECT_NEAR(b.dphi2, 0.3216, 5e-5);
    EXPECT_LT(r_err(drive_for_phases(b.dphi2, b.dphi3, def), def), 1e-12);
}

TEST(analytic_z_solution, exact_zero) {
    std::mt19937_64 rng(37);
    for (int i = 0; i < 500; ++i) {
        ChipParams p = lossless(uniform(rng, 0.0, 0.6), uniform(rng, -3.0, 3.0));
        PhasePair s = analytic_z_solution(p);
        EXPECT_LT(r_err(drive_for_phases(s.dphi2, s.dphi3, p), p), 1e-12);
    }
}

TEST(grid_oracle, perfect_coupler) {
    GridOracleResult g = grid_oracle(lossless(0.0, 0.0), 64);
    EXPECT_LT(g.global.r_err, 1e-6);
    EXPECT_NEAR(g.global.dphi2, 0.0, 1e-9);
}

TEST(grid_oracle, contains_analytic_solution) {
    ChipParams p = ChipParams::defaults().lossless();
    GridOracleResult g = grid_oracle(p, 512);
    PhasePair s = analytic_z_solution(p);
    double cell = 2.0 * kPi / 512;
    bool found = false;
    for (const GridMinimum &m : g.local_minima) {
        if (std::abs(m.dphi2 - s.dphi2) <= cell && phase_gap(m.dphi3, s.dphi3) <= cell) {
            found = true;
            EXPECT_LT(m.refined_r_err, 1e-7);
        }
    }
    EXPECT_TRUE(found);
    EXPECT_LE(g.global.refined_r_err, g.global.r_err);
}

TEST(grid_oracle, layout) {
    GridOracleResult g = grid_oracle(ChipParams::defaults(), 64);
    ASSERT_EQ(g.landscape.size(), 64u * 64u);
    EXPECT_NEAR(g.axis(63), kPi, 1e-15);
    EXPECT_GT(g.axis(0), -kPi);
    double lo = *std::min_element(g.landscape.begin(), g.landscape.end());
    EXPECT_LE(lo, g.global.r_err);
    EXPECT_EQ(g.global.refined_r_err, g.local_minima.front().refined_r_err);
    for (size_t k = 1; k < g.local_minima.size(); ++k) {
        EXPECT_LE(g.local_minima[k - 1].refined_r_err, g.local_minima[k].refined_r_err);
    }
    EXPECT_THROW(grid_oracle(ChipParams::defaults(), 63), ContractError);
}

TEST(grid_oracle, unimodal_near_minimum) {
    // Along each axis through the V minimum on (-pi/2, pi/2] the landscape
    // falls then rises.
    ChipParams p = ChipParams::defaults();
    GridOracleResult g = grid_oracle(p, 256);
    auto index = [&](double x) {
        return static_cast<int>(std::lround((x + kPi) * 256 / (2.0 * kPi))) - 1;
    };
    int i0 = index(g.global.dphi2);
    int j0 = index(g.global.dphi3);
    auto check = [&](auto value, int center, int lo, int hi) {
        for (int k = std::max(lo, center + 1); k < hi; ++k) {
            EXPECT_GE(value(k + 1), value(k) - 1e-12);
        }
        for (int k = std::min(hi, center - 1); k > lo; --k) {
            EXPECT_GE(value(k - 1), value(k) - 1e-12);
        }
    };
    int lo2 = index(-kPi / 2) + 1;
    int hi2 = index(kPi / 2);
    check([&](int i) { return g.at(i, j0); }, i0, lo2, hi2);
    int span = 64;
    check([&](int j) { return g.at(i0, (j + 256) % 256); }, j0, j0 - span, j0 + span);
}

TEST(grid_oracle, matches_calibrate_z) {
    std::mt19937_64 rng(38);
    for (int i = 0; i < 5; ++i) {
        ChipParams p = random_chip(rng);
        CalibrationResult r = calibrate_z(p, model_probe(p));
        GridOracleResult g = grid_oracle(p, 128);
        EXPECT_LE(r.residual_error[kStateV], g.global.refined_r_err + 1e-4);
        EXPECT_LT(g.global.refined_r_err, 1e-4);
    }
}

TEST(calibration, trajectory_csv_round_trip) {
    ChipParams p = ChipParams::defaults();
    p.zeta = 0.3;
    CalibrationResult r = calibrate_z(p, model_probe(p));
    std::ostringstream out;
    write_trajectory_csv(out, r.trajectory);
    std::vector<std::string> cols;
    auto rows = qkdsim::testing::read_csv(out.str(), &cols);
    ASSERT_EQ(cols, (std::vector<std::string>{"iteration", "dphi2_rad", "dphi3_rad", "r_err", "s1", "s2", "s3"}));
    ASSERT_EQ(rows.size(), r.trajectory.size());
    for (size_t k = 0; k < rows.size(); ++k) {
        EXPECT_EQ(std::stoi(rows[k][0]), r.trajectory[k].iteration);
        EXPECT_EQ(std::stod(rows[k][1]), r.trajectory[k].dphi2);
        EXPECT_EQ(std::stod(rows[k][3]), r.trajectory[k].r_err);
        EXPECT_EQ(std::stod(rows[k][6]), r.trajectory[k].stokes.s3);
    }
}
