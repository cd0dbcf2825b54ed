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

#include "qkdsim/link.h"

#include <cmath>
#include <limits>

#include "gtest/gtest.h"

#include "qkdsim/errors.h"
#include "test_util.h"

using namespace qkdsim;
using qkdsim::testing::random_state;
using qkdsim::testing::random_unitary;
using qkdsim::testing::uniform;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

double q_function(double x) {
    return 0.5 * std::erfc(x / std::sqrt(2.0));
}

// Mass of the total timing response beyond |t| > a: composite Simpson over
// the detector density against the Gaussian laser tails.
double oracle_tail(const DetectorParams &dp, double a) {
    const double sigma = dp.jitter_fwhm_ps / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const double sl = dp.laser_fwhm_ps / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const double se = std::hypot(sl, dp.laser_jitter_rms_ps);
    const double x = dp.jitter_fw1pm_ps / (2.0 * sigma);
    const double k = x - std::sqrt(x * x + 2.0 * std::log(0.01));
    const double norm = 2.0 * (sigma * std::sqrt(kPi / 2.0) * std::erf(k / std::sqrt(2.0)) +
                               sigma / k * std::exp(-0.5 * k * k));
    auto density = [&](double t) {
        double u = std::abs(t) / sigma;
        return (u <= k ? std::exp(-0.5 * u * u) : std::exp(0.5 * k * k - k * u)) / norm;
    };
    auto g = [&](double t) { return density(t) * (q_function((a - t) / se) + q_function((a + t) / se)); };
    const double hi = 3000.0;
    const int n = 600000;
    const double h = hi / n;
    double s = g(0.0) + g(hi);
    for (int i = 1; i < n; ++i) {
        s += (i % 2 ? 4.0 : 2.0) * g(i * h);
    }
    return 2.0 * s * h / 3.0;
}

double rotation_angle(const PolTransform &u) {
    double c = 0.5 * std::abs(u(0, 0) + u(1, 1));
    return 2.0 * std::acos(std::min(1.0, c));
}

LinkParams clean_link() {
    LinkParams lp;
    lp.bob_loss_db = 0.0;
    lp.basis_split = 1.0 - 1e-12;
    lp.pbs_er_db = kInf;
    lp.detector.dark_rate_hz = 0.0;
    return lp;
}

}  // namespace

TEST(link, transmittance_examples) {
    LinkParams lp;
    EXPECT_NEAR(channel_transmittance(lp), 1.995e-3, 5e-7);
    EXPECT_NEAR(channel_transmittance(lp), std::pow(10.0, -2.7), 1e-15);
    lp.length_km = 0.0;
    EXPECT_EQ(channel_transmittance(lp), 1.0);
    lp.length_km = 200.0;
    EXPECT_NEAR(channel_transmittance(lp), 2.512e-4, 5e-8);
}

TEST(link, params_validate) {
    LinkParams lp;
    EXPECT_NO_THROW(lp.validate());
    lp.basis_split = 1.0;
    EXPECT_THROW(lp.validate(), ConfigError);
    lp = {};
    lp.length_km = -1.0;
    EXPECT_THROW(lp.validate(), ConfigError);
    lp = {};
    lp.drift_rate = -0.1;
    EXPECT_THROW(lp.validate(), ConfigError);
    lp = {};
    lp.detector.eff_curve = {{125e3, 0.64}, {4e6, 0.70}};
    EXPECT_THROW(lp.validate(), ConfigError);
    lp = {};
    lp.detector.eff_curve = {{125e3, 1.2}};
    EXPECT_THROW(lp.validate(), ConfigError);
    lp = {};
    lp.detector.jitter_fw1pm_ps = 40.0;
    EXPECT_THROW(lp.validate(), ConfigError);
}

TEST(link, detector_efficiency_examples) {
    DetectorParams dp;
    EXPECT_DOUBLE_EQ(detector_efficiency(125e3, dp), 0.70);
    EXPECT_DOUBLE_EQ(detector_efficiency(4e6, dp), 0.64);
    EXPECT_NEAR(detector_efficiency(std::sqrt(125e3 * 4e6), dp), 0.67, 1e-12);
    EXPECT_NEAR(detector_efficiency(707.1e3, dp), 0.67, 1e-5);
    EXPECT_DOUBLE_EQ(detector_efficiency(0.0, dp), 0.70);
    EXPECT_DOUBLE_EQ(detector_efficiency(1e9, dp), 0.64);
    EXPECT_THROW(detector_efficiency(-1.0, dp), ContractError);
}

TEST(link, operating_efficiency_fixed_point) {
    LinkParams lp;
    for (double km : {0.0, 50.0, 150.0, 250.0}) {
        lp.length_km = km;
        double eta = operating_efficiency(lp, 0.5);
        EXPECT_GE(eta, 0.64);
        EXPECT_LE(eta, 0.70);
        double rate = lp.rep_rate_hz * 0.5 * transmission_to_detectors(lp) * 0.45 * eta + lp.detector.dark_rate_hz;
        EXPECT_NEAR(detector_efficiency(rate, lp.detector), eta, 1e-12);
    }
}

TEST(link, drift_zero_rate) {
    std::mt19937_64 rng(41);
    ChannelState cs;
    for (int i = 0; i < 100; ++i) {
        cs = drift_step(cs, 0.0, 1.0, rng);
    }
    EXPECT_EQ(cs.birefringence(0, 0), Complex(1.0));
    EXPECT_EQ(cs.birefringence(0, 1), Complex(0.0));
    EXPECT_DOUBLE_EQ(cs.elapsed_s, 100.0);
    EXPECT_THROW(drift_step(cs, 0.01, 0.0, rng), ContractError);
}

TEST(link, drift_unitarity) {
    std::mt19937_64 rng(42);
    ChannelState cs;
    for (int i = 0; i < 100000; ++i) {
        cs = drift_step(cs, 0.01, 1.0, rng);
        if (i % 1000 == 0) {
            ASSERT_LT(cs.birefringence.unitarity_defect(), 1e-10);
        }
    }
    EXPECT_LT(cs.birefringence.unitarity_defect(), 1e-10);
}

TEST(link, drift_sqrt_growth) {
    // Accumulated rotation vector is approximately isotropic Gaussian with
    // per-axis variance rate^2 t / 3, so the mean angle is Maxwell.
    std::mt19937_64 rng(43);
    const int paths = 1000;
    const int checkpoints[] = {250, 500, 1000, 2000};
    double sum[4] = {0, 0, 0, 0};
    for (int p = 0; p < paths; ++p) {
        ChannelState cs;
        int c = 0;
        for (int step = 1; step <= 2000; ++step) {
            cs = drift_step(cs, 0.01, 1.0, rng);
            if (step == checkpoints[c]) {
                sum[c++] += rotation_angle(cs.birefringence);
            }
        }
    }
    for (int c = 0; c < 4; ++c) {
        double a = 0.01 * std::sqrt(checkpoints[c] / 3.0);
        double expected = 2.0 * a * std::sqrt(2.0 / kPi);
        EXPECT_NEAR(sum[c] / paths / expected, 1.0, 0.05) << checkpoints[c];
    }
}

TEST(link, drift_inverse_recovers_identity) {
    std::mt19937_64 rng(44);
    ChannelState cs;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
        cs = drift_step(cs, 0.05, 1.0, rng);
    }
    PolTransform w = cs.birefringence.adjoint() * cs.birefringence;
    EXPECT_NEAR(std::abs(w(0, 0) - 1.0), 0.0, n * 1e-10);
    EXPECT_NEAR(std::abs(w(1, 0)), 0.0, n * 1e-10);
}

TEST(link, crosstalk_gaussian_limit) {
    DetectorParams dp;
    dp.jitter_tails = false;
    dp.laser_fwhm_ps = 0.0;
    dp.laser_jitter_rms_ps = 0.0;
    CrosstalkProbs c = timing_crosstalk(dp, 200.0);
    double sigma = 50.0 / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    EXPECT_NEAR(c.p_adjacent + c.p_beyond, 2.0 * q_function(100.0 / sigma), 1e-12);
    EXPECT_NEAR(c.p_adjacent + c.p_beyond, 2.4e-6, 1e-7);
}

TEST(link, crosstalk_default_frozen) {
    DetectorParams dp;
    CrosstalkProbs c = timing_crosstalk(dp, 200.0);
    EXPECT_NEAR(c.p_adjacent, 2.979161e-3, 1e-8);
    EXPECT_NEAR(c.p_beyond, 6.732120e-9, 1e-13);
    EXPECT_GE(c.p_adjacent, 1e-4);
    EXPECT_LE(c.p_adjacent, 5e-3);
}

TEST(link, crosstalk_matches_simpson) {
    DetectorParams dp;
    JitterShape s = jitter_shape(dp);
    for (double a : {50.0, 100.0, 200.0, 300.0}) {
        double ref = oracle_tail(dp, a);
        EXPECT_NEAR(timing_tail_probability(s, a) / ref, 1.0, 1e-6) << a;
    }
    dp.jitter_fw1pm_ps = 140.0;
    dp.laser_fwhm_ps = 30.0;
    s = jitter_shape(dp);
    EXPECT_NEAR(timing_tail_probability(s, 100.0) / oracle_tail(dp, 100.0), 1.0, 1e-6);
}

TEST(link, jitter_shape_quantiles) {
    // Detector density is at half maximum at FWHM/2 and 1% at FW1%M/2.
    DetectorParams dp;
    JitterShape s = jitter_shape(dp);
    auto rel = [&](double t) {
        double u = t / s.sigma_ps;
        return u <= s.k ? std::exp(-0.5 * u * u) : std::exp(0.5 * s.k * s.k - s.k * u);
    };
    EXPECT_NEAR(rel(25.0), 0.5, 1e-12);
    EXPECT_NEAR(rel(85.5), 0.01, 1e-12);
}

TEST(link, crosstalk_monotone_in_bin_period) {
    DetectorParams dp;
    double prev = 1.0;
    for (double period = 150.0; period <= 1000.0; period += 50.0) {
        double p = timing_crosstalk(dp, period).p_adjacent;
        EXPECT_LT(p, prev) << period;
        prev = p;
    }
    EXPECT_EQ(timing_crosstalk(dp, kInf).p_adjacent, 0.0);
    EXPECT_THROW(timing_crosstalk(dp, 0.0), ContractError);
}

TEST(link, crosstalk_infeasible_fit) {
    DetectorParams dp;
    dp.jitter_fw1pm_ps = 60.0;
    EXPECT_THROW(timing_crosstalk(dp, 200.0), ConfigError);
}

TEST(link, pbs_leakage_ratio) {
    LinkParams lp = clean_link();
    lp.pbs_er_db = 30.0;
    ChannelState cs;
    auto c = receiver_click_probs(PolarizationState::horizontal(), cs, PolTransform(), lp, 1e-9, 0.64);
    EXPECT_NEAR(c[kDetH] / c[kDetV], 1e3, 1e-3);
    EXPECT_NEAR(pbs_leakage(30.0), 1e-3 / 1.001, 1e-15);
    EXPECT_EQ(pbs_leakage(kInf), 0.0);
}

TEST(link, click_examples) {
    LinkParams lp = clean_link();
    ChannelState cs;
    auto c = receiver_click_probs(PolarizationState::horizontal(), cs, PolTransform(), lp, 0.5, 0.64);
    EXPECT_NEAR(c[kDetH], 1.0 - std::exp(-0.5 * std::pow(10.0, -2.7) * 0.64), 1e-12);
    EXPECT_NEAR(c[kDetH], 6.38e-4, 5e-7);
    EXPECT_NEAR(c[kDetV], 0.0, 1e-15);

    LinkParams dark;
    auto d = receiver_click_probs(PolarizationState::diagonal(), cs, PolTransform(), dark, 0.0, 0.64);
    for (double p : d) {
        EXPECT_NEAR(p, 2e-8, 1e-22);
    }
    EXPECT_THROW(receiver_click_probs(PolarizationState::horizontal(), cs, PolTransform(), dark, -1.0, 0.64),
                 ContractError);
}

TEST(link, projection_probs_sum_to_one) {
    std::mt19937_64 rng(45);
    for (int i = 0; i < 1000; ++i) {
        LinkParams lp;
        lp.basis_split = uniform(rng, 0.01, 0.99);
        lp.pbs_er_db = uniform(rng, 10.0, 40.0);
        auto p = projection_probs(random_state(rng), random_unitary(rng), random_unitary(rng), lp);
        double s = p[0] + p[1] + p[2] + p[3];
        EXPECT_NEAR(s, 1.0, 1e-10);
        EXPECT_NEAR(p[0] + p[1], lp.basis_split, 1e-10);
    }
}

TEST(link, ideal_epc_maps_x_basis) {
    LinkParams lp = clean_link();
    lp.basis_split = 1e-9;
    for (double chi : {0.0, 0.3, -2.0}) {
        auto p = projection_probs(PolarizationState::diagonal(chi), PolTransform(), ideal_epc(chi), lp);
        EXPECT_NEAR(p[kDetA], 0.0, 1e-12);
        auto q = projection_probs(PolarizationState::antidiagonal(chi), PolTransform(), ideal_epc(chi), lp);
        EXPECT_NEAR(q[kDetD], 0.0, 1e-12);
    }
}

TEST(link, clicks_monotone) {
    std::mt19937_64 rng(46);
    LinkParams lp;
    ChannelState cs;
    cs.birefringence = random_unitary(rng);
    PolarizationState s = random_state(rng);
    auto prev = receiver_click_probs(s, cs, PolTransform(), lp, 0.0, 0.64);
    for (double mu = 0.05; mu < 2.0; mu += 0.05) {
        auto c = receiver_click_probs(s, cs, PolTransform(), lp, mu, 0.64);
        for (int i = 0; i < 4; ++i) {
            EXPECT_GT(c[i], prev[i]);
        }
        prev = c;
    }
    prev = receiver_click_probs(s, cs, PolTransform(), lp, 0.5, 0.1);
    for (double eta = 0.15; eta <= 1.0; eta += 0.05) {
        auto c = receiver_click_probs(s, cs, PolTransform(), lp, 0.5, eta);
        for (int i = 0; i < 4; ++i) {
            EXPECT_GT(c[i], prev[i]);
        }
        prev = c;
    }
}
