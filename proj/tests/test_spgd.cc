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

#include "qkdsim/spgd.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gtest/gtest.h"

#include "qkdsim/errors.h"
#include "qkdsim/experiments.h"
#include "test_util.h"

using namespace qkdsim;
using qkdsim::testing::uniform;

namespace {

const std::array<PolarizationState, 4> kRefs{PolarizationState::horizontal(), PolarizationState::vertical(),
                                             PolarizationState::diagonal(), PolarizationState::antidiagonal()};

const EpcVoltages kTarget{0.3, -0.5, 0.7, 0.4};

double toy(const EpcVoltages &v) {
    double s = 0.0;
    for (int i = 0; i < 4; ++i) {
        s += (v[i] - kTarget[i]) * (v[i] - kTarget[i]);
    }
    return s;
}

double p95(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    return x[static_cast<size_t>(std::ceil(0.95 * x.size())) - 1];
}

std::vector<double> proxies(const std::vector<CompensationSample> &trace) {
    std::vector<double> out;
    for (const auto &s : trace) {
        out.push_back(s.qber_proxy);
    }
    return out;
}

}  // namespace

TEST(epc, zero_is_identity) {
    PolTransform m = epc_transform({0, 0, 0, 0});
    EXPECT_NEAR(std::abs(m(0, 0) - 1.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(m(0, 1)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(m(1, 1) - 1.0), 0.0, 1e-15);
}

TEST(epc, half_wave_plate) {
    PolTransform m = epc_transform({kPi, 0, 0, 0});
    EXPECT_TRUE(same_state(m.apply(PolarizationState::diagonal()), PolarizationState::antidiagonal()));
    EXPECT_TRUE(same_state(m.apply(PolarizationState::horizontal()), PolarizationState::horizontal()));
    PolTransform q = epc_transform({0, kPi, 0, 0});
    EXPECT_TRUE(same_state(q.apply(PolarizationState::horizontal()), PolarizationState::vertical()));
}

TEST(epc, unitary) {
    std::mt19937_64 rng(71);
    for (int i = 0; i < 1000; ++i) {
        EpcVoltages v{uniform(rng, -12, 12), uniform(rng, -12, 12), uniform(rng, -12, 12), uniform(rng, -12, 12)};
        EXPECT_LT(epc_transform(v).unitarity_defect(), 1e-12);
    }
}

TEST(epc, commuting_plates_invert) {
    std::mt19937_64 rng(72);
    for (int i = 0; i < 200; ++i) {
        double a = uniform(rng, -6, 6);
        double b = uniform(rng, -6, 6);
        PolTransform w = epc_transform({-a, 0, -b, 0}) * epc_transform({a, 0, b, 0});
        EXPECT_NEAR(std::abs(w(0, 0) - 1.0), 0.0, 1e-10);
        EXPECT_NEAR(std::abs(w(1, 0)), 0.0, 1e-10);
    }
}

TEST(epc, reaches_inverse_of_channel) {
    // Four plates undo any channel: the compensated misalignment can reach
    // the leakage floor.
    std::mt19937_64 rng(73);
    LinkParams lp;
    lp.drift_rate = 0.0;
    for (int i = 0; i < 10; ++i) {
        ChannelState cs;
        cs.birefringence = qkdsim::testing::random_unitary(rng);
        SpgdController c;
        c.params.probe_budget = 0.0;
        run_compensation(lp, kRefs, c, cs, 1000.0, 0.25, {1, 2u + i, 3});
        EXPECT_LT(misalignment(kRefs, cs.birefringence, c.voltages, lp.pbs_er_db) - pbs_leakage(lp.pbs_er_db), 1e-5);
    }
}

TEST(spgd, params_validate) {
    SpgdParams p;
    EXPECT_NO_THROW(p.validate());
    p.gain = -1.0;
    EXPECT_THROW(p.validate(), ConfigError);
    p = {};
    p.perturbation = 0.0;
    EXPECT_THROW(p.validate(), ConfigError);
    p = {};
    p.range = 0.0;
    EXPECT_THROW(p.validate(), ConfigError);
}

TEST(spgd, toy_quadratic_converges) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(seed);
        SpgdController c;
        for (int i = 0; i < 500; ++i) {
            spgd_step(c, toy, rng);
        }
        EXPECT_LT(std::sqrt(toy(c.voltages)), 0.01) << seed;
        EXPECT_EQ(c.steps, 500);
        EXPECT_EQ(c.history.size(), 500u);
    }
}

TEST(spgd, toy_window_means_decrease) {
    std::mt19937_64 rng(74);
    SpgdController c;
    for (int i = 0; i < 1000; ++i) {
        spgd_step(c, toy, rng);
    }
    double prev = std::numeric_limits<double>::infinity();
    for (size_t w = 1; w < 20; ++w) {
        double s = 0.0;
        for (size_t i = 50 * w; i < 50 * (w + 1); ++i) {
            s += c.history[i].second;
        }
        EXPECT_LT(s / 50.0, prev) << w;
        prev = s / 50.0;
    }
}

TEST(spgd, zero_gain_keeps_voltages) {
    std::mt19937_64 rng(75);
    SpgdController c;
    c.params.gain = 0.0;
    c.voltages = {0.1, 0.2, 0.3, 0.4};
    for (int i = 0; i < 50; ++i) {
        spgd_step(c, toy, rng);
    }
    EXPECT_EQ(c.voltages, (EpcVoltages{0.1, 0.2, 0.3, 0.4}));
}

TEST(spgd, voltages_clamped) {
    std::mt19937_64 rng(76);
    SpgdController c;
    c.params.range = 0.2;
    c.params.gain = 100.0;
    for (int i = 0; i < 100; ++i) {
        spgd_step(c, toy, rng);
        for (double v : c.voltages) {
            EXPECT_LE(std::abs(v), 0.2);
        }
    }
}

TEST(spgd, objective_error_propagates) {
    std::mt19937_64 rng(77);
    SpgdController c;
    Objective bad = [](const EpcVoltages &) -> double { throw InvariantError("probe failed"); };
    EXPECT_THROW(spgd_step(c, bad, rng), InvariantError);
    EXPECT_EQ(c.steps, 0);
}

TEST(spgd, static_channel_converges) {
    std::mt19937_64 rng(78);
    LinkParams lp;
    lp.drift_rate = 0.0;
    for (int i = 0; i < 10; ++i) {
        ChannelState cs;
        cs.birefringence = qkdsim::testing::random_unitary(rng);
        SpgdController c;
        auto trace = run_compensation(lp, kRefs, c, cs, 500.0, 0.25, {1, 20u + i, 40u + i});
        ASSERT_EQ(trace.size(), 2000u);
        EXPECT_LT(trace.back().qber_proxy - pbs_leakage(lp.pbs_er_db), 1e-3);
    }
}

TEST(spgd, flat_without_drift) {
    LinkParams lp;
    lp.drift_rate = 0.0;
    ChannelState cs;
    SpgdController c;
    c.params.probe_budget = 0.0;
    auto trace = run_compensation(lp, kRefs, c, cs, 500.0, 0.25, {});
    double floor = pbs_leakage(lp.pbs_er_db);
    for (const auto &s : trace) {
        EXPECT_NEAR(s.qber_proxy, floor, 1e-12);
    }
}

TEST(spgd, tracks_drift) {
    LinkParams lp;
    ChannelState cs;
    SpgdController c;
    auto trace = run_compensation(lp, kRefs, c, cs, 2500.0, 0.25, {5, 6, 7});
    ASSERT_EQ(trace.size(), 10000u);
    EXPECT_LT(p95(proxies(trace)), 0.01);
    EXPECT_NEAR(trace.back().t_s, 2500.0, 1e-6);
}

TEST(spgd, noiseless_objective_is_better) {
    LinkParams lp;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        CompensationSeeds seeds{100 + seed, 200 + seed, 300 + seed};
        ChannelState a;
        SpgdController exact;
        exact.params.probe_budget = 0.0;
        double p_exact = p95(proxies(run_compensation(lp, kRefs, exact, a, 2500.0, 0.25, seeds)));
        for (double budget : {1e3, 1e4}) {
            ChannelState b;
            SpgdController noisy;
            noisy.params.probe_budget = budget;
            double p_noisy = p95(proxies(run_compensation(lp, kRefs, noisy, b, 2500.0, 0.25, seeds)));
            EXPECT_LT(p_exact, p_noisy) << seed << " " << budget;
        }
    }
}

TEST(spgd, no_upward_trend) {
    // Block-mean slopes over independent runs: the tracking error does not
    // grow, and a single run moves by only a few percent of its level.
    std::vector<double> slopes;
    for (std::uint64_t s = 0; s < 20; ++s) {
        LinkParams lp;
        ChannelState cs;
        SpgdController c;
        run_compensation(lp, kRefs, c, cs, 2000.0, 0.25, {1 + 10 * s, 2 + 10 * s, 3 + 10 * s});
        auto trace = run_compensation(lp, kRefs, c, cs, 5000.0, 0.25, {4 + 10 * s, 5 + 10 * s, 6 + 10 * s});
        const size_t blocks = 50;
        const size_t per = trace.size() / blocks;
        std::vector<double> y(blocks);
        for (size_t b = 0; b < blocks; ++b) {
            double sum = 0.0;
            for (size_t i = b * per; i < (b + 1) * per; ++i) {
                sum += trace[i].qber_proxy;
            }
            y[b] = sum / per;
        }
        TrendFit t = linear_trend(y);
        double mean = std::accumulate(y.begin(), y.end(), 0.0) / blocks;
        EXPECT_LT(std::abs(t.slope) * blocks, 0.1 * mean) << s;
        slopes.push_back(t.slope);
    }
    MetricSummary m = summarize("slope", slopes);
    EXPECT_LT(m.mean, 2.0 * m.std / std::sqrt(static_cast<double>(slopes.size())));
}

TEST(spgd, compensator_matches_run) {
    LinkParams lp;
    CompensationSeeds seeds{21, 22, 23};
    SpgdController c0;
    Compensator comp(lp, kRefs, c0, seeds);
    ChannelState cs;
    SpgdController c1;
    auto trace = run_compensation(lp, kRefs, c1, cs, 100.0, 0.25, seeds);
    for (const auto &s : trace) {
        EXPECT_EQ(comp.advance(0.25), s.qber_proxy);
    }
    EXPECT_EQ(comp.controller().voltages, c1.voltages);
    EXPECT_THROW(run_compensation(lp, kRefs, c1, cs, 100.0, 0.0, seeds), ContractError);
}

TEST(spgd, trace_csv) {
    LinkParams lp;
    ChannelState cs;
    SpgdController c;
    auto trace = run_compensation(lp, kRefs, c, cs, 5.0, 0.25, {});
    std::ostringstream out;
    write_trace_csv(out, trace);
    std::vector<std::string> cols;
    auto rows = qkdsim::testing::read_csv(out.str(), &cols);
    ASSERT_EQ(cols, (std::vector<std::string>{"t_s", "qber_proxy", "v1", "v2", "v3", "v4"}));
    ASSERT_EQ(rows.size(), trace.size());
    EXPECT_EQ(std::stod(rows[3][0]), trace[3].t_s);
    EXPECT_EQ(std::stod(rows[3][1]), trace[3].qber_proxy);
    EXPECT_EQ(std::stod(rows[3][5]), trace[3].voltages[3]);
}
