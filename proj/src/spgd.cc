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
#include <cstdio>
#include <ostream>

#include "qkdsim/errors.h"

namespace qkdsim {

namespace {

// Analyzer target for each reference state: H, V, D, A.
const std::array<PolarizationState, 4> &analyzers() {
    static const std::array<PolarizationState, 4> a{PolarizationState::horizontal(), PolarizationState::vertical(),
                                                     PolarizationState::diagonal(),
                                                     PolarizationState::antidiagonal()};
    return a;
}

std::array<double, 4> wrong_fractions(const std::array<PolarizationState, 4> &refs, const PolTransform &channel,
                                      const EpcVoltages &v, double pbs_er_db) {
    PolTransform u = epc_transform(v) * channel;
    double leak = pbs_leakage(pbs_er_db);
    std::array<double, 4> w{};
    for (int s = 0; s < 4; ++s) {
        PolarizationState out = u.apply(refs[s]);
        double right = fidelity(analyzers()[s], out);
        w[s] = (1.0 - leak) * (1.0 - right) + leak * right;
    }
    return w;
}

}  // namespace

PolTransform epc_transform(const EpcVoltages &v) {
    PolTransform m;
    for (int i = 0; i < 4; ++i) {
        PolTransform plate = (i % 2 == 0) ? PolTransform::rotation(v[i], 1.0, 0.0, 0.0)
                                          : PolTransform::rotation(v[i], 0.0, 1.0, 0.0);
        m = plate * m;
    }
    return m;
}

void SpgdParams::validate() const {
    if (!(gain >= 0.0) || !(perturbation > 0.0) || !(range > 0.0)) {
        throw ConfigError("spgd: need gain >= 0, perturbation > 0, range > 0");
    }
}

void spgd_step(SpgdController &c, const Objective &objective, std::mt19937_64 &rng) {
    std::bernoulli_distribution coin(0.5);
    EpcVoltages delta{};
    EpcVoltages plus = c.voltages;
    EpcVoltages minus = c.voltages;
    for (int i = 0; i < 4; ++i) {
        delta[i] = coin(rng) ? c.params.perturbation : -c.params.perturbation;
        plus[i] += delta[i];
        minus[i] -= delta[i];
    }
    double jp = objective(plus);
    double jm = objective(minus);
    for (int i = 0; i < 4; ++i) {
        double v = c.voltages[i] - c.params.gain * (jp - jm) * delta[i];
        c.voltages[i] = std::clamp(v, -c.params.range, c.params.range);
    }
    c.history.emplace_back(c.steps, 0.5 * (jp + jm));
    ++c.steps;
}

double misalignment(const std::array<PolarizationState, 4> &refs, const PolTransform &channel, const EpcVoltages &v,
                    double pbs_er_db) {
    auto w = wrong_fractions(refs, channel, v, pbs_er_db);
    return 0.25 * (w[0] + w[1] + w[2] + w[3]);
}

double qber_proxy_percent(const std::array<PolarizationState, 4> &refs, const PolTransform &channel,
                          const EpcVoltages &v, double pbs_er_db, double budget, std::mt19937_64 &rng) {
    auto w = wrong_fractions(refs, channel, v, pbs_er_db);
    if (budget <= 0.0) {
        return 25.0 * (w[0] + w[1] + w[2] + w[3]);
    }
    long long per_state = std::max(1LL, static_cast<long long>(std::llround(budget / 4.0)));
    double sum = 0.0;
    for (int s = 0; s < 4; ++s) {
        std::binomial_distribution<long long> draw(per_state, std::clamp(w[s], 0.0, 1.0));
        sum += static_cast<double>(draw(rng)) / static_cast<double>(per_state);
    }
    return 25.0 * sum;
}

Compensator::Compensator(const LinkParams &lp, std::array<PolarizationState, 4> refs, SpgdController controller,
                         const CompensationSeeds &seeds)
    : lp_(lp),
      refs_(refs),
      controller_(std::move(controller)),
      drift_rng_(seeds.drift),
      pert_rng_(seeds.perturbation),
      probe_rng_(seeds.probe) {
    controller_.params.validate();
}

double Compensator::advance(double dt_s) {
    channel_ = drift_step(channel_, lp_.drift_rate, dt_s, drift_rng_);
    const PolTransform &u = channel_.birefringence;
    auto objective = [&](const EpcVoltages &v) {
        return qber_proxy_percent(refs_, u, v, lp_.pbs_er_db, controller_.params.probe_budget, probe_rng_);
    };
    spgd_step(controller_, objective, pert_rng_);
    return misalignment(refs_, u, controller_.voltages, lp_.pbs_er_db);
}

std::vector<CompensationSample> run_compensation(const LinkParams &lp, const std::array<PolarizationState, 4> &refs,
                                                 SpgdController &controller, ChannelState &channel,
                                                 double duration_s, double dt_s, const CompensationSeeds &seeds) {
    if (!(dt_s > 0.0) || !(duration_s >= 0.0)) {
        throw ContractError("run_compensation: need dt > 0 and duration >= 0");
    }
    controller.params.validate();
    std::mt19937_64 drift_rng(seeds.drift);
    std::mt19937_64 pert_rng(seeds.perturbation);
    std::mt19937_64 probe_rng(seeds.probe);
    const long n = static_cast<long>(std::floor(duration_s / dt_s + 1e-9));
    std::vector<CompensationSample> trace;
    trace.reserve(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) {
        channel = drift_step(channel, lp.drift_rate, dt_s, drift_rng);
        const PolTransform &u = channel.birefringence;
        auto objective = [&](const EpcVoltages &v) {
            return qber_proxy_percent(refs, u, v, lp.pbs_er_db, controller.params.probe_budget, probe_rng);
        };
        spgd_step(controller, objective, pert_rng);
        trace.push_back({channel.elapsed_s, misalignment(refs, u, controller.voltages, lp.pbs_er_db),
                         controller.voltages});
    }
    return trace;
}

void write_trace_csv(std::ostream &out, const std::vector<CompensationSample> &trace) {
    out << "t_s,qber_proxy,v1,v2,v3,v4\n";
    char buf[256];
    for (const auto &s : trace) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t_s, s.qber_proxy,
                      s.voltages[0], s.voltages[1], s.voltages[2], s.voltages[3]);
        out << buf;
    }
}

}  // namespace qkdsim
