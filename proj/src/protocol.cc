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

#include "qkdsim/protocol.h"

#include <bit>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "qkdsim/errors.h"
#include "qkdsim/rng.h"

namespace qkdsim {

namespace {

int basis_of_detector(int j) {
    return j / 2;
}
int bit_of_detector(int j) {
    return j & 1;
}

// Independent dark-count pattern probability.
double dark_pattern(unsigned mask, double pd, unsigned forced) {
    double p = 1.0;
    for (int d = 0; d < 4; ++d) {
        if (forced & (1u << d)) {
            continue;
        }
        p *= (mask & (1u << d)) ? pd : 1.0 - pd;
    }
    return p;
}

long long draw_binomial(std::mt19937_64 &rng, long long n, double p) {
    if (n <= 0 || p <= 0.0) {
        return 0;
    }
    if (p >= 1.0) {
        return n;
    }
    return std::binomial_distribution<long long>(n, p)(rng);
}

}  // namespace

void ProtocolParams::validate() const {
    if (!(mu2 >= 0.0 && mu1 > mu2)) {
        throw ConfigError("protocol: need 0 <= mu2 < mu1");
    }
    if (!(p_mu1 > 0.0 && p_mu1 < 1.0) || !(pz_alice > 0.0 && pz_alice < 1.0)) {
        throw ConfigError("protocol probabilities must lie in (0, 1)");
    }
    if (block_pulses < 1) {
        throw ConfigError("protocol.block_pulses must be >= 1");
    }
}

void ObservedCounts::check() const {
    const double tol = expectation ? 1e-9 : 0.0;
    for (int b = 0; b < 2; ++b) {
        for (int k = 0; k < 2; ++k) {
            double slack = tol * std::max(1.0, sent_basis(b, k));
            if (m[b][k] < 0.0 || m[b][k] > n[b][k] + slack || n[b][k] > sent_basis(b, k) + slack) {
                throw InvariantError("ObservedCounts: need 0 <= m <= n <= sent");
            }
        }
    }
    if (double_clicks < 0.0 || crosstalk_events < 0.0 || single_photon_z < 0.0) {
        throw InvariantError("ObservedCounts: negative tally");
    }
}

ObservedCounts &ObservedCounts::operator+=(const ObservedCounts &o) {
    for (int b = 0; b < 2; ++b) {
        for (int k = 0; k < 2; ++k) {
            n[b][k] += o.n[b][k];
            m[b][k] += o.m[b][k];
        }
    }
    for (int s = 0; s < 4; ++s) {
        for (int k = 0; k < 2; ++k) {
            sent[s][k] += o.sent[s][k];
        }
    }
    double_clicks += o.double_clicks;
    crosstalk_events += o.crosstalk_events;
    single_photon_z += o.single_photon_z;
    block_pulses += o.block_pulses;
    duration_s += o.duration_s;
    expectation = expectation || o.expectation;
    return *this;
}

std::array<PolarizationState, 4> alice_states(const CalibrationResult &cal, const ChipParams &chip) {
    return cal.prepared_states(chip);
}

PulseModel make_pulse_model(const LinkParams &lp, const std::array<PolarizationState, 4> &states,
                            const PolTransform &channel, const PolTransform &epc, double mean_mu) {
    lp.validate();
    PulseModel m;
    m.states = states;
    for (int s = 0; s < 4; ++s) {
        m.proj[s] = projection_probs(states[s], channel, epc, lp);
    }
    m.eta_det = operating_efficiency(lp, mean_mu);
    m.eta = transmission_to_detectors(lp) * m.eta_det;
    m.p_dark = lp.detector.dark_rate_hz * lp.bin_period_s();
    CrosstalkProbs xt = timing_crosstalk(lp.detector, lp.bin_period_ps());
    m.p_cross = xt.p_adjacent + xt.p_beyond;
    m.rep_rate_hz = lp.rep_rate_hz;
    return m;
}

PulseModel make_pulse_model(const ProtocolParams &pp, const LinkParams &lp, const CalibrationResult &cal,
                            const ChipParams &chip) {
    return make_pulse_model(lp, alice_states(cal, chip), PolTransform::identity(), ideal_epc(cal.chi),
                            pp.mean_mu());
}

OutcomeLaw outcome_law(const PulseModel &model, int s, double mu) {
    OutcomeLaw law;
    const double pd = model.p_dark;
    std::array<double, 4> c{};
    std::array<double, 4> q{};
    double q_lost = 1.0;
    for (int i = 0; i < 4; ++i) {
        double lambda = mu * model.eta * model.proj[s][i];
        c[i] = 1.0 - (1.0 - pd) * std::exp(-lambda);
        q[i] = model.eta * model.proj[s][i];
        q_lost -= q[i];
    }
    const double p_one = mu * std::exp(-mu);
    for (unsigned mask = 1; mask < 16; ++mask) {
        double p = 1.0;
        double p1 = q_lost * dark_pattern(mask, pd, 0);
        for (int i = 0; i < 4; ++i) {
            bool on = mask & (1u << i);
            p *= on ? c[i] : 1.0 - c[i];
            if (on) {
                p1 += q[i] * dark_pattern(mask, pd, 1u << i);
            }
        }
        int pop = std::popcount(mask);
        if (pop > 1) {
            law.multi += p;
        }
        for (int j = 0; j < 4; ++j) {
            if (mask & (1u << j)) {
                law.out[j] += p / pop;
                law.out_single[j] += p_one * p1 / pop;
            }
        }
    }
    return law;
}

ObservedCounts expected_statistics(const ProtocolParams &pp, const PulseModel &model) {
    pp.validate();
    ObservedCounts oc;
    oc.expectation = true;
    const double total = static_cast<double>(pp.block_pulses);
    oc.block_pulses = total;
    oc.duration_s = total / model.rep_rate_hz;
    for (int s = 0; s < 4; ++s) {
        const int b = s / 2;
        const int bit = s & 1;
        for (int k = 0; k < 2; ++k) {
            double sent = total * pp.p_mu(k) * pp.p_basis(b) * 0.5;
            oc.sent[s][k] = sent;
            OutcomeLaw law = outcome_law(model, s, pp.mu(k));
            oc.double_clicks += sent * law.multi;
            for (int j = 0; j < 4; ++j) {
                double det = sent * law.out[j];
                oc.crosstalk_events += det * model.p_cross;
                if (basis_of_detector(j) != b) {
                    continue;
                }
                oc.n[b][k] += det;
                oc.m[b][k] += det * (bit_of_detector(j) != bit ? 1.0 : model.p_cross);
                if (b == kBasisZ) {
                    oc.single_photon_z += sent * law.out_single[j];
                }
            }
        }
    }
    return oc;
}

ObservedCounts expected_statistics(const ProtocolParams &pp, const LinkParams &lp, const CalibrationResult &cal,
                                   const ChipParams &chip) {
    return expected_statistics(pp, make_pulse_model(pp, lp, cal, chip));
}

ObservedCounts simulate_block(const ProtocolParams &pp, const PulseModel &model, std::uint64_t seed) {
    pp.validate();
    ObservedCounts oc;
    std::mt19937_64 rng(stream_seed(seed, 1));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::array<std::poisson_distribution<int>, 2> photons{
        std::poisson_distribution<int>(pp.mu1 > 0.0 ? pp.mu1 : 1.0),
        std::poisson_distribution<int>(pp.mu2 > 0.0 ? pp.mu2 : 1.0)};
    std::array<std::array<double, 4>, 4> cdf{};
    for (int s = 0; s < 4; ++s) {
        double acc = 0.0;
        for (int j = 0; j < 4; ++j) {
            acc += model.proj[s][j];
            cdf[s][j] = acc;
        }
    }

    const std::uint64_t n_pulses = static_cast<std::uint64_t>(pp.block_pulses);
    for (std::uint64_t i = 0; i < n_pulses; ++i) {
        const int k = counter_uniform(seed, i, 0) < pp.p_mu1 ? 0 : 1;
        const int b = counter_uniform(seed, i, 1) < pp.pz_alice ? kBasisZ : kBasisX;
        const int bit = counter_uniform(seed, i, 2) < 0.5 ? 0 : 1;
        const int s = 2 * b + bit;
        oc.sent[s][k] += 1.0;

        const int n_ph = pp.mu(k) > 0.0 ? photons[k](rng) : 0;
        unsigned mask = 0;
        for (int r = 0; r < n_ph; ++r) {
            if (uni(rng) < model.eta) {
                double u = uni(rng) * cdf[s][3];
                int j = 0;
                while (j < 3 && u >= cdf[s][j]) {
                    ++j;
                }
                mask |= 1u << j;
            }
        }
        if (model.p_dark > 0.0) {
            for (int d = 0; d < 4; ++d) {
                if (uni(rng) < model.p_dark) {
                    mask |= 1u << d;
                }
            }
        }
        if (mask == 0) {
            continue;
        }
        int pop = std::popcount(mask);
        int j = std::countr_zero(mask);
        if (pop > 1) {
            oc.double_clicks += 1.0;
            int pick = std::min(pop - 1, static_cast<int>(uni(rng) * pop));
            for (int t = 0; t < pick; ++t) {
                mask &= mask - 1;
            }
            j = std::countr_zero(mask);
        }
        bool displaced = uni(rng) < model.p_cross;
        if (displaced) {
            oc.crosstalk_events += 1.0;
        }
        if (basis_of_detector(j) != b) {
            continue;
        }
        oc.n[b][k] += 1.0;
        if (displaced || bit_of_detector(j) != bit) {
            oc.m[b][k] += 1.0;
        }
        if (b == kBasisZ && n_ph == 1) {
            oc.single_photon_z += 1.0;
        }
    }
    oc.block_pulses = static_cast<double>(n_pulses);
    oc.duration_s = oc.block_pulses / model.rep_rate_hz;
    return oc;
}

ObservedCounts simulate_block(const ProtocolParams &pp, const LinkParams &lp, const CalibrationResult &cal,
                              const ChipParams &chip) {
    return simulate_block(pp, make_pulse_model(pp, lp, cal, chip), pp.seed);
}

ObservedCounts sample_block_binned(const ProtocolParams &pp, const PulseModel &model, double pulses,
                                   std::mt19937_64 &rng) {
    pp.validate();
    if (!(pulses >= 0.0)) {
        throw ContractError("sample_block_binned: pulse count must be non-negative");
    }
    ObservedCounts oc;
    long long remaining = static_cast<long long>(std::llround(pulses));
    double mass = 1.0;
    for (int s = 0; s < 4; ++s) {
        const int b = s / 2;
        const int bit = s & 1;
        for (int k = 0; k < 2; ++k) {
            double p_class = pp.p_mu(k) * pp.p_basis(b) * 0.5;
            long long sent = (s == 3 && k == 1) ? remaining : draw_binomial(rng, remaining, p_class / mass);
            remaining -= sent;
            mass -= p_class;
            oc.sent[s][k] = static_cast<double>(sent);

            OutcomeLaw law = outcome_law(model, s, pp.mu(k));
            oc.double_clicks += static_cast<double>(draw_binomial(rng, sent, law.multi));
            long long left = sent;
            double left_mass = 1.0;
            for (int j = 0; j < 4; ++j) {
                for (int single = 0; single < 2; ++single) {
                    double pj = single ? law.out_single[j] : law.out[j] - law.out_single[j];
                    for (int xt = 0; xt < 2; ++xt) {
                        double p = pj * (xt ? model.p_cross : 1.0 - model.p_cross);
                        long long c = left_mass > 0.0 ? draw_binomial(rng, left, std::min(1.0, p / left_mass)) : 0;
                        left -= c;
                        left_mass -= p;
                        if (c == 0) {
                            continue;
                        }
                        double cd = static_cast<double>(c);
                        if (xt) {
                            oc.crosstalk_events += cd;
                        }
                        if (basis_of_detector(j) != b) {
                            continue;
                        }
                        oc.n[b][k] += cd;
                        if (xt || bit_of_detector(j) != bit) {
                            oc.m[b][k] += cd;
                        }
                        if (b == kBasisZ && single) {
                            oc.single_photon_z += cd;
                        }
                    }
                }
            }
        }
    }
    oc.block_pulses = pulses;
    oc.duration_s = pulses / model.rep_rate_hz;
    return oc;
}

double qber_basis(const ObservedCounts &oc, int basis) {
    double n = oc.n_basis(basis);
    if (!(n > 0.0)) {
        throw UndefinedQberError(basis == kBasisZ ? "QBER_Z undefined: no sifted Z counts"
                                                  : "QBER_X undefined: no sifted X counts");
    }
    return oc.m_basis(basis) / n;
}

QberPair qber(const ObservedCounts &oc) {
    return {qber_basis(oc, kBasisZ), qber_basis(oc, kBasisX)};
}

void write_counts_csv(std::ostream &out, const ObservedCounts &oc, const ProtocolParams &pp) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "# double_clicks=%.17g\n# crosstalk_events=%.17g\n# single_photon_z=%.17g\n",
                  oc.double_clicks, oc.crosstalk_events, oc.single_photon_z);
    out << buf;
    std::snprintf(buf, sizeof buf, "# block_pulses=%.17g\n# duration_s=%.17g\n# expectation=%d\n", oc.block_pulses,
                  oc.duration_s, oc.expectation ? 1 : 0);
    out << buf;
    out << "basis,intensity,mu,sent,n,m\n";
    for (int b = 0; b < 2; ++b) {
        for (int k = 0; k < 2; ++k) {
            std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%.17g,%.17g,%.17g\n", b == kBasisZ ? "Z" : "X",
                          k == 0 ? "mu1" : "mu2", pp.mu(k), oc.sent_basis(b, k), oc.n[b][k], oc.m[b][k]);
            out << buf;
        }
    }
}

}  // namespace qkdsim
