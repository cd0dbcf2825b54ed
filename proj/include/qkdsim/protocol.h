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

// Decoy-state BB84 rounds at the counts level.
//
// Three generators share one per-pulse model and must agree in law:
// expected_statistics (closed form), simulate_block (pulse by pulse) and
// sample_block_binned (multinomial draws per class, for very long blocks).
//
// Per pulse: Alice picks intensity, basis and bit; the photon number is
// Poisson; each detector clicks on a photon or a dark count; with several
// clicks the outcome is one clicked detector chosen uniformly; a click
// displaced by timing jitter (probability p_adjacent + p_beyond) is
// booked as an error of its bin.

#ifndef QKDSIM_PROTOCOL_H
#define QKDSIM_PROTOCOL_H

#include <array>
#include <cstdint>
#include <iosfwd>
#include <random>

#include "qkdsim/calibration.h"
#include "qkdsim/link.h"

namespace qkdsim {

enum Basis : int { kBasisZ = 0, kBasisX = 1 };

struct ProtocolParams {
    double mu1 = 0.6;
    double mu2 = 0.1;
    double p_mu1 = 0.85;
    double pz_alice = 0.9;
    std::int64_t block_pulses = 10'000'000;
    std::uint64_t seed = 1;

    double mu(int k) const {
        return k == 0 ? mu1 : mu2;
    }
    double p_mu(int k) const {
        return k == 0 ? p_mu1 : 1.0 - p_mu1;
    }
    double p_basis(int b) const {
        return b == kBasisZ ? pz_alice : 1.0 - pz_alice;
    }
    double mean_mu() const {
        return p_mu1 * mu1 + (1.0 - p_mu1) * mu2;
    }
    /// Throws ConfigError.
    void validate() const;
};

/// Tallies of one block. Monte-Carlo blocks hold integers; expectation
/// blocks hold reals with the same ordering constraints.
struct ObservedCounts {
    /// Sifted detections and errors, [basis][intensity index].
    std::array<std::array<double, 2>, 2> n{};
    std::array<std::array<double, 2>, 2> m{};
    /// Pulses sent, [state H, V, +, -][intensity index].
    std::array<std::array<double, 2>, 4> sent{};
    double double_clicks = 0.0;
    double crosstalk_events = 0.0;
    /// Sifted Z detections from one-photon pulses (simulation truth).
    double single_photon_z = 0.0;
    double block_pulses = 0.0;
    double duration_s = 0.0;
    bool expectation = false;

    double n_basis(int b) const {
        return n[b][0] + n[b][1];
    }
    double m_basis(int b) const {
        return m[b][0] + m[b][1];
    }
    /// Pulses sent in basis b at intensity k.
    double sent_basis(int b, int k) const {
        return sent[2 * b][k] + sent[2 * b + 1][k];
    }
    /// Throws InvariantError unless 0 <= m <= n <= sent.
    void check() const;
    ObservedCounts &operator+=(const ObservedCounts &o);
};

/// Everything the per-pulse statistics depend on.
struct PulseModel {
    std::array<PolarizationState, 4> states;
    /// Single-photon projection probabilities, [state][detector].
    std::array<std::array<double, 4>, 4> proj{};
    /// eta_channel * eta_bob * eta_det.
    double eta = 0.0;
    double eta_det = 0.0;
    double p_dark = 0.0;
    /// Displacement probability p_adjacent + p_beyond.
    double p_cross = 0.0;
    double rep_rate_hz = 0.0;
};

/// Alice's four prepared states from the calibrated chip.
std::array<PolarizationState, 4> alice_states(const CalibrationResult &cal, const ChipParams &chip);

PulseModel make_pulse_model(const LinkParams &lp, const std::array<PolarizationState, 4> &states,
                            const PolTransform &channel, const PolTransform &epc, double mean_mu);

/// Identity channel and the ideal EPC for the calibrated chi.
PulseModel make_pulse_model(const ProtocolParams &pp, const LinkParams &lp, const CalibrationResult &cal,
                            const ChipParams &chip);

/// Outcome law of one pulse of state s at intensity mu.
struct OutcomeLaw {
    /// P(recorded outcome = detector j).
    std::array<double, 4> out{};
    /// P(outcome = j and exactly one photon was emitted).
    std::array<double, 4> out_single{};
    /// P(two or more detectors click).
    double multi = 0.0;
};
OutcomeLaw outcome_law(const PulseModel &model, int state, double mu);

ObservedCounts expected_statistics(const ProtocolParams &pp, const PulseModel &model);
ObservedCounts expected_statistics(const ProtocolParams &pp, const LinkParams &lp, const CalibrationResult &cal,
                                   const ChipParams &chip);

/// Pulse-by-pulse Monte Carlo of pp.block_pulses pulses. Alice's choices
/// use the counter RNG keyed by (seed, pulse index); the receiver uses a
/// separate stream. Bit-for-bit deterministic given seed.
ObservedCounts simulate_block(const ProtocolParams &pp, const PulseModel &model, std::uint64_t seed);
ObservedCounts simulate_block(const ProtocolParams &pp, const LinkParams &lp, const CalibrationResult &cal,
                              const ChipParams &chip);

/// Multinomial draw of `pulses` pulses per (state, intensity) class.
ObservedCounts sample_block_binned(const ProtocolParams &pp, const PulseModel &model, double pulses,
                                   std::mt19937_64 &rng);

struct QberPair {
    double z = 0.0;
    double x = 0.0;
};

/// m / n pooled over intensities. Throws UndefinedQberError for a basis
/// without sifted counts.
double qber_basis(const ObservedCounts &oc, int basis);
QberPair qber(const ObservedCounts &oc);

/// Rows basis,intensity,mu,sent,n,m; block-level tallies as '#' lines.
void write_counts_csv(std::ostream &out, const ObservedCounts &oc, const ProtocolParams &pp);

}  // namespace qkdsim

#endif
