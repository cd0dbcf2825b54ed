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

// Fiber channel and receiver physics.
//
// Bob: passive basis split (Z with probability basis_split), one polarizing
// beam splitter per basis with finite extinction, four SNSPD channels in the
// order H, V, D, A. Detector photon numbers are Poisson with mean
// mu * eta_channel * eta_bob * eta_det * p_projection, so the four channels
// click independently given the intensity.

#ifndef QKDSIM_LINK_H
#define QKDSIM_LINK_H

#include <array>
#include <random>
#include <utility>
#include <vector>

#include "qkdsim/polarization.h"

namespace qkdsim {

enum Detector : int { kDetH = 0, kDetV = 1, kDetD = 2, kDetA = 3 };

struct DetectorParams {
    /// (count rate Hz, efficiency), ascending in rate.
    std::vector<std::pair<double, double>> eff_curve{{125e3, 0.70}, {4e6, 0.64}};
    double dark_rate_hz = 100.0;
    double jitter_fwhm_ps = 50.0;
    double jitter_fw1pm_ps = 171.0;
    double laser_fwhm_ps = 26.0;
    double laser_jitter_rms_ps = 6.0;
    /// false: pure Gaussian detector jitter (FWHM only).
    bool jitter_tails = true;

    /// Throws ConfigError.
    void validate() const;
};

struct LinkParams {
    double length_km = 150.0;
    double atten_db_per_km = 0.18;
    /// Birefringence random-walk scale, rad / sqrt(s).
    double drift_rate = 0.01;
    /// Probability that Bob measures in Z.
    double basis_split = 0.9;
    double pbs_er_db = 30.0;
    /// Lumped receiver insertion loss.
    double bob_loss_db = 2.0;
    double rep_rate_hz = 5e9;
    DetectorParams detector;

    double bin_period_s() const {
        return 1.0 / rep_rate_hz;
    }
    double bin_period_ps() const {
        return 1e12 / rep_rate_hz;
    }
    /// Throws ConfigError.
    void validate() const;
};

struct ChannelState {
    PolTransform birefringence;
    double elapsed_s = 0.0;
};

/// 10^(-atten * length / 10).
double channel_transmittance(const LinkParams &lp);

/// Composes a rotation by an angle ~ Normal(0, drift_rate^2 dt) about a
/// uniformly random Poincare axis, then re-orthonormalizes.
ChannelState drift_step(const ChannelState &cs, double drift_rate, double dt_s, std::mt19937_64 &rng);

/// Log-linear interpolation in rate over eff_curve, clamped at the ends.
double detector_efficiency(double rate_hz, const DetectorParams &dp);

struct CrosstalkProbs {
    /// Mass with bin_period/2 < |t| <= 3 bin_period/2 (both neighbors).
    double p_adjacent = 0.0;
    /// Mass with |t| > 3 bin_period/2.
    double p_beyond = 0.0;
};

/// Tail shape of the detector jitter: Gaussian core of standard deviation
/// sigma for |t| <= k sigma, continued by exp(k^2/2 - k|t|/sigma).
struct JitterShape {
    double sigma_ps = 0.0;
    /// +inf for a pure Gaussian.
    double k = 0.0;
    /// Standard deviation of the Gaussian laser pulse and laser jitter.
    double sigma_laser_ps = 0.0;
};

/// Fits the tail so the detector response has full width at 1% maximum
/// equal to jitter_fw1pm. Throws ConfigError if no such tail exists.
JitterShape jitter_shape(const DetectorParams &dp);

/// P(|t| > a) for the total timing response.
double timing_tail_probability(const JitterShape &shape, double a_ps);

CrosstalkProbs timing_crosstalk(const DetectorParams &dp, double bin_period_ps);

/// PBS leakage fraction 10^(-er/10) / (1 + 10^(-er/10)).
double pbs_leakage(double er_db);

/// Bob's ideal compensation for an X basis of relative phase chi:
/// diag(1, e^{-i chi}) maps (|H> +- e^{i chi}|V>)/sqrt2 onto D/A.
PolTransform ideal_epc(double chi);

/// Probability of each detector being the projection target for a
/// single photon (basis split included); sums to 1.
std::array<double, 4> projection_probs(const PolarizationState &s, const PolTransform &channel,
                                       const PolTransform &epc, const LinkParams &lp);

/// Per-pulse click probability of each detector:
/// 1 - (1 - dark_rate * bin_period) exp(-lambda_i).
std::array<double, 4> receiver_click_probs(const PolarizationState &s, const ChannelState &cs,
                                           const PolTransform &epc, const LinkParams &lp, double mu,
                                           double eta_det);

/// eta_ch * eta_bob (no detector efficiency).
double transmission_to_detectors(const LinkParams &lp);

/// Detector efficiency at the count rate it produces itself; mean_mu is
/// the intensity averaged over the pulse mixture.
double operating_efficiency(const LinkParams &lp, double mean_mu);

}  // namespace qkdsim

#endif
