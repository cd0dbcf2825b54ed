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

// Finite-key secret length for one-decoy BB84 (intensities mu1 > mu2).
//
// With delta(x) = sqrt(x/2 ln(19/eps_sec)) and basis totals n_b, m_b:
//
//   n^{+-}_{b,k} = e^k / p_k (n_{b,k} +- delta(n_b))
//   m^{+-}_{b,k} = e^k / p_k (m_{b,k} +- delta(m_b))
//   tau_n        = sum_k p_k e^{-k} k^n / n!
//
//   s_{b,0}^u = 2 tau_0 m^+_{b,mu2}
//   s_{b,0}^l = tau_0 (mu1 n^-_{b,mu2} - mu2 n^+_{b,mu1}) / (mu1 - mu2)
//   s_{b,1}^l = tau_1 mu1 (n^-_{b,mu2} - mu2^2/mu1^2 n^+_{b,mu1}
//               - (mu1^2 - mu2^2)/mu1^2 s_{b,0}^u / tau_0) / (mu2 (mu1 - mu2))
//   v_{X,1}   = tau_1 (m^+_{X,mu1} - m^-_{X,mu2}) / (mu1 - mu2)
//   phi_Z^u   = v_{X,1}/s_{X,1}^l + gamma(eps_sec, v_{X,1}/s_{X,1}^l, s_{Z,1}^l, s_{X,1}^l)
//   gamma(a,b,c,d) = sqrt((c+d)(1-b)b / (c d ln2) log2((c+d)/(c d (1-b) b) 19^2/a^2))
//
//   l = s_{Z,0}^l + s_{Z,1}^l (1 - h(phi_Z^u)) - lambda_EC
//       - 6 log2(19/eps_sec) - log2(2/eps_cor),   lambda_EC = f_ec n_Z h(Q_Z)
//
// The asymptotic variant sets delta, gamma and the two eps terms to zero.

#ifndef QKDSIM_FINITEKEY_H
#define QKDSIM_FINITEKEY_H

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "qkdsim/protocol.h"

namespace qkdsim {

struct SecurityParams {
    double eps_sec = 1e-9;
    double eps_cor = 1e-15;
    double f_ec = 1.16;
    /// Throws ConfigError.
    void validate() const;
};

struct SecretLengthResult {
    /// Secret bits per block, floor of the bound, >= 0.
    double l = 0.0;
    /// Unclamped value of the bound.
    double l_raw = 0.0;
    double skr_bps = 0.0;
    double s_z0_l = 0.0;
    double s_z0_u = 0.0;
    double s_z1_l = 0.0;
    double s_x0_u = 0.0;
    double s_x1_l = 0.0;
    double v_x1 = 0.0;
    double phi_z_u = 0.5;
    /// Observed single-photon X error-rate estimate v_{X,1}/s_{X,1}^l.
    double e_x1 = 0.0;
    double gamma = 0.0;
    double lambda_ec = 0.0;
    double qber_z = 0.0;
    double qber_x = 0.0;
    double tau0 = 0.0;
    double tau1 = 0.0;
    /// [basis][intensity], e^k/p_k scaling included.
    std::array<std::array<double, 2>, 2> n_plus{}, n_minus{}, m_plus{}, m_minus{};
    bool asymptotic = false;
    /// One entry per clamped intermediate.
    std::vector<std::string> flags;
};

double binary_entropy(double p);

double tau_n(int n, const ProtocolParams &pp);

SecretLengthResult secret_length(const ObservedCounts &oc, const ProtocolParams &pp, const SecurityParams &sp,
                                 bool asymptotic = false);

struct SearchSpace {
    std::array<double, 2> mu1{0.05, 1.0};
    std::array<double, 2> mu2{0.01, 0.5};
    std::array<double, 2> p_mu1{0.05, 0.99};
    std::array<double, 2> pz_alice{0.5, 0.99};
    /// Throws ConfigError on an inverted or infeasible box.
    void validate() const;
};

struct OptimizedPoint {
    ProtocolParams params;
    SecretLengthResult result;
    ObservedCounts counts;
};

/// Coordinate search (9-point scan, then golden section; 3 outer rounds)
/// over (mu1, mu2, p_mu1, pz_alice), maximizing skr_bps of the expected
/// statistics with the identity channel and ideal EPC. block_pulses and
/// seed are taken from `start`, which also supplies the starting point.
OptimizedPoint optimize_params(const LinkParams &lp, const ChipParams &chip, const CalibrationResult &cal,
                               const SecurityParams &sp, const SearchSpace &space, const ProtocolParams &start);

struct SkrPoint {
    double distance_km = 0.0;
    double skr_bps = 0.0;
    double qber_z = 0.0;
    double qber_x = 0.0;
    ProtocolParams params;
    double l = 0.0;
};

std::vector<SkrPoint> skr_vs_distance(const std::vector<double> &distances_km, const LinkParams &lp,
                                      const ChipParams &chip, const CalibrationResult &cal,
                                      const SecurityParams &sp, const SearchSpace &space,
                                      const ProtocolParams &start, bool optimize);

/// distance_km,skr_bps,qber_z,qber_x,mu1,mu2,p_mu1,pz_alice,l,block_pulses.
void write_skr_csv(std::ostream &out, const std::vector<SkrPoint> &curve);

}  // namespace qkdsim

#endif
