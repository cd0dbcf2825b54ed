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

// Forward model of the polarization-encoding transmitter chip.
//
// Light passes the decoy modulator (MZI-1), the thermal attenuator (VOA),
// the splitting interferometer (MZI-2) and the two phase-shifted paths of
// MZI-3 before the two-dimensional grating coupler (2D-GC) maps the upper
// path u to |H> and the lower path d to e^{i zeta} sin(delta)|H> +
// cos(delta)|V>. With ideal MZIs the output amplitudes are
//
//   a_H = e^{i dphi3} t3+ sin(dphi2/2) + e^{i zeta} t3- sin(delta) cos(dphi2/2)
//   a_V = t3- cos(delta) cos(dphi2/2)
//
// where dphi_n = dphi_EP_n + dphi_TP_n and t3+- are the EP3 arm amplitudes.
//
// Convention: |H> needs dphi2 = pi in this formula. The default drive keeps
// a thermal bias TP2 = pi, so |H> corresponds to zero EP2 drive and the
// calibrated |V> absorbs the EP2 arm-loss imbalance.
//
// Non-ideal MZIs: each EP arm has its own voltage-dependent amplitude, and a
// finite extinction ratio leaks a quadrature amplitude eps = 10^(-ER/20)
// between the two outputs (power conserving; |u|^2 floors at eps^2).

#ifndef QKDSIM_CHIP_H
#define QKDSIM_CHIP_H

#include <limits>

#include "qkdsim/polarization.h"

namespace qkdsim {

constexpr double kPi = 3.14159265358979323846;

struct ChipParams {
    /// 2D-GC cross-coupling angle, [0, pi/4).
    double delta = 0.0;
    /// 2D-GC cross-coupling phase, (-pi, pi].
    double zeta = 0.0;
    double v_2pi = 6.77;
    double ep_loss_slope_db_per_v = 0.19;
    /// +inf disables the leakage floor.
    double mzi_er_floor_db = 29.47;
    /// Polarization isolation of the 2D-GC; sin^2(delta) = 10^(-iso/10).
    double gc_isolation_db = std::numeric_limits<double>::infinity();
    double insertion_loss_db = 0.0;
    double v_max = 8.0;
    /// Mean photon number at full transmission of the whole chip.
    double mu_cal = 1.0;

    /// Default device: 15.8 dB isolation, zeta = 0.
    static ChipParams defaults();

    /// Sets gc_isolation_db and the matching delta.
    ChipParams &set_isolation_db(double iso_db);
    /// Sets delta and the matching gc_isolation_db.
    ChipParams &set_delta(double d);

    /// Copy with ep_loss_slope = 0, ER floor = inf and no insertion loss.
    ChipParams lossless() const;

    /// Throws ConfigError on any violated invariant.
    void validate() const;

    /// 10^(-ER/20), zero when the floor is disabled.
    double leak_amplitude() const;
};

struct DriveSettings {
    double v_ep1_plus = 0.0;
    double v_ep1_minus = 0.0;
    double v_ep2_plus = 0.0;
    double v_ep2_minus = 0.0;
    double v_ep3_plus = 0.0;
    double v_ep3_minus = 0.0;
    /// MZI-1 biased to full transmission (signal level).
    double phi_tp1 = kPi;
    /// Keeps |H> at zero EP2 drive; see the file comment.
    double phi_tp2 = kPi;
    double phi_tp3 = 0.0;
    /// Attenuator at full transmission.
    double phi_tp_voa = kPi;

    /// Throws ContractError if a voltage lies outside [0, v_max].
    void validate(const ChipParams &p) const;
};

struct TransmitterOutput {
    PolarizationState state;
    /// Mean photon number per pulse.
    double intensity = 0.0;
};

struct EpResponse {
    double phase = 0.0;
    double amplitude = 1.0;
};

/// Electro-optic phase shifter: phase = 2 pi v / v_2pi, amplitude =
/// 10^(-slope v / 20). Throws ContractError outside [0, v_max].
EpResponse ep_transfer(double volts, const ChipParams &p);

struct MziOutputs {
    /// Port carrying sin(dphi/2) in the ideal limit.
    Complex upper;
    /// Port carrying cos(dphi/2) in the ideal limit.
    Complex lower;
};

/// Push-pull MZI with per-arm EP loss and the ER-floor leak.
MziOutputs mzi_outputs(double v_plus, double v_minus, double thermal_phase, const ChipParams &p,
                       bool apply_er_floor = true);

/// Un-normalized 2D-GC amplitudes (a_H, a_V) for unit input to MZI-2,
/// excluding MZI-1, VOA and insertion loss.
JonesVector encoder_amplitudes(const DriveSettings &d, const ChipParams &p);

/// Total differential phases (dphi2, dphi3) produced by a drive.
struct EncoderPhases {
    double dphi2 = 0.0;
    double dphi3 = 0.0;
};
EncoderPhases encoder_phases(const DriveSettings &d, const ChipParams &p);

TransmitterOutput transmitter_output(const DriveSettings &d, const ChipParams &p);

/// mu_cal * T(MZI-1) * T(VOA).
double decoy_intensity(const DriveSettings &d, const ChipParams &p, double mu_cal);

/// Static extinction ratio of an EP-driven MZI under on/off pulse drive, in
/// dB; +inf when the floor is disabled.
double mzi_pulse_er(const ChipParams &p);

/// Push-pull voltages realizing an electro-optic differential phase: a
/// positive phase drives the plus arm, a negative one the minus arm.
/// Throws ContractError if the required voltage exceeds v_max.
struct ArmVoltages {
    double plus = 0.0;
    double minus = 0.0;
};
ArmVoltages voltages_for_phase(double ep_phase, const ChipParams &p);

/// Drive with MZI-2/MZI-3 set to total phases (dphi2, dphi3): dphi2 is
/// reached with EP2 on top of the fixed TP2 bias, dphi3 with TP3 only.
DriveSettings drive_for_phases(double dphi2, double dphi3, const ChipParams &p,
                               const DriveSettings &base = {});

}  // namespace qkdsim

#endif
