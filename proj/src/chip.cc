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

#include "qkdsim/chip.h"

#include <cmath>
#include <string>

#include "qkdsim/errors.h"

namespace qkdsim {

namespace {

const Complex kI(0.0, 1.0);

void check_voltage(double v, const ChipParams &p, const char *name) {
    if (!(v >= 0.0 && v <= p.v_max)) {
        throw ContractError(std::string(name) + " = " + std::to_string(v) + " V outside [0, " +
                            std::to_string(p.v_max) + "] V");
    }
}

double power_fraction(double db) {
    return std::pow(10.0, -db / 10.0);
}

}  // namespace

ChipParams ChipParams::defaults() {
    ChipParams p;
    p.set_isolation_db(15.8);
    return p;
}

ChipParams &ChipParams::set_isolation_db(double iso_db) {
    gc_isolation_db = iso_db;
    delta = std::isinf(iso_db) ? 0.0 : std::asin(std::sqrt(power_fraction(iso_db)));
    return *this;
}

ChipParams &ChipParams::set_delta(double d) {
    delta = d;
    double s = std::sin(d);
    gc_isolation_db = s == 0.0 ? std::numeric_limits<double>::infinity() : -10.0 * std::log10(s * s);
    return *this;
}

ChipParams ChipParams::lossless() const {
    ChipParams q = *this;
    q.ep_loss_slope_db_per_v = 0.0;
    q.mzi_er_floor_db = std::numeric_limits<double>::infinity();
    q.insertion_loss_db = 0.0;
    return q;
}

void ChipParams::validate() const {
    if (!(delta >= 0.0 && delta < kPi / 4.0)) {
        throw ConfigError("chip.delta must lie in [0, pi/4)");
    }
    if (!(zeta > -kPi && zeta <= kPi)) {
        throw ConfigError("chip.zeta must lie in (-pi, pi]");
    }
    if (!(v_2pi > 0.0)) {
        throw ConfigError("chip.v_2pi must be positive");
    }
    if (!(v_max > 0.0)) {
        throw ConfigError("chip.v_max must be positive");
    }
    if (!(ep_loss_slope_db_per_v >= 0.0) || !(mzi_er_floor_db >= 0.0) || !(gc_isolation_db >= 0.0) ||
        !(insertion_loss_db >= 0.0)) {
        throw ConfigError("chip dB quantities must be non-negative");
    }
    if (!(mu_cal > 0.0)) {
        throw ConfigError("chip.mu_cal must be positive");
    }
    double s = std::sin(delta);
    double expected = std::isinf(gc_isolation_db) ? 0.0 : power_fraction(gc_isolation_db);
    if (std::abs(s * s - expected) > 1e-12) {
        throw ConfigError("chip.delta and chip.gc_isolation_db are inconsistent");
    }
}

double ChipParams::leak_amplitude() const {
    return std::isinf(mzi_er_floor_db) ? 0.0 : std::pow(10.0, -mzi_er_floor_db / 20.0);
}

void DriveSettings::validate(const ChipParams &p) const {
    check_voltage(v_ep1_plus, p, "v_ep1_plus");
    check_voltage(v_ep1_minus, p, "v_ep1_minus");
    check_voltage(v_ep2_plus, p, "v_ep2_plus");
    check_voltage(v_ep2_minus, p, "v_ep2_minus");
    check_voltage(v_ep3_plus, p, "v_ep3_plus");
    check_voltage(v_ep3_minus, p, "v_ep3_minus");
}

EpResponse ep_transfer(double volts, const ChipParams &p) {
    check_voltage(volts, p, "EP voltage");
    return {2.0 * kPi * volts / p.v_2pi, std::pow(10.0, -p.ep_loss_slope_db_per_v * volts / 20.0)};
}

MziOutputs mzi_outputs(double v_plus, double v_minus, double thermal_phase, const ChipParams &p,
                       bool apply_er_floor) {
    EpResponse up = ep_transfer(v_plus, p);
    EpResponse dn = ep_transfer(v_minus, p);
    double half = 0.5 * (up.phase - dn.phase + thermal_phase);
    Complex arm_plus = up.amplitude * std::polar(1.0, half);
    Complex arm_minus = dn.amplitude * std::polar(1.0, -half);
    Complex u = (arm_plus - arm_minus) / (2.0 * kI);
    Complex d = 0.5 * (arm_plus + arm_minus);
    double eps = apply_er_floor ? p.leak_amplitude() : 0.0;
    if (eps == 0.0) {
        return {u, d};
    }
    double keep = std::sqrt(1.0 - eps * eps);
    return {keep * u + kI * eps * d, keep * d + kI * eps * u};
}

EncoderPhases encoder_phases(const DriveSettings &d, const ChipParams &p) {
    EncoderPhases out;
    out.dphi2 = ep_transfer(d.v_ep2_plus, p).phase - ep_transfer(d.v_ep2_minus, p).phase + d.phi_tp2;
    out.dphi3 = ep_transfer(d.v_ep3_plus, p).phase - ep_transfer(d.v_ep3_minus, p).phase + d.phi_tp3;
    return out;
}

JonesVector encoder_amplitudes(const DriveSettings &d, const ChipParams &p) {
    MziOutputs m2 = mzi_outputs(d.v_ep2_plus, d.v_ep2_minus, d.phi_tp2, p);
    EpResponse e3p = ep_transfer(d.v_ep3_plus, p);
    EpResponse e3m = ep_transfer(d.v_ep3_minus, p);
    double dphi3 = e3p.phase - e3m.phase + d.phi_tp3;
    double sd = std::sin(p.delta);
    double cd = std::cos(p.delta);
    JonesVector a;
    a.h = std::polar(1.0, dphi3) * e3p.amplitude * m2.upper +
          std::polar(1.0, p.zeta) * e3m.amplitude * sd * m2.lower;
    a.v = e3m.amplitude * cd * m2.lower;
    return a;
}

TransmitterOutput transmitter_output(const DriveSettings &d, const ChipParams &p) {
    d.validate(p);
    JonesVector a = encoder_amplitudes(d, p);
    MziOutputs m1 = mzi_outputs(d.v_ep1_plus, d.v_ep1_minus, d.phi_tp1, p);
    double t_voa = std::pow(std::sin(0.5 * d.phi_tp_voa), 2);
    double feed = std::norm(m1.upper) * t_voa * power_fraction(p.insertion_loss_db);
    TransmitterOutput out;
    out.state = PolarizationState(a);
    out.intensity = p.mu_cal * feed * a.power();
    return out;
}

double decoy_intensity(const DriveSettings &d, const ChipParams &p, double mu_cal) {
    if (!(mu_cal > 0.0)) {
        throw ContractError("decoy_intensity: mu_cal must be positive");
    }
    MziOutputs m1 = mzi_outputs(d.v_ep1_plus, d.v_ep1_minus, d.phi_tp1, p);
    double t_voa = std::pow(std::sin(0.5 * d.phi_tp_voa), 2);
    return mu_cal * std::norm(m1.upper) * t_voa;
}

double mzi_pulse_er(const ChipParams &p) {
    return p.mzi_er_floor_db;
}

ArmVoltages voltages_for_phase(double ep_phase, const ChipParams &p) {
    double v = std::abs(ep_phase) * p.v_2pi / (2.0 * kPi);
    if (v > p.v_max) {
        throw ContractError("EP phase " + std::to_string(ep_phase) + " rad needs " + std::to_string(v) +
                            " V, above v_max");
    }
    return ep_phase >= 0.0 ? ArmVoltages{v, 0.0} : ArmVoltages{0.0, v};
}

DriveSettings drive_for_phases(double dphi2, double dphi3, const ChipParams &p, const DriveSettings &base) {
    DriveSettings d = base;
    ArmVoltages v2 = voltages_for_phase(dphi2 - base.phi_tp2, p);
    d.v_ep2_plus = v2.plus;
    d.v_ep2_minus = v2.minus;
    d.v_ep3_plus = 0.0;
    d.v_ep3_minus = 0.0;
    d.phi_tp3 = dphi3;
    return d;
}

}  // namespace qkdsim
