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

// Iterative state-preparation calibration for the transmitter chip.
//
// Z basis: alternating 1-D minimizations of R_err = |<H|psi>|^2 over the
// MZI-2 differential phase (EP2, bracket (-pi/2, pi/2]) and the MZI-3
// thermal phase (TP3). The thermal phases are then frozen and the X basis is
// reached with the fast EP2/EP3 phases only: |+> balances |<H|psi>|^2 at
// 1/2, and |-> is driven orthogonal to the |+> found by tomography.
//
// All measurements go through a ProjectionProbe so the same procedure runs
// against the noiseless forward model or a noisy wrapper.

#ifndef QKDSIM_CALIBRATION_H
#define QKDSIM_CALIBRATION_H

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "qkdsim/chip.h"

namespace qkdsim {

/// Returns one sample of |<analyzer|psi(drive)>|^2.
using ProjectionProbe = std::function<double(const DriveSettings &, const PolarizationState &analyzer)>;

/// Noiseless probe backed by transmitter_output.
ProjectionProbe model_probe(const ChipParams &p);

/// Adds zero-mean Gaussian noise of standard deviation `sigma` to each
/// sample of `base`. Deterministic given `seed`.
ProjectionProbe noisy_probe(ProjectionProbe base, double sigma, std::uint64_t seed);

enum StateIndex : int { kStateH = 0, kStateV = 1, kStatePlus = 2, kStateMinus = 3 };

struct CalibrationOptions {
    double target_error = 1e-4;
    int max_sweeps = 10;
    /// Probe evaluations per 1-D search.
    int max_evals_per_search = 40;
    /// Probe samples averaged per accept decision.
    int samples_per_measurement = 1;
    bool random_start = false;
    std::uint64_t seed = 0;
};

struct TrajectoryPoint {
    int iteration = 0;
    double dphi2 = 0.0;
    double dphi3 = 0.0;
    double r_err = 0.0;
    StokesVector stokes;
};

struct CalibrationResult {
    std::array<DriveSettings, 4> settings{};
    /// Measured residuals: H and V against the opposite Z state, + as the
    /// MUB defect |<H|psi>|^2 - 1/2|, - as the overlap with the found +.
    std::array<double, 4> residual_error{1.0, 1.0, 1.0, 1.0};
    /// Z-basis (|V>) trajectory; accepted iterations only.
    std::vector<TrajectoryPoint> trajectory;
    /// |-> search trajectory (dphi3 holds the EP3 differential phase).
    std::vector<TrajectoryPoint> x_trajectory;
    int iterations_used = 0;
    int x_iterations_used = 0;
    /// Relative phase of the calibrated |+>.
    double chi = 0.0;
    bool z_complete = false;
    bool x_complete = false;

    /// Model states produced by the four settings.
    std::array<PolarizationState, 4> prepared_states(const ChipParams &p) const;
};

/// Thrown when the target is not reached within max_sweeps; carries the
/// best settings found.
class CalibrationError : public std::runtime_error {
   public:
    CalibrationError(const std::string &msg, CalibrationResult best)
        : std::runtime_error(msg), best_(std::move(best)) {
    }
    const CalibrationResult &best() const {
        return best_;
    }

   private:
    CalibrationResult best_;
};

CalibrationResult calibrate_z(const ChipParams &p, const ProjectionProbe &measure, const CalibrationOptions &opt = {});

/// Requires a completed Z result (thermal phases are kept).
CalibrationResult calibrate_x(const ChipParams &p, const ProjectionProbe &measure, CalibrationResult z_result,
                              const CalibrationOptions &opt = {});

/// calibrate_z followed by calibrate_x.
CalibrationResult calibrate(const ChipParams &p, const ProjectionProbe &measure, const CalibrationOptions &opt = {});

struct PhasePair {
    double dphi2 = 0.0;
    double dphi3 = 0.0;
};

/// Closed-form zero of a_H for the |V> setting: dphi3 = zeta + pi and
/// dphi2 = 2 atan((t3-/t3+) sin delta) with the EP3 arms at 0 V. Exact for an
/// ideal MZI-2 (no EP loss, no ER floor).
PhasePair analytic_z_solution(const ChipParams &p);

struct GridMinimum {
    double dphi2 = 0.0;
    double dphi3 = 0.0;
    double r_err = 0.0;
    /// Value after the second enumeration level around this cell.
    double refined_r_err = 0.0;
    double refined_dphi2 = 0.0;
    double refined_dphi3 = 0.0;
};

struct GridOracleResult {
    int resolution = 0;
    /// Axis value for grid index i: -pi + (i + 1) 2pi / resolution.
    double axis(int i) const;
    /// R_err at (axis(i), axis(j)) stored at i * resolution + j, i over dphi2.
    std::vector<double> landscape;
    GridMinimum global;
    /// Local minima of the grid (dphi3 periodic), lowest first.
    std::vector<GridMinimum> local_minima;

    double at(int i, int j) const {
        return landscape[static_cast<size_t>(i) * resolution + j];
    }
};

/// Exhaustive scan of R_err over (dphi2, dphi3) in (-pi, pi]^2, followed by
/// a 65x65 enumeration of the +-1 cell neighborhood of each local minimum.
/// resolution must be >= 64.
GridOracleResult grid_oracle(const ChipParams &p, int resolution);

struct IntensityImbalance {
    /// max |I_a - I_b| / mean(I) over the four states at the signal level.
    double signal = 0.0;
    /// Same at the decoy level.
    double decoy = 0.0;
    std::array<double, 4> signal_intensities{};
    std::array<double, 4> decoy_intensities{};
};

/// `decoy_fraction` sets MZI-1 to that relative transmission for the decoy
/// level.
IntensityImbalance intensity_imbalance(const CalibrationResult &result, const ChipParams &p,
                                       double decoy_fraction = 0.2);

/// max | |<z|x>|^2 - 1/2 | over Z states z and X states x of the model.
double mub_defect(const CalibrationResult &result, const ChipParams &p);

/// iteration,dphi2_rad,dphi3_rad,r_err,s1,s2,s3 rows.
void write_trajectory_csv(std::ostream &out, const std::vector<TrajectoryPoint> &trajectory);

}  // namespace qkdsim

#endif
