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

// Receiver polarization compensation.
//
// The EPC is four wave plates with axes 0, 45, 0, 45 degrees (Poincare axes
// s1, s2, s1, s2) and retardance equal to the control value in radians.
// SPGD perturbs all four controls at once with random signs and steps
// against the measured objective difference.

#ifndef QKDSIM_SPGD_H
#define QKDSIM_SPGD_H

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <utility>
#include <vector>

#include "qkdsim/link.h"

namespace qkdsim {

using EpcVoltages = std::array<double, 4>;

/// Plate 1 acts first: M = P4 P3 P2 P1.
PolTransform epc_transform(const EpcVoltages &v);

struct SpgdParams {
    double gain = 1.0;
    double perturbation = 0.05;
    /// Controls are clamped to [-range, range].
    double range = 4.0 * 3.14159265358979323846;
    /// Detections per objective estimate; <= 0 evaluates J exactly.
    double probe_budget = 1e4;
    /// Throws ConfigError.
    void validate() const;
};

struct SpgdController {
    EpcVoltages voltages{};
    SpgdParams params;
    /// (step, J) with J the mean of J+ and J-.
    std::vector<std::pair<long, double>> history;
    long steps = 0;
};

using Objective = std::function<double(const EpcVoltages &)>;

/// One two-sided SPGD update: v <- v - gain (J+ - J-) delta.
void spgd_step(SpgdController &c, const Objective &objective, std::mt19937_64 &rng);

/// Wrong-detector fraction of a matched-basis measurement of each reference
/// state (H, V, +, - order), PBS leakage included, averaged over the four.
double misalignment(const std::array<PolarizationState, 4> &refs, const PolTransform &channel,
                    const EpcVoltages &v, double pbs_er_db);

/// Objective in percent: misalignment estimated from `budget` detections
/// split evenly over the reference states (binomial), exact if budget <= 0.
double qber_proxy_percent(const std::array<PolarizationState, 4> &refs, const PolTransform &channel,
                          const EpcVoltages &v, double pbs_er_db, double budget, std::mt19937_64 &rng);

struct CompensationSample {
    double t_s = 0.0;
    /// Exact misalignment at the controller's current setting.
    double qber_proxy = 0.0;
    EpcVoltages voltages{};
};

struct CompensationSeeds {
    std::uint64_t drift = 1;
    std::uint64_t perturbation = 2;
    std::uint64_t probe = 3;
};

/// Alternates drift_step and spgd_step for duration_s / dt_s steps.
/// The channel state is advanced in place.
std::vector<CompensationSample> run_compensation(const LinkParams &lp, const std::array<PolarizationState, 4> &refs,
                                                 SpgdController &controller, ChannelState &channel,
                                                 double duration_s, double dt_s, const CompensationSeeds &seeds);

/// Stateful form used by block simulations: one drift step plus one SPGD
/// step per call.
class Compensator {
   public:
    Compensator(const LinkParams &lp, std::array<PolarizationState, 4> refs, SpgdController controller,
                const CompensationSeeds &seeds);
    /// Advances by dt and returns the exact misalignment after the update.
    double advance(double dt_s);
    const ChannelState &channel() const {
        return channel_;
    }
    const SpgdController &controller() const {
        return controller_;
    }
    PolTransform epc() const {
        return epc_transform(controller_.voltages);
    }

   private:
    LinkParams lp_;
    std::array<PolarizationState, 4> refs_;
    SpgdController controller_;
    ChannelState channel_;
    std::mt19937_64 drift_rng_;
    std::mt19937_64 pert_rng_;
    std::mt19937_64 probe_rng_;
};

/// t_s,qber_proxy,v1,v2,v3,v4.
void write_trace_csv(std::ostream &out, const std::vector<CompensationSample> &trace);

}  // namespace qkdsim

#endif
