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

#include "qkdsim/link.h"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>

#include "qkdsim/errors.h"

namespace qkdsim {

namespace {

constexpr double kFwhmPerSigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)
const double kSqrt2Pi = std::sqrt(2.0 * 3.14159265358979323846);

double gaussian_q(double x) {
    return 0.5 * std::erfc(x / std::sqrt(2.0));
}

double db_fraction(double db) {
    return std::pow(10.0, -db / 10.0);
}

template <class F>
double integrate(F f, double lo, double hi) {
    if (!(hi > lo)) {
        return 0.0;
    }
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-13);
}

struct JitterDensity {
    double sigma;
    double k;
    double norm;

    explicit JitterDensity(const JitterShape &s) : sigma(s.sigma_ps), k(s.k) {
        if (std::isinf(k)) {
            norm = sigma * kSqrt2Pi;
        } else {
            norm = sigma * kSqrt2Pi * (1.0 - 2.0 * gaussian_q(k)) + 2.0 * (sigma / k) * std::exp(-0.5 * k * k);
        }
    }
    double operator()(double x) const {
        double u = std::abs(x) / sigma;
        if (u <= k) {
            return std::exp(-0.5 * u * u) / norm;
        }
        return std::exp(0.5 * k * k - k * u) / norm;
    }
    double core_edge() const {
        return std::isinf(k) ? std::numeric_limits<double>::infinity() : k * sigma;
    }
};

}  // namespace

void DetectorParams::validate() const {
    if (eff_curve.empty()) {
        throw ConfigError("detector.eff_curve must have at least one point");
    }
    for (size_t i = 0; i < eff_curve.size(); ++i) {
        auto [r, e] = eff_curve[i];
        if (!(r > 0.0) || !(e > 0.0 && e <= 1.0)) {
            throw ConfigError("detector.eff_curve needs rates > 0 and efficiencies in (0, 1]");
        }
        if (i > 0 && (!(r > eff_curve[i - 1].first) || e > eff_curve[i - 1].second)) {
            throw ConfigError("detector.eff_curve must be ascending in rate and non-increasing in efficiency");
        }
    }
    if (!(dark_rate_hz >= 0.0) || !(laser_fwhm_ps >= 0.0) || !(laser_jitter_rms_ps >= 0.0)) {
        throw ConfigError("detector rates and laser widths must be non-negative");
    }
    if (!(jitter_fwhm_ps > 0.0)) {
        throw ConfigError("detector.jitter_fwhm_ps must be positive");
    }
    if (!(jitter_fw1pm_ps >= jitter_fwhm_ps)) {
        throw ConfigError("detector.jitter_fw1pm_ps must be >= jitter_fwhm_ps");
    }
}

void LinkParams::validate() const {
    if (!(length_km >= 0.0) || !(atten_db_per_km >= 0.0) || !(drift_rate >= 0.0) || !(pbs_er_db >= 0.0) ||
        !(bob_loss_db >= 0.0)) {
        throw ConfigError("link lengths, attenuations and rates must be non-negative");
    }
    if (!(basis_split > 0.0 && basis_split < 1.0)) {
        throw ConfigError("link.basis_split must lie in (0, 1)");
    }
    if (!(rep_rate_hz > 0.0)) {
        throw ConfigError("link.rep_rate_hz must be positive");
    }
    detector.validate();
}

double channel_transmittance(const LinkParams &lp) {
    return db_fraction(lp.atten_db_per_km * lp.length_km);
}

ChannelState drift_step(const ChannelState &cs, double drift_rate, double dt_s, std::mt19937_64 &rng) {
    if (!(dt_s > 0.0)) {
        throw ContractError("drift_step: dt must be positive");
    }
    ChannelState out = cs;
    out.elapsed_s += dt_s;
    if (drift_rate == 0.0) {
        return out;
    }
    std::normal_distribution<double> n01(0.0, 1.0);
    double angle = drift_rate * std::sqrt(dt_s) * n01(rng);
    double x = n01(rng), y = n01(rng), z = n01(rng);
    double r = std::sqrt(x * x + y * y + z * z);
    PolTransform step = PolTransform::rotation(angle, x / r, y / r, z / r);
    out.birefringence = (step * cs.birefringence).reorthonormalized();
    return out;
}

double detector_efficiency(double rate_hz, const DetectorParams &dp) {
    if (!(rate_hz >= 0.0)) {
        throw ContractError("detector_efficiency: rate must be non-negative");
    }
    const auto &c = dp.eff_curve;
    if (rate_hz <= c.front().first) {
        return c.front().second;
    }
    if (rate_hz >= c.back().first) {
        return c.back().second;
    }
    auto hi = std::upper_bound(c.begin(), c.end(), rate_hz,
                               [](double r, const std::pair<double, double> &pt) { return r < pt.first; });
    auto lo = hi - 1;
    double t = std::log(rate_hz / lo->first) / std::log(hi->first / lo->first);
    return lo->second + t * (hi->second - lo->second);
}

JitterShape jitter_shape(const DetectorParams &dp) {
    dp.validate();
    JitterShape s;
    s.sigma_ps = dp.jitter_fwhm_ps / kFwhmPerSigma;
    double sl = dp.laser_fwhm_ps / kFwhmPerSigma;
    s.sigma_laser_ps = std::sqrt(sl * sl + dp.laser_jitter_rms_ps * dp.laser_jitter_rms_ps);
    if (!dp.jitter_tails) {
        s.k = std::numeric_limits<double>::infinity();
        return s;
    }
    // Half-width at 1% maximum in core units; the exponential tail reaches
    // 0.01 there: k^2/2 - k x = ln 0.01.
    double x = dp.jitter_fw1pm_ps / (2.0 * s.sigma_ps);
    double disc = x * x + 2.0 * std::log(0.01);
    if (disc < 0.0) {
        throw ConfigError("detector.jitter_fw1pm_ps is narrower than a Gaussian of the given FWHM");
    }
    s.k = x - std::sqrt(disc);
    double half = std::sqrt(2.0 * std::log(2.0));
    if (s.k < half) {
        throw ConfigError("detector jitter tail would change the FWHM; widen jitter_fwhm_ps or narrow jitter_fw1pm_ps");
    }
    return s;
}

double timing_tail_probability(const JitterShape &shape, double a) {
    if (std::isinf(a)) {
        return 0.0;
    }
    if (!(a >= 0.0)) {
        throw ContractError("timing_tail_probability: threshold must be non-negative");
    }
    JitterDensity f(shape);
    const double edge = f.core_edge();
    const double se = shape.sigma_laser_ps;
    const double inf = std::numeric_limits<double>::infinity();

    if (se == 0.0) {
        // 2 * integral of the density beyond a.
        double mass = 0.0;
        if (a < edge) {
            mass += integrate(f, a, edge);
        }
        if (!std::isinf(edge)) {
            mass += integrate(f, std::max(a, edge), inf);
        }
        return 2.0 * mass;
    }

    auto g = [&](double x) {
        return f(x) * (gaussian_q((a - x) / se) + gaussian_q((a + x) / se));
    };
    // Break points: end of the core, the threshold, and the Gaussian reach.
    std::vector<double> cuts{0.0};
    for (double c : {edge, a - 8.0 * se, a, a + 8.0 * se, 12.0 * shape.sigma_ps}) {
        if (c > 0.0 && c < inf) {
            cuts.push_back(c);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    double sum = 0.0;
    for (size_t i = 0; i + 1 < cuts.size(); ++i) {
        sum += integrate(g, cuts[i], cuts[i + 1]);
    }
    sum += integrate(g, cuts.back(), inf);
    return 2.0 * sum;
}

CrosstalkProbs timing_crosstalk(const DetectorParams &dp, double bin_period_ps) {
    if (!(bin_period_ps > 0.0)) {
        throw ContractError("timing_crosstalk: bin period must be positive");
    }
    if (std::isinf(bin_period_ps)) {
        return {};
    }
    JitterShape s = jitter_shape(dp);
    double outside = timing_tail_probability(s, 0.5 * bin_period_ps);
    double beyond = timing_tail_probability(s, 1.5 * bin_period_ps);
    return {std::max(0.0, outside - beyond), beyond};
}

double pbs_leakage(double er_db) {
    if (std::isinf(er_db)) {
        return 0.0;
    }
    double r = db_fraction(er_db);
    return r / (1.0 + r);
}

PolTransform ideal_epc(double chi) {
    return PolTransform::diagonal(1.0, std::polar(1.0, -chi));
}

std::array<double, 4> projection_probs(const PolarizationState &s, const PolTransform &channel,
                                       const PolTransform &epc, const LinkParams &lp) {
    JonesVector out = (epc * channel) * s.jones();
    double norm = out.power();
    double ph = std::norm(out.h) / norm;
    Complex d = (out.h + out.v) / std::sqrt(2.0);
    double pd = std::norm(d) / norm;
    double leak = pbs_leakage(lp.pbs_er_db);
    double z_h = (1.0 - leak) * ph + leak * (1.0 - ph);
    double x_d = (1.0 - leak) * pd + leak * (1.0 - pd);
    double bz = lp.basis_split;
    double bx = 1.0 - bz;
    return {bz * z_h, bz * (1.0 - z_h), bx * x_d, bx * (1.0 - x_d)};
}

double transmission_to_detectors(const LinkParams &lp) {
    return channel_transmittance(lp) * db_fraction(lp.bob_loss_db);
}

std::array<double, 4> receiver_click_probs(const PolarizationState &s, const ChannelState &cs,
                                           const PolTransform &epc, const LinkParams &lp, double mu,
                                           double eta_det) {
    if (!(mu >= 0.0)) {
        throw ContractError("receiver_click_probs: mu must be non-negative");
    }
    auto p = projection_probs(s, cs.birefringence, epc, lp);
    double eta = transmission_to_detectors(lp) * eta_det;
    double dark = lp.detector.dark_rate_hz * lp.bin_period_s();
    std::array<double, 4> c{};
    for (int i = 0; i < 4; ++i) {
        double lambda = mu * eta * p[i];
        c[i] = -std::expm1(-lambda) + dark * std::exp(-lambda);
    }
    return c;
}

double operating_efficiency(const LinkParams &lp, double mean_mu) {
    // Busiest channel: half of the larger basis share.
    double share = 0.5 * std::max(lp.basis_split, 1.0 - lp.basis_split);
    double photons = lp.rep_rate_hz * mean_mu * transmission_to_detectors(lp) * share;
    double eta = lp.detector.eff_curve.front().second;
    for (int i = 0; i < 100; ++i) {
        double next = detector_efficiency(photons * eta + lp.detector.dark_rate_hz, lp.detector);
        if (std::abs(next - eta) < 1e-15) {
            break;
        }
        eta = next;
    }
    return eta;
}

}  // namespace qkdsim
