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

#include "qkdsim/finitekey.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "qkdsim/errors.h"

namespace qkdsim {

namespace {

const double kGoldenRatio = 0.5 * (std::sqrt(5.0) - 1.0);

double gamma_term(double a, double b, double c, double d) {
    double bb = (1.0 - b) * b;
    double inner = (c + d) / (c * d * bb) * (19.0 * 19.0) / (a * a);
    return std::sqrt((c + d) * bb / (c * d * std::log(2.0)) * std::log2(inner));
}

class SkrObjective {
   public:
    SkrObjective(const LinkParams &lp, const ChipParams &chip, const CalibrationResult &cal,
                 const SecurityParams &sp, const ProtocolParams &start)
        : lp_(lp), sp_(sp) {
        base_ = make_pulse_model(lp, alice_states(cal, chip), PolTransform::identity(), ideal_epc(cal.chi),
                                 start.mean_mu());
    }

    OptimizedPoint evaluate(const ProtocolParams &pp) const {
        PulseModel model = base_;
        model.eta_det = operating_efficiency(lp_, pp.mean_mu());
        model.eta = transmission_to_detectors(lp_) * model.eta_det;
        OptimizedPoint out;
        out.params = pp;
        out.counts = expected_statistics(pp, model);
        out.result = secret_length(out.counts, pp, sp_);
        return out;
    }

   private:
    LinkParams lp_;
    SecurityParams sp_;
    PulseModel base_;
};

double &coordinate(ProtocolParams &pp, int i) {
    switch (i) {
        case 0:
            return pp.mu1;
        case 1:
            return pp.mu2;
        case 2:
            return pp.p_mu1;
        default:
            return pp.pz_alice;
    }
}

}  // namespace

void SecurityParams::validate() const {
    if (!(eps_sec > 0.0 && eps_sec < 1.0) || !(eps_cor > 0.0 && eps_cor < 1.0)) {
        throw ConfigError("security: eps values must lie in (0, 1)");
    }
    if (!(f_ec >= 1.0)) {
        throw ConfigError("security.f_ec must be >= 1");
    }
}

double binary_entropy(double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw ContractError("binary_entropy: argument must lie in [0, 1]");
    }
    if (p == 0.0 || p == 1.0) {
        return 0.0;
    }
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double tau_n(int n, const ProtocolParams &pp) {
    if (n < 0) {
        throw ContractError("tau_n: photon number must be non-negative");
    }
    double t = 0.0;
    for (int k = 0; k < 2; ++k) {
        double mu = pp.mu(k);
        double term;
        if (mu == 0.0) {
            term = n == 0 ? 1.0 : 0.0;
        } else {
            term = std::exp(-mu + n * std::log(mu) - std::lgamma(n + 1.0));
        }
        t += pp.p_mu(k) * term;
    }
    return t;
}

SecretLengthResult secret_length(const ObservedCounts &oc, const ProtocolParams &pp, const SecurityParams &sp,
                                 bool asymptotic) {
    pp.validate();
    sp.validate();
    oc.check();
    SecretLengthResult r;
    r.asymptotic = asymptotic;
    const double mu1 = pp.mu1;
    const double mu2 = pp.mu2;
    const double log_term = std::log(19.0 / sp.eps_sec);
    auto dev = [&](double x) { return asymptotic ? 0.0 : std::sqrt(0.5 * x * log_term); };

    for (int b = 0; b < 2; ++b) {
        double dn = dev(oc.n_basis(b));
        double dm = dev(oc.m_basis(b));
        for (int k = 0; k < 2; ++k) {
            double w = std::exp(pp.mu(k)) / pp.p_mu(k);
            r.n_plus[b][k] = w * (oc.n[b][k] + dn);
            r.n_minus[b][k] = w * (oc.n[b][k] - dn);
            r.m_plus[b][k] = w * (oc.m[b][k] + dm);
            r.m_minus[b][k] = w * (oc.m[b][k] - dm);
        }
    }
    r.tau0 = tau_n(0, pp);
    r.tau1 = tau_n(1, pp);

    auto vacuum_upper = [&](int b) { return 2.0 * r.tau0 * r.m_plus[b][1]; };
    auto single_lower = [&](int b, double s0u, const char *name) {
        double v = r.tau1 * mu1 *
                   (r.n_minus[b][1] - (mu2 * mu2) / (mu1 * mu1) * r.n_plus[b][0] -
                    (mu1 * mu1 - mu2 * mu2) / (mu1 * mu1) * s0u / r.tau0) /
                   (mu2 * (mu1 - mu2));
        if (v < 0.0) {
            r.flags.push_back(std::string(name) + " clamped to 0");
            v = 0.0;
        }
        return v;
    };

    r.s_z0_u = vacuum_upper(kBasisZ);
    r.s_x0_u = vacuum_upper(kBasisX);
    r.s_z0_l = r.tau0 * (mu1 * r.n_minus[kBasisZ][1] - mu2 * r.n_plus[kBasisZ][0]) / (mu1 - mu2);
    if (r.s_z0_l < 0.0) {
        r.flags.push_back("s_z0_l clamped to 0");
        r.s_z0_l = 0.0;
    }
    r.s_z1_l = single_lower(kBasisZ, r.s_z0_u, "s_z1_l");
    r.s_x1_l = single_lower(kBasisX, r.s_x0_u, "s_x1_l");
    r.v_x1 = r.tau1 * (r.m_plus[kBasisX][0] - r.m_minus[kBasisX][1]) / (mu1 - mu2);
    if (r.v_x1 < 0.0) {
        r.flags.push_back("v_x1 clamped to 0");
        r.v_x1 = 0.0;
    }

    double nz = oc.n_basis(kBasisZ);
    double nx = oc.n_basis(kBasisX);
    r.qber_z = nz > 0.0 ? oc.m_basis(kBasisZ) / nz : 0.0;
    r.qber_x = nx > 0.0 ? oc.m_basis(kBasisX) / nx : 0.0;

    if (r.s_x1_l > 0.0 && r.s_z1_l > 0.0) {
        r.e_x1 = r.v_x1 / r.s_x1_l;
        if (!asymptotic && r.e_x1 < 0.5) {
            double b = r.e_x1;
            if (b <= 0.0) {
                r.flags.push_back("gamma evaluated at vanishing error rate");
                b = 1e-300;
            }
            r.gamma = gamma_term(sp.eps_sec, b, r.s_z1_l, r.s_x1_l);
        }
        r.phi_z_u = r.e_x1 + r.gamma;
        if (r.phi_z_u > 0.5) {
            r.flags.push_back("phi_z_u clamped to 0.5");
            r.phi_z_u = 0.5;
        }
    } else {
        r.flags.push_back("no single-photon estimate; phi_z_u set to 0.5");
        r.phi_z_u = 0.5;
    }

    r.lambda_ec = sp.f_ec * nz * binary_entropy(std::min(r.qber_z, 1.0));
    double penalty = asymptotic ? 0.0 : 6.0 * std::log2(19.0 / sp.eps_sec) + std::log2(2.0 / sp.eps_cor);
    r.l_raw = r.s_z0_l + r.s_z1_l * (1.0 - binary_entropy(r.phi_z_u)) - r.lambda_ec - penalty;
    r.l = std::max(0.0, std::floor(r.l_raw));
    r.skr_bps = oc.duration_s > 0.0 ? r.l / oc.duration_s : 0.0;
    return r;
}

void SearchSpace::validate() const {
    for (const auto *b : {&mu1, &mu2, &p_mu1, &pz_alice}) {
        if (!((*b)[0] <= (*b)[1])) {
            throw ConfigError("search space bounds inverted");
        }
    }
    if (!(mu2[0] >= 0.0) || !(mu2[0] < mu1[1])) {
        throw ConfigError("search space has no point with 0 <= mu2 < mu1");
    }
    if (!(p_mu1[0] > 0.0 && p_mu1[1] < 1.0) || !(pz_alice[0] > 0.0 && pz_alice[1] < 1.0)) {
        throw ConfigError("search space probabilities must lie in (0, 1)");
    }
}

OptimizedPoint optimize_params(const LinkParams &lp, const ChipParams &chip, const CalibrationResult &cal,
                               const SecurityParams &sp, const SearchSpace &space, const ProtocolParams &start) {
    space.validate();
    const std::array<const std::array<double, 2> *, 4> box{&space.mu1, &space.mu2, &space.p_mu1, &space.pz_alice};
    ProtocolParams cur = start;
    for (int i = 0; i < 4; ++i) {
        coordinate(cur, i) = std::clamp(coordinate(cur, i), (*box[i])[0], (*box[i])[1]);
    }
    if (!(cur.mu2 < cur.mu1)) {
        cur.mu1 = space.mu1[1];
        cur.mu2 = space.mu2[0];
    }
    SkrObjective objective(lp, chip, cal, sp, cur);
    OptimizedPoint best = objective.evaluate(cur);

    const double gap = 1e-4;
    auto try_value = [&](int i, double x) {
        ProtocolParams pp = best.params;
        coordinate(pp, i) = x;
        if (!(pp.mu2 < pp.mu1)) {
            return -1.0;
        }
        OptimizedPoint p = objective.evaluate(pp);
        if (p.result.skr_bps > best.result.skr_bps) {
            best = p;
        }
        return p.result.skr_bps;
    };

    for (int round = 0; round < 3; ++round) {
        for (int i = 0; i < 4; ++i) {
            double lo = (*box[i])[0];
            double hi = (*box[i])[1];
            if (i == 0) {
                lo = std::max(lo, best.params.mu2 + gap);
            } else if (i == 1) {
                hi = std::min(hi, best.params.mu1 - gap);
            }
            if (!(lo <= hi)) {
                continue;
            }
            const int scan = 9;
            double step = (hi - lo) / (scan - 1);
            int arg = -1;
            double top = -1.0;
            for (int s = 0; s < scan; ++s) {
                double v = try_value(i, lo + s * step);
                if (v > top) {
                    top = v;
                    arg = s;
                }
            }
            if (step == 0.0 || arg < 0) {
                continue;
            }
            double a = lo + std::max(0, arg - 1) * step;
            double b = lo + std::min(scan - 1, arg + 1) * step;
            double c = b - kGoldenRatio * (b - a);
            double d = a + kGoldenRatio * (b - a);
            double fc = try_value(i, c);
            double fd = try_value(i, d);
            for (int e = 0; e < 20; ++e) {
                if (fc >= fd) {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - kGoldenRatio * (b - a);
                    fc = try_value(i, c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + kGoldenRatio * (b - a);
                    fd = try_value(i, d);
                }
            }
        }
    }
    return best;
}

std::vector<SkrPoint> skr_vs_distance(const std::vector<double> &distances_km, const LinkParams &lp,
                                      const ChipParams &chip, const CalibrationResult &cal,
                                      const SecurityParams &sp, const SearchSpace &space,
                                      const ProtocolParams &start, bool optimize) {
    std::vector<SkrPoint> curve;
    for (double km : distances_km) {
        LinkParams l = lp;
        l.length_km = km;
        l.validate();
        OptimizedPoint p = optimize ? optimize_params(l, chip, cal, sp, space, start)
                                    : SkrObjective(l, chip, cal, sp, start).evaluate(start);
        SkrPoint row;
        row.distance_km = km;
        row.skr_bps = p.result.skr_bps;
        row.qber_z = p.result.qber_z;
        row.qber_x = p.result.qber_x;
        row.params = p.params;
        row.l = p.result.l;
        curve.push_back(row);
    }
    return curve;
}

void write_skr_csv(std::ostream &out, const std::vector<SkrPoint> &curve) {
    out << "distance_km,skr_bps,qber_z,qber_x,mu1,mu2,p_mu1,pz_alice,l,block_pulses\n";
    char buf[512];
    for (const auto &r : curve) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%lld\n",
                      r.distance_km, r.skr_bps, r.qber_z, r.qber_x, r.params.mu1, r.params.mu2, r.params.p_mu1,
                      r.params.pz_alice, r.l, static_cast<long long>(r.params.block_pulses));
        out << buf;
    }
}

}  // namespace qkdsim
