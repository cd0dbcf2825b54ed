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

#include "qkdsim/polarization.h"

#include <algorithm>
#include <cmath>

#include "qkdsim/errors.h"

namespace qkdsim {

namespace {

constexpr double kNormTolerance = 1e-9;
const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

void require_normalized(const PolarizationState &s, const char *what) {
    if (!s.is_normalized(kNormTolerance)) {
        throw ContractError(std::string(what) + ": state is not normalized (|h|^2+|v|^2 = " +
                            std::to_string(s.norm_squared()) + ")");
    }
}

}  // namespace

PolarizationState::PolarizationState(Complex h, Complex v) {
    double n = std::sqrt(std::norm(h) + std::norm(v));
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw ContractError("PolarizationState: cannot normalize a zero or non-finite amplitude vector");
    }
    h_ = h / n;
    v_ = v / n;
}

PolarizationState PolarizationState::unchecked(Complex h, Complex v) {
    PolarizationState s;
    s.h_ = h;
    s.v_ = v;
    return s;
}

PolarizationState PolarizationState::horizontal() {
    return unchecked(1.0, 0.0);
}

PolarizationState PolarizationState::vertical() {
    return unchecked(0.0, 1.0);
}

PolarizationState PolarizationState::diagonal(double chi) {
    return unchecked(kInvSqrt2, kInvSqrt2 * std::polar(1.0, chi));
}

PolarizationState PolarizationState::antidiagonal(double chi) {
    return unchecked(kInvSqrt2, -kInvSqrt2 * std::polar(1.0, chi));
}

PolarizationState PolarizationState::right_circular() {
    return unchecked(kInvSqrt2, Complex(0.0, kInvSqrt2));
}

bool PolarizationState::is_normalized(double tol) const {
    return std::abs(norm_squared() - 1.0) <= tol;
}

PolarizationState PolarizationState::orthogonal() const {
    return unchecked(-std::conj(v_), std::conj(h_));
}

double PolarizationState::relative_phase() const {
    return std::arg(v_) - std::arg(h_);
}

double StokesVector::norm() const {
    return std::sqrt(s1 * s1 + s2 * s2 + s3 * s3);
}

PolTransform PolTransform::rotation(double angle, double n1, double n2, double n3) {
    // Generators matched to the Stokes convention: s1 <-> sigma_z,
    // s2 <-> sigma_x, s3 <-> sigma_y.
    double c = std::cos(angle / 2.0);
    double s = std::sin(angle / 2.0);
    Complex i(0.0, 1.0);
    return {c - i * s * n1, -i * s * n2 - s * n3, -i * s * n2 + s * n3, c + i * s * n1};
}

PolTransform PolTransform::operator*(const PolTransform &o) const {
    const auto &a = m_;
    const auto &b = o.m_;
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3]};
}

JonesVector PolTransform::operator*(const JonesVector &x) const {
    return {m_[0] * x.h + m_[1] * x.v, m_[2] * x.h + m_[3] * x.v};
}

PolarizationState PolTransform::apply(const PolarizationState &s) const {
    return PolarizationState(*this * s.jones());
}

PolTransform PolTransform::adjoint() const {
    return {std::conj(m_[0]), std::conj(m_[2]), std::conj(m_[1]), std::conj(m_[3])};
}

double PolTransform::unitarity_defect() const {
    PolTransform p = adjoint() * *this;
    double d = 0.0;
    d = std::max(d, std::abs(p.m_[0] - 1.0));
    d = std::max(d, std::abs(p.m_[1]));
    d = std::max(d, std::abs(p.m_[2]));
    d = std::max(d, std::abs(p.m_[3] - 1.0));
    return d;
}

PolTransform PolTransform::reorthonormalized() const {
    Complex c0h = m_[0], c0v = m_[2];
    double n0 = std::sqrt(std::norm(c0h) + std::norm(c0v));
    c0h /= n0;
    c0v /= n0;
    Complex c1h = m_[1], c1v = m_[3];
    Complex proj = std::conj(c0h) * c1h + std::conj(c0v) * c1v;
    c1h -= proj * c0h;
    c1v -= proj * c0v;
    double n1 = std::sqrt(std::norm(c1h) + std::norm(c1v));
    c1h /= n1;
    c1v /= n1;
    return {c0h, c1h, c0v, c1v};
}

std::array<double, 2> PolTransform::singular_values() const {
    // Eigenvalues of the Hermitian M^dagger M.
    PolTransform p = adjoint() * *this;
    double a = p.m_[0].real();
    double d = p.m_[3].real();
    double b2 = std::norm(p.m_[1]);
    double mean = 0.5 * (a + d);
    double disc = std::sqrt(0.25 * (a - d) * (a - d) + b2);
    return {std::sqrt(mean + disc), std::sqrt(std::max(0.0, mean - disc))};
}

double fidelity(const PolarizationState &a, const PolarizationState &b) {
    require_normalized(a, "fidelity");
    require_normalized(b, "fidelity");
    Complex overlap = std::conj(a.h()) * b.h() + std::conj(a.v()) * b.v();
    return std::clamp(std::norm(overlap), 0.0, 1.0);
}

double error_rate(const PolarizationState &prepared, const PolarizationState &target) {
    return 1.0 - fidelity(prepared, target);
}

StokesVector to_stokes(const PolarizationState &s) {
    require_normalized(s, "to_stokes");
    Complex cross = std::conj(s.h()) * s.v();
    return {std::norm(s.h()) - std::norm(s.v()), 2.0 * cross.real(), 2.0 * cross.imag()};
}

bool same_state(const PolarizationState &a, const PolarizationState &b, double tol) {
    return fidelity(a, b) >= 1.0 - tol;
}

}  // namespace qkdsim
