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

// Jones/Stokes polarization algebra over the {H, V} basis.
//
// Stokes convention: s1 = |h|^2 - |v|^2, s2 = 2 Re(conj(h) v),
// s3 = 2 Im(conj(h) v). With it, |<a|b>|^2 = (1 + s(a).s(b)) / 2.

#ifndef QKDSIM_POLARIZATION_H
#define QKDSIM_POLARIZATION_H

#include <array>
#include <complex>

namespace qkdsim {

using Complex = std::complex<double>;

/// Raw (possibly un-normalized) two-component Jones amplitude.
struct JonesVector {
    Complex h{};
    Complex v{};

    double power() const {
        return std::norm(h) + std::norm(v);
    }
};

/// Normalized pure polarization state. Global phase carries no meaning;
/// compare states with `same_state`.
class PolarizationState {
   public:
    /// |H>.
    PolarizationState() = default;

    /// Normalizes the given amplitudes. Throws ContractError on a zero vector.
    PolarizationState(Complex h, Complex v);
    explicit PolarizationState(const JonesVector &raw) : PolarizationState(raw.h, raw.v) {
    }

    /// Wraps amplitudes without normalizing; used to exercise the
    /// normalization checks.
    static PolarizationState unchecked(Complex h, Complex v);

    static PolarizationState horizontal();
    static PolarizationState vertical();
    /// (|H> + e^{i chi}|V>)/sqrt2.
    static PolarizationState diagonal(double chi = 0.0);
    /// (|H> - e^{i chi}|V>)/sqrt2.
    static PolarizationState antidiagonal(double chi = 0.0);
    /// (|H> + i|V>)/sqrt2.
    static PolarizationState right_circular();

    Complex h() const {
        return h_;
    }
    Complex v() const {
        return v_;
    }
    JonesVector jones() const {
        return {h_, v_};
    }
    double norm_squared() const {
        return std::norm(h_) + std::norm(v_);
    }
    bool is_normalized(double tol = 1e-9) const;

    /// The state orthogonal to this one (unique up to global phase).
    PolarizationState orthogonal() const;

    /// Relative phase arg(v) - arg(h), i.e. chi for (|H> + e^{i chi}|V>)/sqrt2.
    double relative_phase() const;

   private:
    Complex h_{1.0, 0.0};
    Complex v_{0.0, 0.0};
};

struct StokesVector {
    double s1 = 0.0;
    double s2 = 0.0;
    double s3 = 0.0;

    double norm() const;
    double dot(const StokesVector &o) const {
        return s1 * o.s1 + s2 * o.s2 + s3 * o.s3;
    }
};

/// 2x2 complex matrix acting on Jones vectors. Row-major: m[0]=(0,0),
/// m[1]=(0,1), m[2]=(1,0), m[3]=(1,1).
class PolTransform {
   public:
    PolTransform() = default;  // identity
    PolTransform(Complex a, Complex b, Complex c, Complex d) : m_{a, b, c, d} {
    }

    static PolTransform identity() {
        return {};
    }
    static PolTransform diagonal(Complex a, Complex d) {
        return {a, 0.0, 0.0, d};
    }
    /// exp(-i angle/2 n.sigma): rotation by `angle` about unit Poincare axis
    /// (n1, n2, n3) in the Stokes convention above.
    static PolTransform rotation(double angle, double n1, double n2, double n3);

    Complex operator()(int row, int col) const {
        return m_[2 * row + col];
    }

    PolTransform operator*(const PolTransform &o) const;
    JonesVector operator*(const JonesVector &x) const;
    /// Applies the transform and renormalizes. Throws ContractError if the
    /// output vanishes.
    PolarizationState apply(const PolarizationState &s) const;

    PolTransform adjoint() const;
    /// max |(M^dagger M - I)_ij|.
    double unitarity_defect() const;
    /// Nearest unitary by Gram-Schmidt on the columns.
    PolTransform reorthonormalized() const;
    /// Largest and smallest singular values.
    std::array<double, 2> singular_values() const;

   private:
    std::array<Complex, 4> m_{1.0, 0.0, 0.0, 1.0};
};

/// |<a|b>|^2. Throws ContractError unless both inputs are normalized.
double fidelity(const PolarizationState &a, const PolarizationState &b);

/// 1 - |<target|prepared>|^2. With target |V> this is |<H|prepared>|^2.
double error_rate(const PolarizationState &prepared, const PolarizationState &target);

StokesVector to_stokes(const PolarizationState &s);

/// Fidelity 1 within tol.
bool same_state(const PolarizationState &a, const PolarizationState &b, double tol = 1e-10);

}  // namespace qkdsim

#endif
