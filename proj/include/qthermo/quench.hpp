#pragma once

// Driven and squeezed oscillator
//
//   H = omega (a^dag a + 1/2) + eta a^dag + eta^* a + gamma a^dag^2 + gamma^* a^2
//
// diagonalized as H = O^dag H_d O with O = D(alpha) S(xi) and
// H_d = omega' (a^dag a + 1/2) + DeltaC, omega' = omega / cosh(2r).
//
// Relations (energies in units where hbar = 1):
//   r      = atanh(2|gamma|/omega) / 2
//   theta  = Gamma + pi
//   alpha  = (eta cosh r + eta^* e^{i theta} sinh r) / omega'
//   DeltaC = -omega' |alpha|^2
// These follow from requiring the a, a^dag, a^2, a^dag^2 coefficients of
// O H O^dag to vanish, and reduce to alpha = eta/omega, DeltaC = -|eta|^2/omega
// when gamma = 0.

#include <cmath>
#include <string>

#include "qthermo/error.hpp"
#include "qthermo/fock.hpp"
#include "qthermo/types.hpp"

namespace qthermo {

/// Largest accepted |gamma|/omega; the closed forms diverge at 1/2.
inline constexpr double max_squeeze_ratio = 0.5 - 1e-6;

struct QuenchSpec {
    double omega = 1.0;
    double eta_mag = 0.0;
    double eta_phase = 0.0;
    double gamma_mag = 0.0;
    double gamma_phase = 0.0;

    cplx eta() const { return std::polar(eta_mag, eta_phase); }
    cplx gamma() const { return std::polar(gamma_mag, gamma_phase); }

    void validate() const
    {
        auto finite = [](double v) { return std::isfinite(v); };
        if (!finite(omega) || !finite(eta_mag) || !finite(eta_phase) || !finite(gamma_mag)
            || !finite(gamma_phase))
            throw InvalidParameter("QuenchSpec: parameters must be finite");
        if (!(omega > 0.0))
            throw InvalidParameter("QuenchSpec: omega must be > 0");
        if (eta_mag < 0.0 || gamma_mag < 0.0)
            throw InvalidParameter("QuenchSpec: |eta| and |gamma| must be >= 0");
        if (gamma_mag / omega > max_squeeze_ratio)
            throw NotDiagonalizable("QuenchSpec: |gamma|/omega = " + std::to_string(gamma_mag / omega)
                                    + " outside [0, 1/2)");
    }

    friend bool operator==(const QuenchSpec&, const QuenchSpec&) = default;
};

class DiagonalizedHamiltonian {
public:
    double omega = 1.0;
    double alpha_mag = 0.0;
    double alpha_phase = 0.0; ///< A
    double theta = 0.0;
    double r = 0.0;

    double delta() const { return 1.0 / std::cosh(2.0 * r); }
    double omega_prime() const { return omega * delta(); }
    double delta_c() const { return -omega_prime() * alpha_mag * alpha_mag; }
    cplx alpha() const { return std::polar(alpha_mag, alpha_phase); }

    /// Energy of level n.
    double level(int n) const { return omega_prime() * (n + 0.5) + delta_c(); }

    /// ln Z of the infinite ladder, Z = e^{-beta(omega'/2 + DeltaC)} / (1 - e^{-beta omega'}).
    double log_partition(double beta) const
    {
        const double wp = omega_prime();
        return -beta * (0.5 * wp + delta_c()) - std::log1p(-std::exp(-beta * wp));
    }
};

inline double wrap_phase(double phi)
{
    double w = std::remainder(phi, 2.0 * pi);
    if (w <= -pi)
        w += 2.0 * pi;
    return w;
}

inline DiagonalizedHamiltonian diagonalize(const QuenchSpec& spec)
{
    spec.validate();
    DiagonalizedHamiltonian d;
    d.omega = spec.omega;
    d.r = 0.5 * std::atanh(2.0 * spec.gamma_mag / spec.omega);
    d.theta = wrap_phase(spec.gamma_phase + pi);

    const cplx eta = spec.eta();
    const cplx alpha = (eta * std::cosh(d.r) + std::conj(eta) * std::exp(I * d.theta) * std::sinh(d.r))
                       / d.omega_prime();
    d.alpha_mag = std::abs(alpha);
    d.alpha_phase = d.alpha_mag > 0.0 ? std::arg(alpha) : 0.0;
    return d;
}

inline RVector spectrum(const DiagonalizedHamiltonian& diag, int n_max)
{
    if (n_max < 1)
        throw InvalidDimension("spectrum: n_max must be >= 1");
    RVector e(n_max);
    for (int n = 0; n < n_max; ++n)
        e(n) = diag.level(n);
    return e;
}

/// Free-energy change between the thermal states of two Hamiltonians,
///   dF = (omega'_tau - omega'_0)/2 + (1/beta) ln[(1 - e^{-beta omega'_tau})/(1 - e^{-beta omega'_0})]
///        + DeltaC_tau - DeltaC_0,
/// which equals -(1/beta) ln(Z_tau/Z_0). Each term is a difference of
/// per-Hamiltonian values, so swapping the arguments negates the result exactly.
inline double free_energy_change(double beta, const DiagonalizedHamiltonian& initial,
                                 const DiagonalizedHamiltonian& final_)
{
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw InvalidParameter("free_energy_change: beta must be finite and > 0");
    auto zero_point = [](const DiagonalizedHamiltonian& d) { return 0.5 * d.omega_prime(); };
    auto log_term = [beta](const DiagonalizedHamiltonian& d) {
        return std::log1p(-std::exp(-beta * d.omega_prime())) / beta;
    };
    return (zero_point(final_) - zero_point(initial)) + (log_term(final_) - log_term(initial))
           + (final_.delta_c() - initial.delta_c());
}

/// Truncated matrix of H built directly from (eta, gamma).
inline CMatrix hamiltonian_matrix(const QuenchSpec& spec, int dim)
{
    spec.validate();
    const auto [a, adag] = ladder_operators(dim);
    const CMatrix& am = a.matrix();
    const CMatrix& ad = adag.matrix();
    const cplx eta = spec.eta();
    const cplx gamma = spec.gamma();
    CMatrix h = spec.omega * (ad * am + 0.5 * CMatrix::Identity(dim, dim));
    h += eta * ad + std::conj(eta) * am;
    h += gamma * (ad * ad) + std::conj(gamma) * (am * am);
    return h;
}

/// O = D(alpha) S(r, theta) for a diagonalized Hamiltonian.
inline FockOperator diagonalizing_unitary(const DiagonalizedHamiltonian& diag, int dim)
{
    if (diag.alpha_mag == 0.0)
        return squeezing_operator(diag.r, diag.theta, dim);
    if (diag.r == 0.0)
        return displacement_operator(diag.alpha(), dim);
    return displacement_operator(diag.alpha(), dim) * squeezing_operator(diag.r, diag.theta, dim);
}

/// O^dag H_d O on the truncated space; agrees with hamiltonian_matrix on a central block.
inline CMatrix rebuild_hamiltonian(const DiagonalizedHamiltonian& diag, int dim)
{
    const CMatrix o = diagonalizing_unitary(diag, dim).matrix();
    RVector levels = spectrum(diag, dim);
    return o.adjoint() * levels.cast<cplx>().asDiagonal() * o;
}

} // namespace qthermo
