#pragma once

// Two-point measurement (TPM) protocol for sudden quenches of the driven and
// squeezed oscillator: transition probabilities, work statistics, fluctuation
// theorems and entropy production.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qthermo/error.hpp"
#include "qthermo/fock.hpp"
#include "qthermo/quench.hpp"
#include "qthermo/types.hpp"

namespace qthermo {

inline constexpr double default_grouping_tol = 1e-9;

struct WorkAtom {
    double work;
    double probability;
};

/// Discrete work distribution. Atoms are sorted by work value and pairwise
/// separated by more than the grouping tolerance.
class WorkDistribution {
public:
    WorkDistribution() = default;

    /// Sorts raw (work, probability) pairs and merges values closer than
    /// `grouping_tol` to the first member of their group. Atoms with exactly
    /// zero probability are dropped.
    static WorkDistribution merge(std::vector<WorkAtom> raw, double grouping_tol = default_grouping_tol)
    {
        if (!(grouping_tol >= 0.0))
            throw InvalidParameter("WorkDistribution: grouping_tol must be >= 0");
        for (const auto& a : raw) {
            if (!std::isfinite(a.work) || !std::isfinite(a.probability))
                throw InvalidParameter("WorkDistribution: non-finite atom");
            if (a.probability < 0.0)
                throw InvalidParameter("WorkDistribution: negative probability");
        }
        std::erase_if(raw, [](const WorkAtom& a) { return a.probability == 0.0; });
        std::sort(raw.begin(), raw.end(), [](const WorkAtom& x, const WorkAtom& y) {
            return x.work < y.work;
        });

        WorkDistribution out;
        out.tol_ = grouping_tol;
        for (const auto& a : raw) {
            if (!out.atoms_.empty() && a.work - out.atoms_.back().work <= grouping_tol)
                out.atoms_.back().probability += a.probability;
            else
                out.atoms_.push_back(a);
        }
        return out;
    }

    const std::vector<WorkAtom>& atoms() const noexcept { return atoms_; }
    double grouping_tol() const noexcept { return tol_; }
    std::size_t size() const noexcept { return atoms_.size(); }

    double total_probability() const
    {
        double s = 0.0;
        for (const auto& a : atoms_)
            s += a.probability;
        return s;
    }

    double moment(int order) const
    {
        double s = 0.0;
        for (const auto& a : atoms_)
            s += a.probability * std::pow(a.work, order);
        return s;
    }

    double mean() const { return moment(1); }

    double variance() const
    {
        const double m = mean();
        double s = 0.0;
        for (const auto& a : atoms_)
            s += a.probability * (a.work - m) * (a.work - m);
        return s;
    }

    /// sum_k p_k exp(-beta (w_k - shift)).
    double exp_average(double beta, double shift = 0.0) const
    {
        double s = 0.0;
        for (const auto& a : atoms_)
            s += a.probability * std::exp(-beta * (a.work - shift));
        return s;
    }

    /// Probability mass strictly below `threshold`.
    double mass_below(double threshold) const
    {
        double s = 0.0;
        for (const auto& a : atoms_)
            if (a.work < threshold)
                s += a.probability;
        return s;
    }

    /// Probability of the atom closest to `work` within the grouping
    /// tolerance (0 if none).
    double probability_at(double work, double tol = -1.0) const
    {
        const double t = tol < 0.0 ? std::max(tol_, 1e-12) : tol;
        auto it = std::lower_bound(atoms_.begin(), atoms_.end(), work - t,
                                   [](const WorkAtom& a, double w) { return a.work < w; });
        double best = 0.0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (; it != atoms_.end() && it->work <= work + t; ++it) {
            const double d = std::abs(it->work - work);
            if (d < best_dist) {
                best_dist = d;
                best = it->probability;
            }
        }
        return best;
    }

private:
    std::vector<WorkAtom> atoms_;
    double tol_ = default_grouping_tol;
};

/// c_{m,n} = <m| D(alpha_tau) S(xi_tau) S^dag(xi_0) D^dag(alpha_0) |n>.
/// Columns n < dim/2 are trustworthy; identical Hamiltonians give the exact identity.
inline CMatrix quench_unitary(const DiagonalizedHamiltonian& initial, const DiagonalizedHamiltonian& final_,
                              int dim)
{
    require_dim(dim);
    const bool same = initial.omega == final_.omega && initial.alpha_mag == final_.alpha_mag
                      && initial.alpha_phase == final_.alpha_phase && initial.theta == final_.theta
                      && initial.r == final_.r;
    if (same)
        return CMatrix::Identity(dim, dim);
    auto trivial = [](const DiagonalizedHamiltonian& d) { return d.alpha_mag == 0.0 && d.r == 0.0; };
    if (trivial(initial))
        return diagonalizing_unitary(final_, dim).matrix();
    if (trivial(final_))
        return diagonalizing_unitary(initial, dim).matrix().adjoint();
    return (diagonalizing_unitary(final_, dim) * diagonalizing_unitary(initial, dim).adjoint()).matrix();
}

/// p_{m|n} = |c_{m,n}|^2.
inline RMatrix transition_matrix(const DiagonalizedHamiltonian& initial, const DiagonalizedHamiltonian& final_,
                                 int dim)
{
    return quench_unitary(initial, final_, dim).cwiseAbs2();
}

/// TPM distribution from explicit ingredients: input populations p_n over
/// the first `input_probs.size()` levels, transitions P(m, n), and the two
/// spectra. W_{m,n} = eps_final(m) - eps_initial(n).
inline WorkDistribution work_distribution_from(const RVector& input_probs, const RMatrix& transitions,
                                               const RVector& eps_initial, const RVector& eps_final,
                                               double grouping_tol = default_grouping_tol)
{
    const Eigen::Index n_in = input_probs.size();
    if (transitions.cols() < n_in || eps_initial.size() < n_in || eps_final.size() < transitions.rows())
        throw InvalidDimension("work_distribution_from: inconsistent sizes");
    std::vector<WorkAtom> raw;
    raw.reserve(static_cast<std::size_t>(n_in * transitions.rows()));
    for (Eigen::Index n = 0; n < n_in; ++n) {
        const double pn = input_probs(n);
        if (pn == 0.0)
            continue;
        for (Eigen::Index m = 0; m < transitions.rows(); ++m)
            raw.push_back({eps_final(m) - eps_initial(n), pn * transitions(m, n)});
    }
    return WorkDistribution::merge(std::move(raw), grouping_tol);
}

/// A quench prepared at a fixed truncation: inputs n < dim/2, outputs m < dim.
struct TwoPointProtocol {
    double beta = 1.0;
    DiagonalizedHamiltonian initial;
    DiagonalizedHamiltonian final_;
    int dim = default_fock_dim;
    RMatrix transitions;
    RVector eps_initial; ///< first dim/2 levels of the initial Hamiltonian
    RVector eps_final;   ///< first dim levels of the final Hamiltonian
    ThermalPopulations populations;

    /// Largest deviation of a trusted column sum from 1.
    double column_defect() const
    {
        double worst = 0.0;
        for (Eigen::Index n = 0; n < eps_initial.size(); ++n)
            worst = std::max(worst, std::abs(transitions.col(n).sum() - 1.0));
        return worst;
    }
};

inline TwoPointProtocol prepare_two_point(double beta, const DiagonalizedHamiltonian& initial,
                                          const DiagonalizedHamiltonian& final_, int dim)
{
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw InvalidParameter("two-point protocol: beta must be finite and > 0");
    require_dim(dim);
    TwoPointProtocol tp;
    tp.beta = beta;
    tp.initial = initial;
    tp.final_ = final_;
    tp.dim = dim;
    tp.transitions = transition_matrix(initial, final_, dim);
    tp.eps_initial = spectrum(initial, dim / 2);
    tp.eps_final = spectrum(final_, dim);
    tp.populations = thermal_populations(beta, tp.eps_initial);
    return tp;
}

inline WorkDistribution work_distribution(const TwoPointProtocol& tp, double grouping_tol = default_grouping_tol)
{
    return work_distribution_from(tp.populations.probs, tp.transitions, tp.eps_initial, tp.eps_final, grouping_tol);
}

inline WorkDistribution work_distribution(double beta, const DiagonalizedHamiltonian& initial,
                                          const DiagonalizedHamiltonian& final_, int dim,
                                          double grouping_tol = default_grouping_tol)
{
    return work_distribution(prepare_two_point(beta, initial, final_, dim), grouping_tol);
}

/// Protocol at the smallest doubled truncation where <W>, the normalization
/// and <e^{-beta W}> all move by less than the tolerance.
inline Converged<TwoPointProtocol> converged_two_point(double beta, const DiagonalizedHamiltonian& initial,
                                                       const DiagonalizedHamiltonian& final_,
                                                       const ConvergenceOptions& opt = {})
{
    auto evaluate = [&](int dim) { return prepare_two_point(beta, initial, final_, dim); };
    auto observables = [](const TwoPointProtocol& tp) {
        const WorkDistribution dist = work_distribution(tp);
        return std::vector<double>{dist.mean(), dist.total_probability(), dist.exp_average(tp.beta)};
    };
    return converge_dimension(evaluate, observables, opt);
}

inline double average_work(const WorkDistribution& dist) { return dist.mean(); }

struct JarzynskiResult {
    double exp_work;       ///< <e^{-beta W}>
    double exp_dissipated; ///< <e^{-beta (W - dF)}>
};

inline JarzynskiResult jarzynski_average(const WorkDistribution& dist, double beta, double delta_f)
{
    if (!(beta > 0.0))
        throw InvalidParameter("jarzynski_average: beta must be > 0");
    return {dist.exp_average(beta), dist.exp_average(beta, delta_f)};
}

struct EntropyProduction {
    double sigma; ///< beta(<W> - dF)
    double ift;   ///< <e^{-sigma}>
};

inline EntropyProduction entropy_production(const WorkDistribution& dist, double beta, double delta_f)
{
    if (!(beta > 0.0))
        throw InvalidParameter("entropy_production: beta must be > 0");
    return {beta * (dist.mean() - delta_f), dist.exp_average(beta, delta_f)};
}

// ---------------------------------------------------------------------------
// Density-matrix route

/// Hermitian, unit-trace, positive semidefinite matrix with its spectral
/// decomposition.
class QuantumState {
public:
    static constexpr double trace_tol = 1e-10;
    static constexpr double negativity_tol = 1e-10;

    explicit QuantumState(const CMatrix& rho)
    {
        if (rho.rows() != rho.cols() || rho.rows() < 1)
            throw InvalidDimension("QuantumState: density matrix must be square");
        if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
            throw StateValidityError("QuantumState: density matrix not Hermitian");
        Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (rho + rho.adjoint()));
        init(eig.eigenvalues(), eig.eigenvectors());
    }

    /// e^{-beta H}/Z from a Hermitian matrix H.
    static QuantumState thermal(double beta, const CMatrix& hamiltonian)
    {
        if (!(beta > 0.0))
            throw InvalidParameter("QuantumState::thermal: beta must be > 0");
        Eigen::SelfAdjointEigenSolver<CMatrix> eig(hamiltonian);
        const RVector& e = eig.eigenvalues();
        RVector w = (-beta * (e.array() - e.minCoeff())).exp().matrix();
        w /= w.sum();
        return QuantumState(w, eig.eigenvectors());
    }

    int dim() const noexcept { return static_cast<int>(vectors_.rows()); }
    CMatrix matrix() const { return vectors_ * values_.cast<cplx>().asDiagonal() * vectors_.adjoint(); }
    const RVector& eigenvalues() const noexcept { return values_; }
    const CMatrix& eigenvectors() const noexcept { return vectors_; }

    /// ln of the state with eigenvalues in (-tol, 0] clamped to the smallest
    /// positive double.
    CMatrix log() const
    {
        RVector l(values_.size());
        for (Eigen::Index k = 0; k < values_.size(); ++k)
            l(k) = std::log(std::max(values_(k), std::numeric_limits<double>::min()));
        return vectors_ * l.cast<cplx>().asDiagonal() * vectors_.adjoint();
    }

    double von_neumann_entropy() const
    {
        double s = 0.0;
        for (Eigen::Index k = 0; k < values_.size(); ++k)
            if (values_(k) > 0.0)
                s -= values_(k) * std::log(values_(k));
        return s;
    }

private:
    QuantumState(const RVector& values, const CMatrix& vectors) { init(values, vectors); }

    void init(const RVector& values, const CMatrix& vectors)
    {
        if (values.minCoeff() < -negativity_tol)
            throw StateValidityError("QuantumState: eigenvalue " + std::to_string(values.minCoeff())
                                     + " below -1e-10");
        if (std::abs(values.sum() - 1.0) > trace_tol)
            throw StateValidityError("QuantumState: trace differs from 1 by "
                                     + std::to_string(values.sum() - 1.0));
        values_ = values.cwiseMax(0.0);
        vectors_ = vectors;
    }

    RVector values_;
    CMatrix vectors_;
};

/// S(rho || sigma) = tr(rho ln rho) - tr(rho ln sigma).
inline double relative_entropy(const QuantumState& rho, const QuantumState& sigma)
{
    if (rho.dim() != sigma.dim())
        throw InvalidDimension("relative_entropy: dimension mismatch");
    const double cross = (rho.matrix() * sigma.log()).trace().real();
    return -rho.von_neumann_entropy() - cross;
}

/// tr(H_tau rho_0) - tr(H_0 rho_0) with H built directly from the quench
/// parameters and rho_0 = e^{-beta H_0}/Z_0 obtained by diagonalizing the
/// truncated matrix. Independent of `diagonalize`.
inline double trace_average_work(double beta, const QuenchSpec& initial, const QuenchSpec& final_, int dim)
{
    const CMatrix h0 = hamiltonian_matrix(initial, dim);
    const CMatrix ht = hamiltonian_matrix(final_, dim);
    const QuantumState rho = QuantumState::thermal(beta, h0);
    const CMatrix r = rho.matrix();
    return (r * (ht - h0)).trace().real();
}

/// S(rho_tau || rho_tau^th) for the sudden quench (rho_tau = rho_0), built
/// from directly assembled truncated Hamiltonians.
inline double relative_entropy_production(double beta, const QuenchSpec& initial, const QuenchSpec& final_,
                                          int dim)
{
    const QuantumState rho = QuantumState::thermal(beta, hamiltonian_matrix(initial, dim));
    const QuantumState target = QuantumState::thermal(beta, hamiltonian_matrix(final_, dim));
    return relative_entropy(rho, target);
}

/// Gaussian-kernel rendering of the atoms on `grid`, for plotting only.
inline std::vector<double> broadened_density(const WorkDistribution& dist, const std::vector<double>& grid,
                                             double width)
{
    if (!(width > 0.0))
        throw InvalidParameter("broadened_density: width must be > 0");
    const double norm = 1.0 / (width * std::sqrt(2.0 * pi));
    std::vector<double> out(grid.size(), 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (const auto& a : dist.atoms()) {
            const double z = (grid[i] - a.work) / width;
            out[i] += a.probability * norm * std::exp(-0.5 * z * z);
        }
    return out;
}

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// CSV with header `work,probability`.
inline void write_csv(std::ostream& os, const WorkDistribution& dist)
{
    os << "work,probability\n";
    for (const auto& a : dist.atoms())
        os << format_double(a.work) << ',' << format_double(a.probability) << '\n';
}

} // namespace qthermo
