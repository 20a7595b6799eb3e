#pragma once

// Truncated Fock-space operators for a single bosonic mode.
//
// Row/column index n of every matrix is the occupation number, n = 0..dim-1.
// Operators built here are exact exponentials of the *truncated* generator, so
// they are unitary on the whole truncated space but only agree with the
// infinite-dimensional operator on a central block; callers compare on
// n < dim/2.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qthermo/error.hpp"
#include "qthermo/types.hpp"

namespace qthermo {

inline constexpr double unitarity_tol = 1e-10;
inline constexpr int default_fock_dim = 64;

class FockOperator {
public:
    explicit FockOperator(CMatrix entries) : m_(std::move(entries))
    {
        if (m_.rows() != m_.cols())
            throw InvalidDimension("FockOperator: matrix must be square");
        if (m_.rows() < 2)
            throw InvalidDimension("FockOperator: dim must be >= 2");
    }

    int dim() const noexcept { return static_cast<int>(m_.rows()); }
    const CMatrix& matrix() const noexcept { return m_; }
    cplx operator()(int row, int col) const { return m_(row, col); }

    FockOperator adjoint() const { return FockOperator(m_.adjoint()); }

    friend FockOperator operator*(const FockOperator& lhs, const FockOperator& rhs)
    {
        if (lhs.dim() != rhs.dim())
            throw InvalidDimension("FockOperator: dimension mismatch in product");
        return FockOperator(lhs.m_ * rhs.m_);
    }

private:
    CMatrix m_;
};

struct LadderPair {
    FockOperator lowering;
    FockOperator raising;
};

inline void require_dim(int dim)
{
    if (dim < 2)
        throw InvalidDimension("Fock dimension must be >= 2, got " + std::to_string(dim));
}

inline LadderPair ladder_operators(int dim)
{
    require_dim(dim);
    CMatrix a = CMatrix::Zero(dim, dim);
    for (int n = 1; n < dim; ++n)
        a(n - 1, n) = std::sqrt(static_cast<double>(n));
    CMatrix adag = a.adjoint();
    return {FockOperator(std::move(a)), FockOperator(std::move(adag))};
}

/// exp(G) for an anti-Hermitian G, via the Hermitian matrix iG.
inline CMatrix expm_antihermitian(const CMatrix& generator)
{
    const CMatrix hermitian = I * generator;
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(hermitian);
    if (eig.info() != Eigen::Success)
        throw Error("expm_antihermitian: eigendecomposition failed");
    const RVector& lambda = eig.eigenvalues();
    CVector phases(lambda.size());
    for (Eigen::Index k = 0; k < lambda.size(); ++k)
        phases(k) = std::exp(-I * lambda(k));
    const CMatrix& v = eig.eigenvectors();
    return v * phases.asDiagonal() * v.adjoint();
}

/// D(alpha) = exp(alpha a^dag - alpha^* a).
inline FockOperator displacement_operator(cplx alpha, int dim)
{
    require_dim(dim);
    if (!std::isfinite(alpha.real()) || !std::isfinite(alpha.imag()))
        throw InvalidParameter("displacement_operator: alpha must be finite");
    if (alpha == cplx{0.0, 0.0})
        return FockOperator(CMatrix::Identity(dim, dim));
    const auto [a, adag] = ladder_operators(dim);
    const CMatrix gen = alpha * adag.matrix() - std::conj(alpha) * a.matrix();
    return FockOperator(expm_antihermitian(gen));
}

/// S(r, theta) = exp{(r/2)[e^{-i theta} a^2 - e^{i theta} a^dag^2]}.
inline FockOperator squeezing_operator(double r, double theta, int dim)
{
    require_dim(dim);
    if (!std::isfinite(r) || !std::isfinite(theta))
        throw InvalidParameter("squeezing_operator: r and theta must be finite");
    if (r < 0.0)
        throw InvalidParameter("squeezing_operator: r must be >= 0 (fold the sign into theta)");
    if (r == 0.0)
        return FockOperator(CMatrix::Identity(dim, dim));
    // The generator only couples n to n +- 2, so even and odd occupations
    // exponentiate independently.
    const cplx down = 0.5 * r * std::exp(-I * theta);
    CMatrix out = CMatrix::Zero(dim, dim);
    for (int parity = 0; parity < 2; ++parity) {
        const int size = (dim - parity + 1) / 2;
        if (size == 0)
            continue;
        CMatrix gen = CMatrix::Zero(size, size);
        for (int k = 0; k + 1 < size; ++k) {
            const double n = 2.0 * k + parity;
            const double c = std::sqrt((n + 1.0) * (n + 2.0));
            gen(k, k + 1) = down * c;
            gen(k + 1, k) = -std::conj(down) * c;
        }
        const CMatrix block = expm_antihermitian(gen);
        for (int i = 0; i < size; ++i)
            for (int j = 0; j < size; ++j)
                out(2 * i + parity, 2 * j + parity) = block(i, j);
    }
    return FockOperator(std::move(out));
}

/// max |(M^dag M - 1)_{ij}| over i, j < block (default dim/2).
inline double unitarity_defect(const FockOperator& op, int block = -1)
{
    const int b = block < 0 ? op.dim() / 2 : std::min(block, op.dim());
    const CMatrix gram = op.matrix().adjoint() * op.matrix();
    return (gram.topLeftCorner(b, b) - CMatrix::Identity(b, b)).cwiseAbs().maxCoeff();
}

struct ThermalPopulations {
    double beta = 0.0;
    RVector probs;
    /// Truncated sum Z = sum_n exp(-beta eps_n).
    double partition_value = 0.0;
    double log_partition = 0.0;
    /// Estimated mass beyond the last level, from geometric extrapolation of
    /// the final gap; +inf when the spectrum stops increasing.
    double tail_mass = 0.0;
};

inline ThermalPopulations thermal_populations(double beta, const RVector& spectrum)
{
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw InvalidParameter("thermal_populations: beta must be finite and > 0");
    if (spectrum.size() < 1)
        throw InvalidDimension("thermal_populations: empty spectrum");
    if (!spectrum.allFinite())
        throw InvalidParameter("thermal_populations: spectrum must be finite");

    const double shift = spectrum.minCoeff();
    RVector w = (-beta * (spectrum.array() - shift)).exp().matrix();
    const double sum = w.sum();

    ThermalPopulations out;
    out.beta = beta;
    out.probs = w / sum;
    out.log_partition = std::log(sum) - beta * shift;
    out.partition_value = std::exp(out.log_partition);

    const Eigen::Index n = spectrum.size();
    if (n >= 2) {
        const double gap = spectrum(n - 1) - spectrum(n - 2);
        if (gap > 0.0) {
            const double ratio = std::exp(-beta * gap);
            out.tail_mass = out.probs(n - 1) * ratio / (1.0 - ratio);
        } else {
            out.tail_mass = std::numeric_limits<double>::infinity();
        }
    }
    return out;
}

struct ConvergenceOptions {
    int initial_dim = default_fock_dim;
    int max_dim = 1024;
    double tolerance = 1e-9;
};

template <class Result>
struct Converged {
    int dim;
    Result value;
    double change; ///< max |observable(dim) - observable(dim/2)|
};

/// Doubles the truncation until every observable moves by less than the
/// tolerance. `evaluate(dim)` returns a Result; `observables(result)` returns a
/// std::vector<double> compared entrywise.
template <class Evaluate, class Observables>
auto converge_dimension(Evaluate&& evaluate, Observables&& observables, const ConvergenceOptions& opt = {})
{
    using Result = decltype(evaluate(opt.initial_dim));
    require_dim(opt.initial_dim);
    int dim = opt.initial_dim;
    Result previous = evaluate(dim);
    std::vector<double> prev_obs = observables(previous);
    while (2 * dim <= opt.max_dim) {
        dim *= 2;
        Result current = evaluate(dim);
        std::vector<double> obs = observables(current);
        double change = 0.0;
        for (std::size_t k = 0; k < obs.size(); ++k)
            change = std::max(change, std::abs(obs[k] - prev_obs[k]));
        if (change < opt.tolerance)
            return Converged<Result>{dim, std::move(current), change};
        previous = std::move(current);
        prev_obs = std::move(obs);
    }
    throw ConvergenceError("truncation did not converge below " + std::to_string(opt.tolerance)
                           + " up to dim " + std::to_string(dim));
}

/// Smallest power-of-two multiple of `initial_dim` at which the top-left
/// dim/2 block of `make(dim)` agrees with the same block of `make(2 dim)`
/// within the tolerance. Returns the operator at that dim.
template <class Factory>
FockOperator converged_operator(Factory&& make, const ConvergenceOptions& opt = {})
{
    require_dim(opt.initial_dim);
    for (int dim = opt.initial_dim; 2 * dim <= opt.max_dim; dim *= 2) {
        FockOperator small = make(dim);
        const FockOperator large = make(2 * dim);
        const int b = dim / 2;
        const double change = (small.matrix().topLeftCorner(b, b) - large.matrix().topLeftCorner(b, b))
                                  .cwiseAbs()
                                  .maxCoeff();
        if (change < opt.tolerance)
            return small;
    }
    throw ConvergenceError("operator block did not stabilize up to dim " + std::to_string(opt.max_dim));
}

} // namespace qthermo
