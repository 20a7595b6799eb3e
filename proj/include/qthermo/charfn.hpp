#pragma once

// Work characteristic function G(alpha) = sum_{m,n} p_n |c_{m,n}|^2 e^{i (eps_m^tau - eps_n^0) alpha},
// its interferometric readout, and the inverse problem back to P(W).
//
// The work frequencies are generally incommensurate, so the inverse is a
// nonnegative least-squares fit onto a list of candidate work values rather
// than a discrete Fourier transform.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qthermo/error.hpp"
#include "qthermo/quench.hpp"
#include "qthermo/tpm.hpp"
#include "qthermo/types.hpp"

namespace qthermo {

inline constexpr double mode_weight_cutoff = 1e-8;
inline constexpr int default_alpha_points = 1024;
inline constexpr double column_norm_tol = 1e-6;

// ---------------------------------------------------------------------------
// Optics of the fractional Fourier transform

struct FrftGeometry {
    double alpha;
    double focal_length;
    double z_alpha;
};

/// Free propagation z, lens f, free propagation z with z = 2 f sin^2(alpha/2).
inline FrftGeometry frft_geometry(double alpha, double focal_length)
{
    if (!(alpha >= 0.0 && alpha <= 2.0 * pi))
        throw InvalidParameter("frft_geometry: alpha must lie in [0, 2 pi]");
    if (!(focal_length > 0.0) || !std::isfinite(focal_length))
        throw InvalidParameter("frft_geometry: focal length must be finite and > 0");
    const double s = std::sin(0.5 * alpha);
    return {alpha, focal_length, 2.0 * focal_length * s * s};
}

/// Diagonal of V_alpha in the eigenbasis: e^{-i alpha eps_n}.
inline CVector frft_phase_action(const RVector& spectrum, double alpha)
{
    if (!spectrum.allFinite() || !std::isfinite(alpha))
        throw InvalidParameter("frft_phase_action: spectrum and alpha must be finite");
    CVector d(spectrum.size());
    for (Eigen::Index n = 0; n < spectrum.size(); ++n)
        d(n) = std::polar(1.0, -alpha * spectrum(n));
    return d;
}

// ---------------------------------------------------------------------------
// Interferometer

enum class PhaseOffset { zero, quarter }; ///< path difference 0 or pi/2

/// background + Re (or Im) of sum_m |c_{m,n}|^2 e^{i (eps_final_m - eps_initial_n) alpha}.
inline double interferometer_intensity(int n, const CMatrix& coeffs, const RVector& eps_initial,
                                       const RVector& eps_final, double alpha, PhaseOffset offset,
                                       double background = 1.0)
{
    if (n < 0 || n >= coeffs.cols() || n >= eps_initial.size())
        throw InvalidDimension("interferometer_intensity: input mode out of range");
    if (eps_final.size() < coeffs.rows())
        throw InvalidDimension("interferometer_intensity: final spectrum shorter than process");
    const double norm = coeffs.col(n).squaredNorm();
    if (std::abs(norm - 1.0) > column_norm_tol)
        throw ProcessValidityError("interferometer_intensity: column " + std::to_string(n) + " has norm "
                                   + std::to_string(norm));
    cplx g{0.0, 0.0};
    for (Eigen::Index m = 0; m < coeffs.rows(); ++m)
        g += std::norm(coeffs(m, n)) * std::polar(1.0, (eps_final(m) - eps_initial(n)) * alpha);
    return background + (offset == PhaseOffset::zero ? g.real() : g.imag());
}

// ---------------------------------------------------------------------------
// Traces

struct CharFnTrace {
    std::vector<double> alphas;
    std::vector<cplx> values; ///< G(alpha), without background
    double background = 1.0;

    std::size_t size() const noexcept { return alphas.size(); }

    double intensity(std::size_t j, PhaseOffset offset) const
    {
        return background + (offset == PhaseOffset::zero ? values.at(j).real() : values.at(j).imag());
    }

    /// Rebuilds a trace from the two interferometer outputs.
    static CharFnTrace from_intensities(std::vector<double> alphas, const std::vector<double>& in_phase,
                                        const std::vector<double>& quadrature, double background)
    {
        if (in_phase.size() != alphas.size() || quadrature.size() != alphas.size())
            throw InvalidDimension("CharFnTrace: intensity traces must match the alpha grid");
        CharFnTrace t;
        t.alphas = std::move(alphas);
        t.background = background;
        t.values.resize(t.alphas.size());
        for (std::size_t j = 0; j < t.alphas.size(); ++j)
            t.values[j] = {in_phase[j] - background, quadrature[j] - background};
        return t;
    }
};

/// `points` equally spaced angles on [0, period).
inline std::vector<double> uniform_alpha_grid(int points, double period = 2.0 * pi)
{
    if (points < 1)
        throw InvalidParameter("uniform_alpha_grid: need at least one point");
    if (!(period > 0.0) || !std::isfinite(period))
        throw InvalidParameter("uniform_alpha_grid: period must be finite and > 0");
    std::vector<double> a(static_cast<std::size_t>(points));
    for (int j = 0; j < points; ++j)
        a[static_cast<std::size_t>(j)] = period * j / points;
    return a;
}

/// Spacing Delta of the lattice {eps_m^tau - eps_n^0} when the two level
/// spacings are rationally related with denominator <= max_den, else nullopt.
inline std::optional<double> work_lattice_spacing(const DiagonalizedHamiltonian& initial,
                                                  const DiagonalizedHamiltonian& final_, int max_den = 1000,
                                                  double tol = 1e-9)
{
    const double a = final_.omega_prime();
    const double b = initial.omega_prime();
    // Continued-fraction convergents of a/b.
    double x = a / b;
    long h0 = 1, h1 = 0, k0 = 0, k1 = 1;
    for (int iter = 0; iter < 64; ++iter) {
        const double fl = std::floor(x);
        const long c = static_cast<long>(fl);
        const long h = c * h0 + h1;
        const long k = c * k0 + k1;
        if (k > max_den)
            break;
        if (std::abs(static_cast<double>(h) / static_cast<double>(k) * b - a) <= tol * std::max(a, b))
            return b / static_cast<double>(k);
        h1 = h0;
        h0 = h;
        k1 = k0;
        k0 = k;
        const double frac = x - fl;
        if (frac < 1e-15)
            break;
        x = 1.0 / frac;
    }
    return std::nullopt;
}

/// Sampling period of the alpha grid: 2 pi / Delta on a commensurate lattice
/// (every candidate basis function is then periodic), else 2 pi.
inline double charfn_period(const DiagonalizedHamiltonian& initial, const DiagonalizedHamiltonian& final_)
{
    const auto spacing = work_lattice_spacing(initial, final_);
    return spacing ? 2.0 * pi / *spacing : 2.0 * pi;
}

/// Thermal characteristic function of a sudden quench, assembled mode by mode
/// over input modes whose Boltzmann weight is at least `cutoff`. The kept
/// weights are renormalized so that G(0) = 1.
class ThermalCharFn {
public:
    ThermalCharFn(double beta, const DiagonalizedHamiltonian& initial, const DiagonalizedHamiltonian& final_, int dim,
                  double cutoff = mode_weight_cutoff)
        : final_diag_(final_)
    {
        const TwoPointProtocol tp = prepare_two_point(beta, initial, final_, dim);
        const RVector& p = tp.populations.probs;
        double kept = 0.0;
        for (Eigen::Index n = 0; n < p.size(); ++n)
            if (p(n) >= cutoff) {
                inputs_.push_back(static_cast<int>(n));
                kept += p(n);
            }
        if (inputs_.empty())
            throw InvalidParameter("ThermalCharFn: every input mode is below the cutoff");
        weights_.reserve(inputs_.size());
        for (int n : inputs_)
            weights_.push_back(p(n) / kept);
        eps_initial_ = tp.eps_initial;
        eps_final_ = tp.eps_final;
        transitions_ = tp.transitions;
    }

    const std::vector<int>& input_modes() const noexcept { return inputs_; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    /// G at a complex argument; G(i beta) gives <e^{-beta W}>.
    cplx operator()(cplx alpha) const
    {
        cplx g{0.0, 0.0};
        for (std::size_t k = 0; k < inputs_.size(); ++k) {
            const int n = inputs_[k];
            cplx gn{0.0, 0.0};
            for (Eigen::Index m = 0; m < transitions_.rows(); ++m)
                gn += transitions_(m, n) * std::exp(I * (eps_final_(m) - eps_initial_(n)) * alpha);
            g += weights_[k] * gn;
        }
        return g;
    }

    /// G on a real grid. The final spectrum is an evenly spaced ladder, so each
    /// mode is a polynomial in e^{i omega' alpha} evaluated by Horner's rule.
    CharFnTrace sample(std::vector<double> alphas, double background = 1.0) const
    {
        CharFnTrace t;
        t.background = background;
        t.values.assign(alphas.size(), cplx{0.0, 0.0});
        const double wp = final_diag_.omega_prime();
        const Eigen::Index rows = transitions_.rows();
        for (std::size_t j = 0; j < alphas.size(); ++j) {
            const double a = alphas[j];
            const cplx z = std::polar(1.0, wp * a);
            cplx g{0.0, 0.0};
            for (std::size_t k = 0; k < inputs_.size(); ++k) {
                const int n = inputs_[k];
                cplx poly{0.0, 0.0};
                for (Eigen::Index m = rows - 1; m >= 0; --m)
                    poly = poly * z + transitions_(m, n);
                g += weights_[k] * poly * std::polar(1.0, (eps_final_(0) - eps_initial_(n)) * a);
            }
            t.values[j] = g;
        }
        t.alphas = std::move(alphas);
        return t;
    }

    /// Distinct work values eps_m^tau - eps_n^0 over the kept inputs.
    std::vector<double> candidate_works(double grouping_tol = default_grouping_tol) const
    {
        std::vector<WorkAtom> raw;
        raw.reserve(inputs_.size() * static_cast<std::size_t>(eps_final_.size()));
        for (int n : inputs_)
            for (Eigen::Index m = 0; m < eps_final_.size(); ++m)
                raw.push_back({eps_final_(m) - eps_initial_(n), 1.0});
        const WorkDistribution merged = WorkDistribution::merge(std::move(raw), grouping_tol);
        std::vector<double> out;
        for (const auto& a : merged.atoms())
            out.push_back(a.work);
        return out;
    }

    /// The TPM distribution over the kept, renormalized inputs.
    WorkDistribution distribution(double grouping_tol = default_grouping_tol) const
    {
        RVector probs = RVector::Zero(eps_initial_.size());
        for (std::size_t k = 0; k < inputs_.size(); ++k)
            probs(inputs_[k]) = weights_[k];
        return work_distribution_from(probs, transitions_, eps_initial_, eps_final_, grouping_tol);
    }

private:
    DiagonalizedHamiltonian final_diag_;
    std::vector<int> inputs_;
    std::vector<double> weights_;
    RVector eps_initial_;
    RVector eps_final_;
    RMatrix transitions_;
};

inline CharFnTrace thermal_charfn(double beta, const DiagonalizedHamiltonian& initial,
                                  const DiagonalizedHamiltonian& final_, int dim, std::vector<double> alphas,
                                  double background = 1.0)
{
    return ThermalCharFn(beta, initial, final_, dim).sample(std::move(alphas), background);
}

/// Largest per-atom probability difference, atoms matched within `tol` in work.
inline double max_atom_difference(const WorkDistribution& a, const WorkDistribution& b, double tol = 1e-7)
{
    double worst = 0.0;
    for (const auto& x : a.atoms())
        worst = std::max(worst, std::abs(x.probability - b.probability_at(x.work, tol)));
    for (const auto& x : b.atoms())
        worst = std::max(worst, std::abs(x.probability - a.probability_at(x.work, tol)));
    return worst;
}

inline void write_trace_csv(std::ostream& os, const CharFnTrace& t)
{
    os << "alpha,re_g,im_g,intensity_0,intensity_pi2\n";
    for (std::size_t j = 0; j < t.size(); ++j)
        os << format_double(t.alphas[j]) << ',' << format_double(t.values[j].real()) << ','
           << format_double(t.values[j].imag()) << ',' << format_double(t.intensity(j, PhaseOffset::zero)) << ','
           << format_double(t.intensity(j, PhaseOffset::quarter)) << '\n';
}

// ---------------------------------------------------------------------------
// Inverse problem

struct ReconstructionOptions {
    /// Candidates closer than this fraction of the grid resolution 2 pi/span
    /// (after folding by the aliasing period on uniform grids) are rejected.
    double min_separation = 0.5;
    int max_sweeps = 10000;
    double sweep_tol = 1e-15;
    /// Fallback only: the search stops at peaks below this fraction of the first.
    double peak_threshold = 1e-3;
    int oversample = 4;
};

struct Reconstruction {
    WorkDistribution distribution; ///< normalized
    double residual_norm = 0.0;    ///< RMS of |A p - G| over the grid, before normalization
    double raw_mass = 0.0;         ///< sum of fitted weights before normalization
    int sweeps = 0;
};

namespace detail {

struct UniformGrid {
    double start;
    double step;
};

inline std::optional<UniformGrid> uniform_spacing(const std::vector<double>& a)
{
    if (a.size() < 2)
        return std::nullopt;
    const double step = (a.back() - a.front()) / static_cast<double>(a.size() - 1);
    if (!(step > 0.0))
        return std::nullopt;
    for (std::size_t j = 0; j < a.size(); ++j)
        if (std::abs(a[j] - (a.front() + step * static_cast<double>(j))) > 1e-9 * step)
            return std::nullopt;
    return UniformGrid{a.front(), step};
}

/// sum_{j<n} e^{i delta (start + j step)}.
inline cplx dirichlet_sum(double delta, const UniformGrid& g, std::size_t n)
{
    const double x = delta * g.step;
    const double nn = static_cast<double>(n);
    const double half = std::sin(0.5 * x);
    double ratio;
    if (std::abs(half) < 1e-12)
        ratio = nn * std::cos(0.5 * nn * x) / std::cos(0.5 * x);
    else
        ratio = std::sin(0.5 * nn * x) / half;
    return std::polar(ratio, delta * g.start + 0.5 * (nn - 1.0) * x);
}

inline void check_conditioning(std::vector<double> works, const std::vector<double>& alphas,
                               const std::optional<UniformGrid>& grid, double min_fraction)
{
    const double span = grid ? grid->step * static_cast<double>(alphas.size())
                             : *std::max_element(alphas.begin(), alphas.end())
                                   - *std::min_element(alphas.begin(), alphas.end());
    if (!(span > 0.0))
        throw ConditioningError("reconstruction: alpha grid has zero extent", 0.0, 0.0);
    const double min_gap = min_fraction * 2.0 * pi / span;
    std::vector<std::pair<double, double>> folded; // (reduced, original)
    const double alias = grid ? 2.0 * pi / grid->step : 0.0;
    for (double w : works)
        folded.emplace_back(grid ? w - alias * std::floor(w / alias) : w, w);
    std::sort(folded.begin(), folded.end());
    for (std::size_t k = 1; k < folded.size(); ++k)
        if (folded[k].first - folded[k - 1].first < min_gap)
            throw ConditioningError("reconstruction: candidate works " + format_double(folded[k - 1].second)
                                        + " and " + format_double(folded[k].second)
                                        + " are not resolved by the alpha grid",
                                    folded[k - 1].second, folded[k].second);
    if (grid && folded.size() > 1 && folded.front().first + alias - folded.back().first < min_gap)
        throw ConditioningError("reconstruction: candidate works " + format_double(folded.back().second) + " and "
                                    + format_double(folded.front().second) + " alias on the alpha grid",
                                folded.back().second, folded.front().second);
}

} // namespace detail

/// Nonnegative least squares min ||A p - G||, A_{jk} = e^{i w_k alpha_j}, p >= 0,
/// by coordinate descent on the real normal equations.
inline Reconstruction reconstruct_work_distribution(const CharFnTrace& trace, const std::vector<double>& candidates,
                                                    const ReconstructionOptions& opt = {})
{
    const std::size_t n = trace.size();
    const std::size_t k = candidates.size();
    if (trace.values.size() != n)
        throw InvalidDimension("reconstruction: trace values and grid differ in length");
    if (k == 0)
        throw InvalidParameter("reconstruction: no candidate works");
    if (n < 4 * k)
        throw InvalidParameter("reconstruction: need at least 4 grid points per candidate (" + std::to_string(n)
                               + " < 4 x " + std::to_string(k) + ")");
    for (double w : candidates)
        if (!std::isfinite(w))
            throw InvalidParameter("reconstruction: non-finite candidate");
    const auto grid = detail::uniform_spacing(trace.alphas);
    detail::check_conditioning(candidates, trace.alphas, grid, opt.min_separation);

    // Gram matrix Q = Re(A^H A) and right-hand side b = Re(A^H G).
    RMatrix q(k, k);
    if (grid) {
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t c = a; c < k; ++c)
                q(a, c) = q(c, a) = detail::dirichlet_sum(candidates[c] - candidates[a], *grid, n).real();
    } else {
        CMatrix basis(n, k);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t c = 0; c < k; ++c)
                basis(j, c) = std::polar(1.0, candidates[c] * trace.alphas[j]);
        q = (basis.adjoint() * basis).real();
    }
    RVector b(k);
    for (std::size_t c = 0; c < k; ++c) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            s += (std::polar(1.0, -candidates[c] * trace.alphas[j]) * trace.values[j]).real();
        b(c) = s;
    }

    RVector p = RVector::Zero(k);
    RVector qp = RVector::Zero(k);
    int sweep = 0;
    for (; sweep < opt.max_sweeps; ++sweep) {
        double biggest = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const double updated = std::max(0.0, p(c) + (b(c) - qp(c)) / q(c, c));
            const double step = updated - p(c);
            if (step != 0.0) {
                qp += step * q.col(c);
                p(c) = updated;
                biggest = std::max(biggest, std::abs(step));
            }
        }
        if (biggest < opt.sweep_tol)
            break;
    }

    Reconstruction out;
    out.sweeps = sweep + 1;
    out.raw_mass = p.sum();
    double rss = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        cplx model{0.0, 0.0};
        for (std::size_t c = 0; c < k; ++c)
            if (p(c) > 0.0)
                model += p(c) * std::polar(1.0, candidates[c] * trace.alphas[j]);
        rss += std::norm(model - trace.values[j]);
    }
    out.residual_norm = std::sqrt(rss / static_cast<double>(n));
    if (!(out.raw_mass > 0.0))
        throw ConvergenceError("reconstruction: all fitted weights vanished");
    std::vector<WorkAtom> atoms;
    for (std::size_t c = 0; c < k; ++c)
        atoms.push_back({candidates[c], p(c) / out.raw_mass});
    out.distribution = WorkDistribution::merge(std::move(atoms), 0.0);
    return out;
}

namespace detail {

/// |sum_j r_j e^{-i w alpha_j}| / N.
inline double periodogram_at(const std::vector<double>& alphas, const std::vector<cplx>& r, double w)
{
    cplx s{0.0, 0.0};
    for (std::size_t j = 0; j < alphas.size(); ++j)
        s += std::polar(1.0, -w * alphas[j]) * r[j];
    return std::abs(s) / static_cast<double>(alphas.size());
}

/// Golden-section maximization of the periodogram on [lo, hi].
inline double refine_peak(const std::vector<double>& alphas, const std::vector<cplx>& r, double lo, double hi)
{
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo);
    double x2 = lo + g * (hi - lo);
    double f1 = periodogram_at(alphas, r, x1);
    double f2 = periodogram_at(alphas, r, x2);
    while (hi - lo > 1e-12 * std::max(1.0, std::abs(lo))) {
        if (f1 > f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = periodogram_at(alphas, r, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = periodogram_at(alphas, r, x2);
        }
    }
    return 0.5 * (lo + hi);
}

/// Real least-squares amplitudes of e^{i w_k alpha} against the trace.
inline RVector fit_amplitudes(const CharFnTrace& trace, const std::vector<double>& freqs)
{
    const auto n = static_cast<Eigen::Index>(trace.size());
    const auto k = static_cast<Eigen::Index>(freqs.size());
    RMatrix a(2 * n, k);
    RVector g(2 * n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const cplx v = trace.values[static_cast<std::size_t>(j)];
        g(2 * j) = v.real();
        g(2 * j + 1) = v.imag();
        for (Eigen::Index c = 0; c < k; ++c) {
            const cplx e = std::polar(1.0, freqs[static_cast<std::size_t>(c)] * trace.alphas[static_cast<std::size_t>(j)]);
            a(2 * j, c) = e.real();
            a(2 * j + 1, c) = e.imag();
        }
    }
    return a.colPivHouseholderQr().solve(g);
}

inline std::vector<cplx> residual_without(const CharFnTrace& trace, const std::vector<double>& freqs,
                                          const RVector& amps, std::size_t skip)
{
    std::vector<cplx> r = trace.values;
    for (std::size_t k = 0; k < freqs.size(); ++k) {
        if (k == skip)
            continue;
        for (std::size_t j = 0; j < r.size(); ++j)
            r[j] -= amps(static_cast<Eigen::Index>(k)) * std::polar(1.0, freqs[k] * trace.alphas[j]);
    }
    return r;
}

/// Levenberg-Marquardt on all frequencies and real amplitudes jointly, with
/// each frequency step capped at `max_step`.
inline void joint_refine(const CharFnTrace& trace, std::vector<double>& freqs, RVector& amps, double max_step,
                         int max_iter = 200)
{
    const auto n = static_cast<Eigen::Index>(trace.size());
    const auto k = static_cast<Eigen::Index>(freqs.size());
    auto residual_of = [&](const std::vector<double>& w, const RVector& a) {
        RVector r(2 * n);
        for (Eigen::Index j = 0; j < n; ++j) {
            cplx model{0.0, 0.0};
            for (Eigen::Index c = 0; c < k; ++c)
                model += a(c) * std::polar(1.0, w[static_cast<std::size_t>(c)] * trace.alphas[static_cast<std::size_t>(j)]);
            const cplx d = model - trace.values[static_cast<std::size_t>(j)];
            r(2 * j) = d.real();
            r(2 * j + 1) = d.imag();
        }
        return r;
    };
    RVector r = residual_of(freqs, amps);
    double cost = r.squaredNorm();
    double lambda = 1e-3;
    for (int iter = 0; iter < max_iter; ++iter) {
        RMatrix jac(2 * n, 2 * k);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double aj = trace.alphas[static_cast<std::size_t>(j)];
            for (Eigen::Index c = 0; c < k; ++c) {
                const cplx e = std::polar(1.0, freqs[static_cast<std::size_t>(c)] * aj);
                const cplx dw = I * aj * amps(c) * e;
                jac(2 * j, c) = dw.real();
                jac(2 * j + 1, c) = dw.imag();
                jac(2 * j, k + c) = e.real();
                jac(2 * j + 1, k + c) = e.imag();
            }
        }
        const RMatrix jtj = jac.transpose() * jac;
        const RVector grad = jac.transpose() * r;
        bool improved = false;
        for (int attempt = 0; attempt < 30 && !improved; ++attempt) {
            RMatrix damped = jtj;
            damped.diagonal() += lambda * jtj.diagonal();
            RVector step = damped.ldlt().solve(-grad);
            const double biggest = step.head(k).cwiseAbs().maxCoeff();
            if (biggest > max_step)
                step *= max_step / biggest;
            std::vector<double> w = freqs;
            RVector a = amps + step.tail(k);
            for (Eigen::Index c = 0; c < k; ++c)
                w[static_cast<std::size_t>(c)] += step(c);
            const RVector trial = residual_of(w, a);
            const double trial_cost = trial.squaredNorm();
            if (trial_cost < cost) {
                const bool converged = cost - trial_cost <= 1e-12 * cost || step.norm() < 1e-13;
                freqs = std::move(w);
                amps = std::move(a);
                r = trial;
                cost = trial_cost;
                lambda = std::max(lambda * 0.1, 1e-12);
                improved = true;
                if (converged)
                    return;
            } else {
                lambda *= 10.0;
            }
        }
        if (!improved)
            return;
    }
}

} // namespace detail

/// Candidate-free variant. Work values are located greedily: the strongest
/// peak of the oversampled residual periodogram is refined off the bin grid,
/// all located frequencies are re-refined against the others, and the search
/// stops once the strongest remaining peak falls below `peak_threshold` times
/// the first. The located values then go through the candidate fit.
inline Reconstruction reconstruct_from_periodogram(const CharFnTrace& trace, const ReconstructionOptions& opt = {})
{
    const auto grid = detail::uniform_spacing(trace.alphas);
    if (!grid)
        throw InvalidParameter("reconstruction: the periodogram fallback needs a uniform alpha grid");
    const std::size_t n = trace.size();
    const double span = grid->step * static_cast<double>(n);
    const double bin = 2.0 * pi / span / opt.oversample;
    const int half = static_cast<int>(std::floor(pi / grid->step / bin));
    const std::size_t max_atoms = n / 4;

    std::vector<double> freqs;
    RVector amps;
    double first_peak = 0.0;
    std::vector<cplx> residual = trace.values;
    while (freqs.size() < max_atoms) {
        // Oversampled periodogram by Horner's rule in e^{-i w step}.
        double best = -1.0;
        double best_w = 0.0;
        for (int i = -half; i < half; ++i) {
            const double w = i * bin;
            const cplx z = std::polar(1.0, -w * grid->step);
            cplx s{0.0, 0.0};
            for (std::size_t j = n; j-- > 0;)
                s = s * z + residual[j];
            const double pw = std::abs(s) / static_cast<double>(n);
            if (pw > best) {
                best = pw;
                best_w = w;
            }
        }
        if (freqs.empty())
            first_peak = best;
        else if (best < opt.peak_threshold * first_peak)
            break;
        freqs.push_back(detail::refine_peak(trace.alphas, residual, best_w - bin, best_w + bin));
        amps = detail::fit_amplitudes(trace, freqs);
        detail::joint_refine(trace, freqs, amps, 0.25 * bin);
        residual = detail::residual_without(trace, freqs, amps, freqs.size());
    }
    std::sort(freqs.begin(), freqs.end());
    return reconstruct_work_distribution(trace, freqs, opt);
}

} // namespace qthermo
