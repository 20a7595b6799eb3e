#pragma once

// Photonic Maxwell demon (thermal beams, beam splitters, click detectors) and
// the generalized-amplitude-damping qubit thermometer.
//
// Qubit basis: |0> = excited = horizontal, |1> = ground = vertical.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qthermo/error.hpp"
#include "qthermo/types.hpp"

namespace qthermo {

// ---------------------------------------------------------------------------
// Photon statistics

/// Single-mode Bose-Einstein count, P(n) = nbar^n / (1 + nbar)^{n+1}.
template <class Rng>
std::int64_t thermal_photon_sample(double n_bar, Rng& rng)
{
    if (!(n_bar >= 0.0) || !std::isfinite(n_bar))
        throw InvalidParameter("thermal_photon_sample: n_bar must be finite and >= 0");
    if (n_bar == 0.0)
        return 0;
    std::geometric_distribution<std::int64_t> g(1.0 / (1.0 + n_bar));
    return g(rng);
}

inline double bose_einstein_pmf(double n_bar, std::int64_t n)
{
    const double x = n_bar / (1.0 + n_bar);
    return std::pow(x, static_cast<double>(n)) / (1.0 + n_bar);
}

struct BeamSplit {
    std::int64_t transmitted;
    std::int64_t reflected;
};

/// Each photon reflects independently with probability `reflectivity`.
template <class Rng>
BeamSplit beam_splitter_partition(std::int64_t n, double reflectivity, Rng& rng)
{
    if (n < 0)
        throw InvalidParameter("beam_splitter_partition: photon number must be >= 0");
    if (!(reflectivity >= 0.0 && reflectivity <= 1.0))
        throw InvalidParameter("beam_splitter_partition: reflectivity must lie in [0, 1]");
    if (n == 0 || reflectivity == 0.0)
        return {n, 0};
    std::binomial_distribution<std::int64_t> b(n, reflectivity);
    const std::int64_t r = b(rng);
    return {n - r, r};
}

// ---------------------------------------------------------------------------
// Demon

inline constexpr std::uint64_t demon_block_size = 4096;
inline constexpr double max_demon_n_bar = 1e4;

struct DemonConfig {
    double n_bar = 2.0;
    double bs_reflectivity = 0.05;
    double detector_efficiency = 1.0;
    std::uint64_t trials = 1000000;
    std::uint64_t rng_seed = 0;

    void validate() const
    {
        if (!(n_bar > 0.0) || !(n_bar <= max_demon_n_bar))
            throw ConfigError("demon: n_bar must lie in (0, 1e4]");
        if (!(bs_reflectivity > 0.0 && bs_reflectivity < 1.0))
            throw ConfigError("demon: bs_reflectivity must lie in (0, 1)");
        if (!(detector_efficiency >= 0.0 && detector_efficiency <= 1.0))
            throw ConfigError("demon: detector_efficiency must lie in [0, 1]");
        if (trials == 0)
            throw ConfigError("demon: trials must be > 0");
    }
};

/// One trial: photon numbers, transmitted intensities and clicks of both arms.
struct DemonTrial {
    std::array<std::int64_t, 2> photons;
    std::array<std::int64_t, 2> transmitted;
    std::array<bool, 2> click;

    /// +1 for (click, no click), -1 for (no click, click), 0 otherwise.
    int polarity() const { return click[0] == click[1] ? 0 : (click[0] ? 1 : -1); }
    std::int64_t intensity_difference() const { return transmitted[0] - transmitted[1]; }
};

struct MeanEstimate {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double stderr_ = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t count = 0;
};

/// Integer accumulators; merging two runs is exact and order independent.
struct DemonStats {
    std::uint64_t trials = 0;
    std::array<std::uint64_t, 2> clicks{0, 0};
    std::uint64_t both = 0;
    std::uint64_t neither = 0;
    std::uint64_t only_first = 0;
    std::uint64_t only_second = 0;
    /// sum of n^k over both arms, k = 1..4
    std::array<std::int64_t, 4> photon_moments{0, 0, 0, 0};
    std::int64_t sum_t = 0, sum_t2 = 0;             ///< arm 1 transmitted, unconditional
    std::int64_t sum_t_click = 0, sum_t2_click = 0; ///< arm 1 transmitted given arm 1 clicked
    std::int64_t sum_diff = 0, sum_diff2 = 0;       ///< I1 - I2, unconditional
    std::int64_t charge = 0;                        ///< sum polarity (I1 - I2)
    std::int64_t sum_charge2 = 0;

    void add(const DemonTrial& t)
    {
        ++trials;
        for (int a = 0; a < 2; ++a) {
            clicks[a] += t.click[a] ? 1 : 0;
            std::int64_t p = t.photons[a];
            std::int64_t pk = p;
            for (int k = 0; k < 4; ++k) {
                photon_moments[k] += pk;
                pk *= p;
            }
        }
        if (t.click[0] && t.click[1])
            ++both;
        else if (!t.click[0] && !t.click[1])
            ++neither;
        else if (t.click[0])
            ++only_first;
        else
            ++only_second;
        const std::int64_t t1 = t.transmitted[0];
        sum_t += t1;
        sum_t2 += t1 * t1;
        if (t.click[0]) {
            sum_t_click += t1;
            sum_t2_click += t1 * t1;
        }
        const std::int64_t d = t.intensity_difference();
        sum_diff += d;
        sum_diff2 += d * d;
        const std::int64_t c = t.polarity() * d;
        charge += c;
        sum_charge2 += c * c;
    }

    void merge(const DemonStats& o)
    {
        trials += o.trials;
        for (int a = 0; a < 2; ++a)
            clicks[a] += o.clicks[a];
        both += o.both;
        neither += o.neither;
        only_first += o.only_first;
        only_second += o.only_second;
        for (int k = 0; k < 4; ++k)
            photon_moments[k] += o.photon_moments[k];
        sum_t += o.sum_t;
        sum_t2 += o.sum_t2;
        sum_t_click += o.sum_t_click;
        sum_t2_click += o.sum_t2_click;
        sum_diff += o.sum_diff;
        sum_diff2 += o.sum_diff2;
        charge += o.charge;
        sum_charge2 += o.sum_charge2;
    }

    friend bool operator==(const DemonStats&, const DemonStats&) = default;

    static MeanEstimate estimate(std::int64_t sum, std::int64_t sum2, std::uint64_t n)
    {
        MeanEstimate e;
        e.count = n;
        if (n == 0)
            return e;
        const double nn = static_cast<double>(n);
        e.mean = static_cast<double>(sum) / nn;
        const double var = n > 1 ? (static_cast<double>(sum2) - nn * e.mean * e.mean) / (nn - 1.0) : 0.0;
        e.stderr_ = std::sqrt(std::max(var, 0.0) / nn);
        return e;
    }

    /// No clicks at all: conditional statistics undefined.
    bool degenerate() const { return clicks[0] == 0 && clicks[1] == 0; }

    MeanEstimate transmitted() const { return estimate(sum_t, sum_t2, trials); }
    MeanEstimate transmitted_given_click() const { return estimate(sum_t_click, sum_t2_click, clicks[0]); }
    MeanEstimate intensity_difference() const { return estimate(sum_diff, sum_diff2, trials); }
    /// E[polarity (I1 - I2) | exactly one click].
    MeanEstimate conditional_difference() const { return estimate(charge, sum_charge2, only_first + only_second); }

    /// (E[t | click] - E[t]) / combined standard error.
    double click_significance() const
    {
        const auto c = transmitted_given_click();
        const auto u = transmitted();
        if (c.count < 2)
            return std::numeric_limits<double>::quiet_NaN();
        return (c.mean - u.mean) / std::sqrt(c.stderr_ * c.stderr_ + u.stderr_ * u.stderr_);
    }

    double mean_photons() const { return static_cast<double>(photon_moments[0]) / (2.0 * trials); }

    /// <n(n-1)>/<n>^2 pooled over both arms, with a delta-method standard error.
    MeanEstimate g2() const
    {
        MeanEstimate e;
        const double n = 2.0 * static_cast<double>(trials);
        e.count = 2 * trials;
        const double m1 = photon_moments[0] / n, m2 = photon_moments[1] / n, m3 = photon_moments[2] / n,
                     m4 = photon_moments[3] / n;
        if (!(m1 > 0.0))
            return e;
        const double f = m2 - m1; // <n(n-1)>
        e.mean = f / (m1 * m1);
        // Covariance of (n^2 - n, n).
        const double var_f = (m4 - 2.0 * m3 + m2) - f * f;
        const double var_m = m2 - m1 * m1;
        const double cov = (m3 - m2) - f * m1;
        const double df = 1.0 / (m1 * m1);
        const double dm = -2.0 * f / (m1 * m1 * m1);
        const double var = df * df * var_f + dm * dm * var_m + 2.0 * df * dm * cov;
        e.stderr_ = std::sqrt(std::max(var, 0.0) / n);
        return e;
    }
};

template <class Rng>
DemonTrial demon_trial(const DemonConfig& cfg, Rng& rng)
{
    DemonTrial t{};
    for (int a = 0; a < 2; ++a) {
        t.photons[a] = thermal_photon_sample(cfg.n_bar, rng);
        const BeamSplit s = beam_splitter_partition(t.photons[a], cfg.bs_reflectivity, rng);
        t.transmitted[a] = s.transmitted;
        std::int64_t detected = 0;
        if (s.reflected > 0 && cfg.detector_efficiency > 0.0) {
            std::binomial_distribution<std::int64_t> eff(s.reflected, cfg.detector_efficiency);
            detected = eff(rng);
        }
        t.click[a] = detected > 0;
    }
    return t;
}

/// Generator for trial block `block`: depends only on (seed, block).
inline std::mt19937_64 demon_block_rng(std::uint64_t seed, std::uint64_t block)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
    return std::mt19937_64(seq);
}

/// Runs every trial; `visit(index, trial)` sees each one in order.
template <class Visitor>
DemonStats demon_run(const DemonConfig& cfg, Visitor&& visit)
{
    cfg.validate();
    DemonStats total;
    const std::uint64_t blocks = (cfg.trials + demon_block_size - 1) / demon_block_size;
    for (std::uint64_t b = 0; b < blocks; ++b) {
        auto rng = demon_block_rng(cfg.rng_seed, b);
        DemonStats part;
        const std::uint64_t first = b * demon_block_size;
        const std::uint64_t last = std::min(cfg.trials, first + demon_block_size);
        for (std::uint64_t i = first; i < last; ++i) {
            const DemonTrial t = demon_trial(cfg, rng);
            visit(i, t);
            part.add(t);
        }
        total.merge(part);
    }
    return total;
}

inline DemonStats demon_run(const DemonConfig& cfg)
{
    return demon_run(cfg, [](std::uint64_t, const DemonTrial&) {});
}

// ---------------------------------------------------------------------------
// Qubit thermometer

using Qubit = Eigen::Matrix2cd;

class QubitState {
public:
    static constexpr double tol = 1e-12;

    explicit QubitState(const Qubit& rho) : rho_(rho)
    {
        if (!rho.allFinite())
            throw StateValidityError("QubitState: non-finite entries");
        if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol)
            throw StateValidityError("QubitState: not Hermitian");
        if (std::abs(rho.trace().real() - 1.0) > tol)
            throw StateValidityError("QubitState: trace differs from 1");
        Eigen::SelfAdjointEigenSolver<Qubit> eig(rho);
        if (eig.eigenvalues().minCoeff() < -tol)
            throw StateValidityError("QubitState: negative eigenvalue");
    }

    static QubitState excited() { return pure(cplx(1.0), cplx(0.0)); }
    static QubitState ground() { return pure(cplx(0.0), cplx(1.0)); }
    static QubitState horizontal() { return excited(); }
    static QubitState vertical() { return ground(); }
    static QubitState plus() { return pure(cplx(1.0), cplx(1.0)); }

    static QubitState pure(cplx a0, cplx a1)
    {
        Eigen::Vector2cd v(a0, a1);
        v.normalize();
        return QubitState(v * v.adjoint());
    }

    const Qubit& matrix() const noexcept { return rho_; }
    double excited_population() const { return rho_(0, 0).real(); }
    double ground_population() const { return rho_(1, 1).real(); }
    /// Ground minus excited population.
    double population_difference() const { return ground_population() - excited_population(); }

    Eigen::Vector3d bloch() const
    {
        return {2.0 * rho_(0, 1).real(), -2.0 * rho_(0, 1).imag(), (rho_(0, 0) - rho_(1, 1)).real()};
    }

private:
    Qubit rho_;
};

/// Four GAD Kraus operators: decay (weight q) and excitation (weight 1 - q).
inline std::array<Qubit, 4> gad_kraus(double p, double q)
{
    if (!(p >= 0.0 && p <= 1.0) || !(q >= 0.0 && q <= 1.0))
        throw InvalidParameter("gad_channel: p and q must lie in [0, 1]");
    const double sq = std::sqrt(q), sq1 = std::sqrt(1.0 - q);
    const double sp = std::sqrt(p), sp1 = std::sqrt(1.0 - p);
    Qubit e0, e1, e2, e3;
    e0 << sq * sp1, 0.0, 0.0, sq;
    e1 << 0.0, 0.0, sq * sp, 0.0;
    e2 << sq1, 0.0, 0.0, sq1 * sp1;
    e3 << 0.0, sq1 * sp, 0.0, 0.0;
    return {e0, e1, e2, e3};
}

inline QubitState gad_channel(const QubitState& rho, double p, double q)
{
    Qubit out = Qubit::Zero();
    for (const auto& k : gad_kraus(p, q))
        out += k * rho.matrix() * k.adjoint();
    out = 0.5 * (out + out.adjoint()).eval();
    return QubitState(out);
}

inline double trace_norm(const Qubit& m)
{
    Eigen::SelfAdjointEigenSolver<Qubit> eig(0.5 * (m + m.adjoint()));
    return eig.eigenvalues().cwiseAbs().sum();
}

/// Optimal single-shot success probability 1/2 + ||rho_a - rho_b||_1 / 4 for equal priors.
inline double helstrom_success(const QubitState& a, const QubitState& b)
{
    return 0.5 + 0.25 * trace_norm(a.matrix() - b.matrix());
}

struct ThermometerReport {
    double p;
    double difference_hot;   ///< ground - excited after the hot channel
    double difference_cold;  ///< ground - excited after the cold channel
    double signal;           ///< difference_cold - difference_hot
    double helstrom;         ///< shots -> infinity optimum
    double measured_optimum; ///< best success from a population measurement
    std::uint64_t shots;
    std::uint64_t correct;
    double success() const { return shots ? static_cast<double>(correct) / static_cast<double>(shots) : 0.5; }
    double success_stderr() const
    {
        if (shots == 0)
            return 0.0;
        const double s = success();
        return std::sqrt(s * (1.0 - s) / static_cast<double>(shots));
    }
};

/// Each shot draws the bath (hot or cold, equal priors), sends the input
/// through that GAD channel, measures ground/excited, and guesses the bath
/// more likely to give that outcome (ties guess hot).
template <class Rng>
ThermometerReport thermometer_discriminate(const QubitState& input, double p, double q_hot, double q_cold,
                                           std::uint64_t shots, Rng& rng)
{
    const QubitState hot = gad_channel(input, p, q_hot);
    const QubitState cold = gad_channel(input, p, q_cold);
    ThermometerReport r{};
    r.p = p;
    r.difference_hot = hot.population_difference();
    r.difference_cold = cold.population_difference();
    r.signal = r.difference_cold - r.difference_hot;
    r.helstrom = helstrom_success(hot, cold);
    const double g_hot = hot.ground_population();
    const double g_cold = cold.ground_population();
    r.measured_optimum = 0.5 + 0.5 * std::abs(g_hot - g_cold);
    r.shots = shots;
    std::bernoulli_distribution coin(0.5);
    for (std::uint64_t s = 0; s < shots; ++s) {
        const bool is_hot = coin(rng);
        const double g = is_hot ? g_hot : g_cold;
        const bool ground = std::bernoulli_distribution(std::clamp(g, 0.0, 1.0))(rng);
        const double like_hot = ground ? g_hot : 1.0 - g_hot;
        const double like_cold = ground ? g_cold : 1.0 - g_cold;
        const bool guess_hot = like_hot >= like_cold;
        r.correct += guess_hot == is_hot ? 1 : 0;
    }
    return r;
}

} // namespace qthermo
