#pragma once

// Two-point measurement on orbital-angular-momentum (Laguerre-Gaussian) modes
// with radial index p = 0. Mode l carries energy (|l| + 1) omega, so every
// level except l = 0 is doubly degenerate. Index k = l + l_max.

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qthermo/error.hpp"
#include "qthermo/tpm.hpp"
#include "qthermo/types.hpp"

namespace qthermo {

inline constexpr int default_l_max = 10;
inline constexpr double stochastic_tol = 1e-9;

/// (|l| + 2p + 1) in units of omega.
inline double lg_energy(int l, int p)
{
    if (p < 0)
        throw InvalidParameter("lg_energy: radial index must be >= 0");
    return static_cast<double>(std::abs(l) + 2 * p + 1);
}

struct OamPartition {
    double direct;      ///< sum_{|l| <= l_max} e^{-beta omega (|l| + 1)}
    double closed_form; ///< l_max -> infinity limit, e^{-beta omega} coth(beta omega / 2)
    double printed;     ///< e^{beta omega} tanh(beta omega / 2), the reciprocal of closed_form
    double printed_ratio() const { return printed / closed_form; }
};

inline void require_l_max(int l_max)
{
    if (l_max < 0)
        throw InvalidParameter("OAM: l_max must be >= 0");
}

inline OamPartition oam_partition_function(double beta, int l_max, double omega = 1.0)
{
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw InvalidParameter("oam_partition_function: beta must be finite and > 0");
    require_l_max(l_max);
    const double x = beta * omega;
    double direct = std::exp(-x);
    // Smallest terms first.
    double pairs = 0.0;
    for (int l = l_max; l >= 1; --l)
        pairs += std::exp(-x * (l + 1));
    direct += 2.0 * pairs;
    return {direct, std::exp(-x) / std::tanh(0.5 * x), std::exp(x) * std::tanh(0.5 * x)};
}

class OamEnsemble {
public:
    OamEnsemble(double beta, int l_max = default_l_max, double omega = 1.0) : beta_(beta), l_max_(l_max), omega_(omega)
    {
        require_l_max(l_max);
        if (!(omega > 0.0))
            throw InvalidParameter("OamEnsemble: omega must be > 0");
        partition_ = oam_partition_function(beta, l_max, omega).direct;
        probs_.resize(2 * l_max + 1);
        for (int l = 0; l <= l_max; ++l) {
            const double p = std::exp(-beta * omega * (l + 1)) / partition_;
            probs_(l_max + l) = p;
            probs_(l_max - l) = p;
        }
    }

    double beta() const noexcept { return beta_; }
    int l_max() const noexcept { return l_max_; }
    double omega() const noexcept { return omega_; }
    double partition_value() const noexcept { return partition_; }
    const RVector& probs() const noexcept { return probs_; }
    double prob(int l) const { return probs_(index(l)); }
    int index(int l) const
    {
        if (std::abs(l) > l_max_)
            throw InvalidParameter("OamEnsemble: |l| = " + std::to_string(std::abs(l)) + " beyond l_max");
        return l + l_max_;
    }

private:
    double beta_;
    int l_max_;
    double omega_;
    double partition_ = 0.0;
    RVector probs_;
};

/// -(1/beta) ln(Z_final / Z_initial) over the truncated mode set.
inline double oam_free_energy_change(double beta, int l_max, double omega_initial, double omega_final)
{
    return -std::log(oam_partition_function(beta, l_max, omega_final).direct
                     / oam_partition_function(beta, l_max, omega_initial).direct)
           / beta;
}

/// Column l_in of `transitions` holds p_{l_out | l_in}; columns must be
/// stochastic within 1e-9.
inline void require_stochastic(const RMatrix& transitions, int l_max)
{
    const Eigen::Index n = 2 * l_max + 1;
    if (transitions.rows() != n || transitions.cols() != n)
        throw InvalidDimension("OAM transitions must be (2 l_max + 1) square");
    if ((transitions.array() < 0.0).any() || !transitions.allFinite())
        throw ProcessValidityError("OAM transitions must be finite and nonnegative");
    for (Eigen::Index c = 0; c < n; ++c) {
        const double s = transitions.col(c).sum();
        if (std::abs(s - 1.0) > stochastic_tol)
            throw ProcessValidityError("OAM transitions: column l = " + std::to_string(c - l_max) + " sums to "
                                       + format_double(s));
    }
}

/// W = (|l'| + 1) omega_final - (|l| + 1) omega_initial, weighted by p_l p_{l'|l}.
inline WorkDistribution oam_work_distribution(const OamEnsemble& ensemble, const RMatrix& transitions,
                                              double omega_final = -1.0)
{
    const int l_max = ensemble.l_max();
    require_stochastic(transitions, l_max);
    const double wf = omega_final < 0.0 ? ensemble.omega() : omega_final;
    std::vector<WorkAtom> raw;
    for (int l = -l_max; l <= l_max; ++l)
        for (int lp = -l_max; lp <= l_max; ++lp)
            raw.push_back({lg_energy(lp, 0) * wf - lg_energy(l, 0) * ensemble.omega(),
                           ensemble.prob(l) * transitions(lp + l_max, l + l_max)});
    return WorkDistribution::merge(std::move(raw));
}

inline WorkDistribution oam_work_distribution(double beta, int l_max, const RMatrix& transitions)
{
    return oam_work_distribution(OamEnsemble(beta, l_max), transitions);
}

/// Born-rule histogram of a mode-sorter measurement over the amplitudes' modes.
inline RVector mode_sorter_histogram(const CVector& amplitudes)
{
    const double norm = amplitudes.squaredNorm();
    if (!(norm > 0.0) || !std::isfinite(norm))
        throw StateValidityError("mode_sorter_histogram: amplitudes must be finite and not all zero");
    return amplitudes.cwiseAbs2() / norm;
}

/// Transition matrix from [{"l_in": .., "l_out": .., "probability": ..}, ...];
/// absent pairs are zero.
inline RMatrix transitions_from_json(const nlohmann::json& entries, int l_max)
{
    require_l_max(l_max);
    if (!entries.is_array())
        throw ConfigError("OAM transitions must be a JSON array");
    const int n = 2 * l_max + 1;
    RMatrix t = RMatrix::Zero(n, n);
    std::vector<bool> seen(static_cast<std::size_t>(n * n), false);
    for (const auto& e : entries) {
        if (!e.is_object() || e.size() != 3 || !e.contains("l_in") || !e.contains("l_out")
            || !e.contains("probability"))
            throw ConfigError("OAM transition entries need exactly l_in, l_out, probability");
        if (!e["l_in"].is_number_integer() || !e["l_out"].is_number_integer() || !e["probability"].is_number())
            throw ConfigError("OAM transition entry has wrongly typed fields");
        const int li = e["l_in"].get<int>();
        const int lo = e["l_out"].get<int>();
        if (std::abs(li) > l_max || std::abs(lo) > l_max)
            throw ConfigError("OAM transition entry beyond l_max");
        const auto key = static_cast<std::size_t>((lo + l_max) * n + (li + l_max));
        if (seen[key])
            throw ConfigError("duplicate OAM transition " + std::to_string(li) + " -> " + std::to_string(lo));
        seen[key] = true;
        t(lo + l_max, li + l_max) = e["probability"].get<double>();
    }
    require_stochastic(t, l_max);
    return t;
}

inline nlohmann::json transitions_to_json(const RMatrix& transitions, int l_max)
{
    nlohmann::json out = nlohmann::json::array();
    for (int li = -l_max; li <= l_max; ++li)
        for (int lo = -l_max; lo <= l_max; ++lo) {
            const double p = transitions(lo + l_max, li + l_max);
            if (p != 0.0)
                out.push_back({{"l_in", li}, {"l_out", lo}, {"probability", p}});
        }
    return out;
}

} // namespace qthermo
