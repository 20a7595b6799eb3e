#pragma once

// Free-energy benchmark: four sudden quenches of a driven/squeezed oscillator
// (omega = 1, lambda(t_I) = 0) compared with published two-decimal values.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qthermo/quench.hpp"
#include "qthermo/tpm.hpp"

namespace qthermo {

/// |computed - printed| <= 0.01; the 1e-12 absorbs two-decimal literals in binary.
inline constexpr double table_tolerance = 0.01 + 1e-12;
inline constexpr double jarzynski_tolerance = 1e-6;
inline constexpr double replay_tolerance = 1e-6;

struct TableValues {
    double work;
    double delta_f;
    double jarzynski; ///< <e^{-beta (W - dF)}>
    double norm;
};

struct TableRowSpec {
    std::string label;
    double beta;
    QuenchSpec initial;
    QuenchSpec final_;
    bool has_reference = true;
    TableValues reference{};
};

struct TableRowResult {
    TableRowSpec spec;
    int dim = 0;
    TableValues computed{};
    double sigma = 0.0;
    double mass_below_df = 0.0;
    /// <W> and <e^{-beta(W - dF)}> with bare-frequency populations e^{-beta omega n}.
    double bare_work = 0.0;
    double bare_jarzynski = 0.0;
    /// Largest change of the computed values at twice the truncation (NaN if skipped).
    double replay_change = std::numeric_limits<double>::quiet_NaN();

    bool value_pass(int k) const
    {
        if (!spec.has_reference)
            return true;
        const std::array<double, 4> c{computed.work, computed.delta_f, computed.jarzynski, computed.norm};
        const std::array<double, 4> r{spec.reference.work, spec.reference.delta_f, spec.reference.jarzynski,
                                      spec.reference.norm};
        return std::abs(c[k] - r[k]) <= table_tolerance;
    }
    bool jarzynski_pass() const { return std::abs(computed.jarzynski - 1.0) <= jarzynski_tolerance; }
    bool replay_pass() const { return std::isnan(replay_change) || replay_change <= replay_tolerance; }
    bool pass() const
    {
        return value_pass(0) && value_pass(1) && value_pass(2) && value_pass(3) && jarzynski_pass() && replay_pass();
    }
};

inline QuenchSpec displaced(double eta) { return {1.0, eta, 0.0, 0.0, 0.0}; }
inline QuenchSpec squeezed(double gamma) { return {1.0, 0.0, 0.0, gamma, 0.0}; }

/// Rows (beta omega, lambda(t_F), gamma(t_I), gamma(t_F)) with their printed values.
inline std::vector<TableRowSpec> table1_rows()
{
    return {
        {"beta=1 lambda=0.3", 1.0, displaced(0.0), displaced(0.3), true, {0.0, -0.09, 1.00, 1.00}},
        {"beta=1 lambda=0.5", 1.0, displaced(0.0), displaced(0.5), true, {0.0, -0.25, 1.00, 1.00}},
        {"beta=0.5 gamma 0->0.3", 0.5, squeezed(0.0), squeezed(0.3), true, {0.0, -0.45, 0.99, 1.00}},
        {"beta=0.5 gamma 0.3->0", 0.5, squeezed(0.3), squeezed(0.0), true, {0.92, 0.45, 1.00, 1.00}},
    };
}

/// Identity quench: every value is exactly 0 or 1.
inline TableRowSpec identity_sentinel()
{
    return {"identity", 1.0, displaced(0.0), displaced(0.0), true, {0.0, 0.0, 1.0, 1.0}};
}

inline TableValues table_values(const TwoPointProtocol& tp, double delta_f)
{
    const WorkDistribution d = work_distribution(tp);
    return {d.mean(), delta_f, d.exp_average(tp.beta, delta_f), d.total_probability()};
}

inline double max_change(const TableValues& a, const TableValues& b)
{
    return std::max({std::abs(a.work - b.work), std::abs(a.delta_f - b.delta_f), std::abs(a.jarzynski - b.jarzynski),
                     std::abs(a.norm - b.norm)});
}

inline TableRowResult evaluate_row(const TableRowSpec& row, const ConvergenceOptions& opt = {}, bool replay = true)
{
    const auto d0 = diagonalize(row.initial);
    const auto dt = diagonalize(row.final_);
    const double df = free_energy_change(row.beta, d0, dt);
    const auto conv = converged_two_point(row.beta, d0, dt, opt);
    const TwoPointProtocol& tp = conv.value;

    TableRowResult out;
    out.spec = row;
    out.dim = conv.dim;
    out.computed = table_values(tp, df);
    const WorkDistribution dist = work_distribution(tp);
    out.sigma = entropy_production(dist, row.beta, df).sigma;
    out.mass_below_df = dist.mass_below(df);

    RVector bare(tp.eps_initial.size());
    for (Eigen::Index n = 0; n < bare.size(); ++n)
        bare(n) = std::exp(-row.beta * row.initial.omega * static_cast<double>(n));
    bare /= bare.sum();
    const WorkDistribution bare_dist = work_distribution_from(bare, tp.transitions, tp.eps_initial, tp.eps_final);
    out.bare_work = bare_dist.mean();
    out.bare_jarzynski = bare_dist.exp_average(row.beta, df);

    if (replay) {
        const auto doubled = prepare_two_point(row.beta, d0, dt, 2 * conv.dim);
        out.replay_change = max_change(table_values(doubled, df), out.computed);
    }
    return out;
}

struct Table1Report {
    std::vector<TableRowResult> rows; ///< the four published rows, then the identity sentinel
    bool pass() const
    {
        for (const auto& r : rows)
            if (!r.pass())
                return false;
        return true;
    }
};

inline Table1Report table1_suite(const ConvergenceOptions& opt = {}, bool replay = true)
{
    Table1Report rep;
    for (const auto& row : table1_rows())
        rep.rows.push_back(evaluate_row(row, opt, replay));
    rep.rows.push_back(evaluate_row(identity_sentinel(), opt, replay));
    return rep;
}

inline nlohmann::json to_json(const TableRowResult& r)
{
    nlohmann::json j;
    j["label"] = r.spec.label;
    j["beta"] = r.spec.beta;
    j["dim"] = r.dim;
    j["computed"] = {{"work", r.computed.work},
                     {"delta_f", r.computed.delta_f},
                     {"jarzynski", r.computed.jarzynski},
                     {"norm", r.computed.norm}};
    if (r.spec.has_reference)
        j["paper"] = {{"work", r.spec.reference.work},
                      {"delta_f", r.spec.reference.delta_f},
                      {"jarzynski", r.spec.reference.jarzynski},
                      {"norm", r.spec.reference.norm}};
    j["pass"] = {{"work", r.value_pass(0)},
                 {"delta_f", r.value_pass(1)},
                 {"jarzynski", r.value_pass(2)},
                 {"norm", r.value_pass(3)},
                 {"internal_jarzynski", r.jarzynski_pass()},
                 {"replay", r.replay_pass()},
                 {"row", r.pass()}};
    j["sigma"] = r.sigma;
    j["mass_below_delta_f"] = r.mass_below_df;
    j["bare_population_diagnostic"] = {{"work", r.bare_work}, {"jarzynski", r.bare_jarzynski}};
    if (!std::isnan(r.replay_change))
        j["replay_change"] = r.replay_change;
    return j;
}

inline nlohmann::json to_json(const Table1Report& rep)
{
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : rep.rows)
        rows.push_back(to_json(r));
    return {{"rows", rows}, {"tolerance", table_tolerance}, {"pass", rep.pass()}};
}

/// Fixed column order: label,dim,work,paper_work,delta_f,paper_delta_f,
/// jarzynski,paper_jarzynski,norm,paper_norm,sigma,bare_work,replay_change,pass
inline void write_table_csv(std::ostream& os, const Table1Report& rep)
{
    os << "label,dim,work,paper_work,delta_f,paper_delta_f,jarzynski,paper_jarzynski,norm,paper_norm,sigma,"
          "bare_work,replay_change,pass\n";
    for (const auto& r : rep.rows) {
        os << r.spec.label << ',' << r.dim << ',' << format_double(r.computed.work) << ','
           << format_double(r.spec.reference.work) << ',' << format_double(r.computed.delta_f) << ','
           << format_double(r.spec.reference.delta_f) << ',' << format_double(r.computed.jarzynski) << ','
           << format_double(r.spec.reference.jarzynski) << ',' << format_double(r.computed.norm) << ','
           << format_double(r.spec.reference.norm) << ',' << format_double(r.sigma) << ','
           << format_double(r.bare_work) << ',' << (std::isnan(r.replay_change) ? "" : format_double(r.replay_change))
           << ',' << (r.pass() ? "PASS" : "FAIL") << '\n';
    }
}

} // namespace qthermo
