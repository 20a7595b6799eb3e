#pragma once

// Config parsing and experiment runners behind the qthermo CLI. Every runner
// computes in memory and returns its artifacts; nothing touches the disk
// until the whole run has succeeded.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qthermo/charfn.hpp"
#include "qthermo/oam.hpp"
#include "qthermo/paraxial.hpp"
#include "qthermo/photonic.hpp"
#include "qthermo/table1.hpp"

namespace qthermo::cli {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* version = QTHERMO_VERSION;

enum ExitCode : int { exit_ok = 0, exit_failure = 1, exit_validation = 2, exit_convergence = 3 };

// ---------------------------------------------------------------------------
// Strict JSON access

/// Reads keys from one JSON object and rejects the ones nobody asked for.
class Params {
public:
    Params(const json& j, std::string where) : j_(j), where_(std::move(where))
    {
        if (!j_.is_object())
            throw ConfigError(where_ + " must be a JSON object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt)
    {
        const json* v = fetch(key, fallback.has_value());
        if (!v)
            return *fallback;
        if (!v->is_number())
            throw ConfigError(path(key) + " must be a number");
        const double d = v->get<double>();
        if (!std::isfinite(d))
            throw ConfigError(path(key) + " must be finite");
        return d;
    }

    std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt)
    {
        const json* v = fetch(key, fallback.has_value());
        if (!v)
            return *fallback;
        if (!v->is_number_integer())
            throw ConfigError(path(key) + " must be an integer");
        return v->get<std::int64_t>();
    }

    std::uint64_t unsigned_integer(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt)
    {
        const json* v = fetch(key, fallback.has_value());
        if (!v)
            return *fallback;
        if (!v->is_number_unsigned())
            throw ConfigError(path(key) + " must be a non-negative integer");
        return v->get<std::uint64_t>();
    }

    bool boolean(const std::string& key, std::optional<bool> fallback = std::nullopt)
    {
        const json* v = fetch(key, fallback.has_value());
        if (!v)
            return *fallback;
        if (!v->is_boolean())
            throw ConfigError(path(key) + " must be true or false");
        return v->get<bool>();
    }

    std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt)
    {
        const json* v = fetch(key, fallback.has_value());
        if (!v)
            return *fallback;
        if (!v->is_string())
            throw ConfigError(path(key) + " must be a string");
        return v->get<std::string>();
    }

    std::vector<double> numbers(const std::string& key)
    {
        const json* v = fetch(key, false);
        if (!v->is_array() || v->empty())
            throw ConfigError(path(key) + " must be a non-empty array of numbers");
        std::vector<double> out;
        for (const auto& e : *v) {
            if (!e.is_number())
                throw ConfigError(path(key) + " must contain only numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    const json& raw(const std::string& key) { return *fetch(key, false); }

    Params object(const std::string& key) { return Params(*fetch(key, false), path(key)); }

    /// Throws on any key that was never read.
    void finish() const
    {
        for (const auto& [k, _] : j_.items())
            if (!used_.count(k))
                throw ConfigError("unknown key " + path(k));
    }

private:
    const json* fetch(const std::string& key, bool optional)
    {
        used_.insert(key);
        if (!j_.contains(key)) {
            if (optional)
                return nullptr;
            throw ConfigError("missing key " + path(key));
        }
        return &j_.at(key);
    }
    std::string path(const std::string& key) const { return where_ + "." + key; }

    const json& j_;
    std::string where_;
    std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Config

inline const std::vector<std::string>& experiment_kinds()
{
    static const std::vector<std::string> k{"table1", "work_dist", "charfn", "oam", "demon", "thermometer",
                                            "paraxial_check"};
    return k;
}

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> dim;
    std::optional<std::string> out;
    std::string format = "csv";
};

struct ExperimentConfig {
    std::string kind;
    json parameters = json::object();
    std::string output_dir;
    std::uint64_t rng_seed = 0;
    ConvergenceOptions truncation;
    json echo; ///< the config as effectively run, minus the output location
};

inline ExperimentConfig parse_config(const json& j, const Overrides& ov = {})
{
    Params top(j, "config");
    ExperimentConfig c;
    c.kind = top.string("kind");
    if (std::find(experiment_kinds().begin(), experiment_kinds().end(), c.kind) == experiment_kinds().end())
        throw ConfigError("config.kind '" + c.kind + "' is not one of table1, work_dist, charfn, oam, demon, "
                          "thermometer, paraxial_check");
    c.parameters = top.has("parameters") ? top.raw("parameters") : json::object();
    if (!c.parameters.is_object())
        throw ConfigError("config.parameters must be a JSON object");
    c.output_dir = top.string("output_dir", "out/" + c.kind);
    c.rng_seed = top.unsigned_integer("rng_seed", 0);
    if (top.has("truncation")) {
        Params t = top.object("truncation");
        c.truncation.initial_dim = static_cast<int>(t.integer("initial_dim", default_fock_dim));
        c.truncation.max_dim = static_cast<int>(t.integer("max_dim", 1024));
        c.truncation.tolerance = t.number("tolerance", 1e-9);
        t.finish();
    }
    top.finish();

    if (ov.seed)
        c.rng_seed = *ov.seed;
    if (ov.dim) {
        c.truncation.initial_dim = *ov.dim;
        c.truncation.max_dim = std::max(c.truncation.max_dim, 2 * *ov.dim);
    }
    if (ov.out)
        c.output_dir = *ov.out;
    require_dim(c.truncation.initial_dim);
    if (c.truncation.max_dim < c.truncation.initial_dim)
        throw ConfigError("config.truncation.max_dim must be >= initial_dim");
    if (!(c.truncation.tolerance > 0.0))
        throw ConfigError("config.truncation.tolerance must be > 0");

    c.echo = {{"kind", c.kind},
              {"parameters", c.parameters},
              {"rng_seed", c.rng_seed},
              {"truncation",
               {{"initial_dim", c.truncation.initial_dim},
                {"max_dim", c.truncation.max_dim},
                {"tolerance", c.truncation.tolerance}}}};
    return c;
}

inline ExperimentConfig load_config(const std::string& path, const Overrides& ov = {})
{
    std::ifstream is(path);
    if (!is)
        throw ConfigError("cannot read config " + path);
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return parse_config(j, ov);
}

// ---------------------------------------------------------------------------
// Artifacts

/// Tabular output rendered as CSV (header + rows) or a JSON array of objects.
struct Table {
    std::string name; ///< file stem
    std::vector<std::string> columns;
    std::vector<std::vector<json>> rows;

    static std::string cell(const json& v)
    {
        if (v.is_number_float())
            return format_double(v.get<double>());
        if (v.is_string())
            return v.get<std::string>();
        if (v.is_null())
            return "";
        return v.dump();
    }

    std::string render(const std::string& format) const
    {
        if (format == "json") {
            json arr = json::array();
            for (const auto& r : rows) {
                json o = json::object();
                for (std::size_t k = 0; k < columns.size(); ++k)
                    o[columns[k]] = r[k];
                arr.push_back(o);
            }
            return arr.dump(2) + "\n";
        }
        std::ostringstream os;
        for (std::size_t k = 0; k < columns.size(); ++k)
            os << (k ? "," : "") << columns[k];
        os << '\n';
        for (const auto& r : rows) {
            for (std::size_t k = 0; k < r.size(); ++k)
                os << (k ? "," : "") << cell(r[k]);
            os << '\n';
        }
        return os.str();
    }
};

struct RunOutput {
    json results = json::object();
    std::vector<Table> tables;
    std::vector<std::pair<std::string, std::string>> blobs; ///< (file name, bytes)
};

inline Table distribution_table(const std::string& name, const WorkDistribution& d)
{
    Table t{name, {"work", "probability"}, {}};
    for (const auto& a : d.atoms())
        t.rows.push_back({a.work, a.probability});
    return t;
}

/// Writes every artifact into a staging directory, then moves the files into place.
inline void write_artifacts(const ExperimentConfig& cfg, const RunOutput& out, const std::string& format)
{
    json doc = {{"version", version},
                {"kind", cfg.kind},
                {"rng_seed", cfg.rng_seed},
                {"config", cfg.echo},
                {"results", out.results}};
    std::vector<std::pair<std::string, std::string>> files;
    files.emplace_back("results.json", doc.dump(2) + "\n");
    files.emplace_back("config.json", cfg.echo.dump(2) + "\n");
    for (const auto& t : out.tables)
        files.emplace_back(t.name + (format == "json" ? ".json" : ".csv"), t.render(format));
    for (const auto& b : out.blobs)
        files.push_back(b);

    const fs::path dir(cfg.output_dir);
    const fs::path stage = dir.string() + ".partial";
    fs::remove_all(stage);
    fs::create_directories(stage);
    for (const auto& [name, bytes] : files) {
        std::ofstream os(stage / name, std::ios::binary);
        os << bytes;
        if (!os)
            throw Error("cannot write " + (stage / name).string());
    }
    fs::create_directories(dir);
    for (const auto& [name, _] : files)
        fs::rename(stage / name, dir / name);
    fs::remove_all(stage);
}

// ---------------------------------------------------------------------------
// Runners

inline QuenchSpec parse_quench(Params p)
{
    QuenchSpec q;
    q.omega = p.number("omega", 1.0);
    q.eta_mag = p.number("eta_mag", 0.0);
    q.eta_phase = p.number("eta_phase", 0.0);
    q.gamma_mag = p.number("gamma_mag", 0.0);
    q.gamma_phase = p.number("gamma_phase", 0.0);
    p.finish();
    q.validate();
    return q;
}

inline double positive(double v, const char* what)
{
    if (!(v > 0.0))
        throw ConfigError(std::string(what) + " must be > 0");
    return v;
}

inline RunOutput run_table1(const ExperimentConfig& cfg)
{
    Params p(cfg.parameters, "parameters");
    const bool replay = p.boolean("replay", true);
    p.finish();
    const Table1Report rep = table1_suite(cfg.truncation, replay);
    RunOutput out;
    out.results = to_json(rep);
    Table t{"table1",
            {"label", "dim", "work", "paper_work", "delta_f", "paper_delta_f", "jarzynski", "paper_jarzynski", "norm",
             "paper_norm", "sigma", "bare_work", "pass"},
            {}};
    for (const auto& r : rep.rows)
        t.rows.push_back({r.spec.label, r.dim, r.computed.work, r.spec.reference.work, r.computed.delta_f,
                          r.spec.reference.delta_f, r.computed.jarzynski, r.spec.reference.jarzynski, r.computed.norm,
                          r.spec.reference.norm, r.sigma, r.bare_work, r.pass() ? "PASS" : "FAIL"});
    out.tables.push_back(std::move(t));
    return out;
}

inline RunOutput run_work_dist(const ExperimentConfig& cfg)
{
    Params p(cfg.parameters, "parameters");
    const double beta = positive(p.number("beta"), "parameters.beta");
    const QuenchSpec qi = parse_quench(p.object("initial"));
    const QuenchSpec qf = parse_quench(p.object("final"));
    std::optional<double> width;
    int points = 0;
    double lo = 0.0, hi = 0.0;
    if (p.has("density")) {
        Params d = p.object("density");
        lo = d.number("min");
        hi = d.number("max");
        points = static_cast<int>(d.integer("points", 401));
        width = positive(d.number("width", 0.02), "parameters.density.width");
        d.finish();
        if (!(hi > lo) || points < 2)
            throw ConfigError("parameters.density needs max > min and points >= 2");
    }
    p.finish();

    const auto d0 = diagonalize(qi), dt = diagonalize(qf);
    const double df = free_energy_change(beta, d0, dt);
    const auto conv = converged_two_point(beta, d0, dt, cfg.truncation);
    const WorkDistribution dist = work_distribution(conv.value);
    const auto jar = jarzynski_average(dist, beta, df);
    const auto ep = entropy_production(dist, beta, df);

    RunOutput out;
    out.results = {{"dim", conv.dim},
                   {"convergence_change", conv.change},
                   {"mean_work", dist.mean()},
                   {"variance", dist.variance()},
                   {"delta_f", df},
                   {"exp_work", jar.exp_work},
                   {"jarzynski", jar.exp_dissipated},
                   {"sigma", ep.sigma},
                   {"normalization", dist.total_probability()},
                   {"mass_below_delta_f", dist.mass_below(df)},
                   {"atoms", dist.size()},
                   {"omega_prime_initial", d0.omega_prime()},
                   {"omega_prime_final", dt.omega_prime()}};
    out.tables.push_back(distribution_table("distribution", dist));
    if (width) {
        std::vector<double> grid(points);
        for (int k = 0; k < points; ++k)
            grid[k] = lo + (hi - lo) * k / (points - 1);
        const auto dens = broadened_density(dist, grid, *width);
        Table t{"density", {"work", "density"}, {}};
        for (int k = 0; k < points; ++k)
            t.rows.push_back({grid[k], dens[k]});
        out.tables.push_back(std::move(t));
    }
    return out;
}

inline RunOutput run_charfn(const ExperimentConfig& cfg)
{
    Params p(cfg.parameters, "parameters");
    const double beta = positive(p.number("beta"), "parameters.beta");
    const QuenchSpec qi = parse_quench(p.object("initial"));
    const QuenchSpec qf = parse_quench(p.object("final"));
    const std::int64_t requested = p.integer("points", 0);
    const double noise = p.number("noise", 0.0);
    const std::string method = p.string("method", "candidates");
    p.finish();
    if (requested < 0 || noise < 0.0)
        throw ConfigError("parameters.points and parameters.noise must be >= 0");
    if (method != "candidates" && method != "periodogram")
        throw ConfigError("parameters.method must be 'candidates' or 'periodogram'");

    const auto d0 = diagonalize(qi), dt = diagonalize(qf);
    const auto conv = converged_two_point(beta, d0, dt, cfg.truncation);
    const ThermalCharFn g(beta, d0, dt, conv.dim);
    const auto candidates = g.candidate_works();
    const double period = charfn_period(d0, dt);
    const int points = requested > 0 ? static_cast<int>(requested)
                                     : std::max(default_alpha_points, static_cast<int>(4 * candidates.size()));
    CharFnTrace trace = g.sample(uniform_alpha_grid(points, period));
    if (noise > 0.0) {
        std::mt19937_64 rng(cfg.rng_seed);
        std::normal_distribution<double> n(0.0, noise);
        for (auto& v : trace.values)
            v += cplx(n(rng), n(rng));
    }
    const Reconstruction rec = method == "candidates" ? reconstruct_work_distribution(trace, candidates)
                                                      : reconstruct_from_periodogram(trace);
    const WorkDistribution direct = work_distribution(conv.value);

    RunOutput out;
    out.results = {{"dim", conv.dim},
                   {"points", points},
                   {"period", period},
                   {"candidates", candidates.size()},
                   {"kept_input_modes", g.input_modes().size()},
                   {"g0", {{"re", trace.values.at(0).real()}, {"im", trace.values.at(0).imag()}}},
                   {"exp_work_from_g", g(cplx(0.0, beta)).real()},
                   {"residual_norm", rec.residual_norm},
                   {"raw_mass", rec.raw_mass},
                   {"sweeps", rec.sweeps},
                   {"max_atom_error", max_atom_difference(rec.distribution, direct)},
                   {"method", method},
                   {"noise", noise}};
    Table t{"trace", {"alpha", "re_g", "im_g", "intensity_0", "intensity_pi2"}, {}};
    for (std::size_t j = 0; j < trace.size(); ++j)
        t.rows.push_back({trace.alphas[j], trace.values[j].real(), trace.values[j].imag(),
                          trace.intensity(j, PhaseOffset::zero), trace.intensity(j, PhaseOffset::quarter)});
    out.tables.push_back(std::move(t));
    out.tables.push_back(distribution_table("reconstructed", rec.distribution));
    out.tables.push_back(distribution_table("direct", direct));
    return out;
}

inline RunOutput run_oam(const ExperimentConfig& cfg)
{
    Params p(cfg.parameters, "parameters");
    const double beta = positive(p.number("beta"), "parameters.beta");
    const int l_max = static_cast<int>(p.integer("l_max", default_l_max));
    const double omega = positive(p.number("omega", 1.0), "parameters.omega");
    const double omega_final = positive(p.number("omega_final", omega), "parameters.omega_final");
    require_l_max(l_max);
    RMatrix transitions;
    json source;
    if (p.has("transitions") == p.has("displacement"))
        throw ConfigError("parameters needs exactly one of 'transitions' or 'displacement'");
    if (p.has("transitions")) {
        transitions = transitions_from_json(p.raw("transitions"), l_max);
        source = {{"type", "table"}};
    } else {
        Params d = p.object("displacement");
        const double offset = d.number("offset_waists");
        const int grid_points = static_cast<int>(d.integer("grid_points", 256));
        const double window = positive(d.number("window_waists", default_window_waists), "window_waists");
        d.finish();
        const Grid g = Grid::for_waist(1.0, grid_points, window);
        const auto ov = transitions_from_overlaps(
            mode_overlap_matrix(lg_family(l_max, 1.0, g), lg_family(l_max, 1.0, g, {offset, 0.0})));
        transitions = ov.transitions;
        source = {{"type", "displaced_lg"},
                  {"offset_waists", offset},
                  {"min_captured_mass", ov.captured_mass.minCoeff()},
                  {"max_captured_mass", ov.captured_mass.maxCoeff()}};
    }
    p.finish();

    const auto z = oam_partition_function(beta, l_max, omega);
    const OamEnsemble ens(beta, l_max, omega);
    const WorkDistribution dist = oam_work_distribution(ens, transitions, omega_final);
    const double df = oam_free_energy_change(beta, l_max, omega, omega_final);

    RunOutput out;
    out.results = {{"partition",
                    {{"direct", z.direct},
                     {"closed_form", z.closed_form},
                     {"printed_form", z.printed},
                     {"printed_over_closed", z.printed_ratio()},
                     {"direct_minus_closed", z.direct - z.closed_form},
                     {"direct_minus_printed", z.direct - z.printed}}},
                   {"transitions", source},
                   {"mean_work", dist.mean()},
                   {"delta_f", df},
                   {"jarzynski", dist.exp_average(beta, df)},
                   {"normalization", dist.total_probability()}};
    out.tables.push_back(distribution_table("distribution", dist));
    out.blobs.emplace_back("transitions.json", transitions_to_json(transitions, l_max).dump(2) + "\n");
    return out;
}

inline json estimate_json(const MeanEstimate& e)
{
    if (e.count == 0)
        return nullptr;
    return {{"mean", e.mean}, {"stderr", e.stderr_}, {"count", e.count}};
}

inline RunOutput run_demon(const ExperimentConfig& cfg)
{
    Params p(cfg.parameters, "parameters");
    DemonConfig dc;
    dc.n_bar = p.number("n_bar", dc.n_bar);
    dc.bs_reflectivity = p.number("bs_reflectivity", dc.bs_reflectivity);
    dc.detector_efficiency = p.number("detector_efficiency", dc.detector_efficiency);
    dc.trials = p.unsigned_integer("trials", dc.trials);
    const std::uint64_t trace_trials = p.unsigned_integer("trace_trials", 0);
    p.finish();
    dc.rng_seed = cfg.rng_seed;
    dc.validate();

    Table trace{"demon_trace", {"trial", "n1", "n2", "t1", "t2", "click1", "click2", "polarity"}, {}};
    const DemonStats st = demon_run(dc, [&](std::uint64_t i, const DemonTrial& t) {
        if (i < trace_trials)
            trace.rows.push_back({i, t.photons[0], t.photons[1], t.transmitted[0], t.transmitted[1], t.click[0],
                                  t.click[1], t.polarity()});
    });
    RunOutput out;
    const auto g2 = st.g2();
    out.results = {{"trials", st.trials},
                   {"degenerate", st.degenerate()},
                   {"clicks", {st.clicks[0], st.clicks[1]}},
                   {"patterns",
                    {{"both", st.both}, {"neither", st.neither}, {"only_1", st.only_first}, {"only_2", st.only_second}}},
                   {"mean_photons", st.mean_photons()},
                   {"g2", {{"value", g2.mean}, {"stderr", g2.stderr_}}},
                   {"transmitted", estimate_json(st.transmitted())},
                   {"transmitted_given_click", estimate_json(st.transmitted_given_click())},
                   {"click_significance", st.degenerate() ? json(nullptr) : json(st.click_significance())},
                   {"intensity_difference", estimate_json(st.intensity_difference())},
                   {"conditional_difference", estimate_json(st.conditional_difference())},
                   {"charge", st.charge}};
    if (trace_trials > 0)
        out.tables.push_back(std::move(trace));
    return out;
}

inline QubitState named_input(const std::string& s)
{
    if (s == "V")
        return QubitState::vertical();
    if (s == "H")
        return QubitState::horizontal();
    if (s == "+")
        return QubitState::plus();
    throw ConfigError("parameters.input must be \"V\", \"H\" or \"+\"");
}

inline RunOutput run_thermometer(const ExperimentConfig& cfg)
{
    Params p(cfg.parameters, "parameters");
    const QubitState input = named_input(p.string("input", "V"));
    const double q_hot = p.number("q_hot"), q_cold = p.number("q_cold");
    const std::vector<double> ps = p.numbers("p_values");
    const std::uint64_t shots = p.unsigned_integer("shots", 10000);
    p.finish();
    for (double v : ps)
        if (!(v >= 0.0 && v <= 1.0))
            throw ConfigError("parameters.p_values must lie in [0, 1]");
    gad_kraus(0.0, q_hot);
    gad_kraus(0.0, q_cold);

    Table t{"thermometer", {"p", "signal", "helstrom", "success", "stderr"}, {}};
    double best_p = ps.front(), best = -1.0;
    for (std::size_t k = 0; k < ps.size(); ++k) {
        std::seed_seq seq{static_cast<std::uint32_t>(cfg.rng_seed), static_cast<std::uint32_t>(cfg.rng_seed >> 32),
                          static_cast<std::uint32_t>(k)};
        std::mt19937_64 rng(seq);
        const auto r = thermometer_discriminate(input, ps[k], q_hot, q_cold, shots, rng);
        t.rows.push_back({r.p, r.signal, r.helstrom, r.success(), r.success_stderr()});
        if (r.helstrom > best) {
            best = r.helstrom;
            best_p = r.p;
        }
    }
    RunOutput out;
    out.results = {{"q_hot", q_hot},
                   {"q_cold", q_cold},
                   {"shots", shots},
                   {"argmax_p_helstrom", best_p},
                   {"max_helstrom", best}};
    out.tables.push_back(std::move(t));
    return out;
}

inline std::string field_bytes(const FieldGrid& f, bool image)
{
    std::ostringstream os(std::ios::binary);
    if (image)
        write_intensity_pgm(os, f);
    else
        write_field_binary(os, f);
    return os.str();
}

inline RunOutput run_paraxial_check(const ExperimentConfig& cfg)
{
    Params p(cfg.parameters, "parameters");
    SquareLawMedium m;
    m.n0 = p.number("n0", 1.5);
    m.alpha_medium = positive(p.number("alpha", 1.0), "parameters.alpha");
    m.k0 = p.number("k0", 200.0);
    const int points = static_cast<int>(p.integer("grid_points", default_grid_points));
    const double window = p.number("window_waists", default_window_waists);
    const int max_mode = static_cast<int>(p.integer("max_mode", 3));
    const int steps = static_cast<int>(p.integer("steps", 1000));
    const int every = static_cast<int>(p.integer("record_every", 20));
    const bool export_fields = p.boolean("export_fields", true);
    p.finish();
    if (max_mode < 0 || steps < 2 * every || every < 1)
        throw ConfigError("parameters: need max_mode >= 0, record_every >= 1, steps >= 2 record_every");
    m.validate();
    const Grid g0 = Grid::for_waist(m.matched_waist(), points, window);
    m.require_positive_index(g0);

    const ParaxialReport rep = paraxial_check(m, points, window, max_mode, steps, every);
    RunOutput out;
    Table t{"eigenphase", {"n", "slope", "expected", "relative_error"}, {}};
    double worst = 0.0;
    for (std::size_t n = 0; n < rep.slopes.size(); ++n) {
        const double expect = -(static_cast<double>(n) + 1.0);
        const double rel = std::abs(rep.slopes[n] - expect) / std::abs(expect);
        worst = std::max(worst, rel);
        t.rows.push_back({static_cast<int>(n), rep.slopes[n], expect, rel});
    }
    out.results = {{"quantum", m.quantum()},
                   {"matched_waist", m.matched_waist()},
                   {"dz", max_step(m, g0)},
                   {"steps", rep.steps},
                   {"max_phase_relative_error", worst},
                   {"norm_drift", rep.norm_drift},
                   {"norm_drift_per_1000_steps", rep.norm_drift * 1000.0 / rep.steps},
                   {"gaussian_error", rep.gaussian_error}};
    out.tables.push_back(std::move(t));
    if (export_fields) {
        out.blobs.emplace_back("field_initial.bin", field_bytes(rep.initial, false));
        out.blobs.emplace_back("field_final.bin", field_bytes(rep.final_, false));
        out.blobs.emplace_back("intensity_final.pgm", field_bytes(rep.final_, true));
    }
    return out;
}

inline RunOutput run_experiment(const ExperimentConfig& cfg)
{
    if (cfg.kind == "table1")
        return run_table1(cfg);
    if (cfg.kind == "work_dist")
        return run_work_dist(cfg);
    if (cfg.kind == "charfn")
        return run_charfn(cfg);
    if (cfg.kind == "oam")
        return run_oam(cfg);
    if (cfg.kind == "demon")
        return run_demon(cfg);
    if (cfg.kind == "thermometer")
        return run_thermometer(cfg);
    return run_paraxial_check(cfg);
}

} // namespace qthermo::cli
