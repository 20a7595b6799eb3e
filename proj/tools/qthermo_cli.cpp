#include <cstdio>
#include <functional>
#include <iostream>
#include <utility>

#include <CLI11.hpp>

#include "experiments.hpp"

using namespace qthermo;
using namespace qthermo::cli;

namespace {

// Fast sanity checks, one line each.
int selftest()
{
    std::vector<std::pair<std::string, std::function<bool()>>> checks{
        {"displacement unitary on the trusted block",
         [] { return unitarity_defect(displacement_operator({0.4, -0.2}, 64), 32) < unitarity_tol; }},
        {"displacement quench satisfies Jarzynski",
         [] {
             const auto a = diagonalize({}), b = diagonalize({.eta_mag = 0.3});
             const auto d = work_distribution(1.0, a, b, 128);
             return std::abs(d.exp_average(1.0, free_energy_change(1.0, a, b)) - 1.0) < 1e-10;
         }},
        {"OAM partition function equals its geometric series",
         [] {
             const double x = std::exp(-1.0);
             return std::abs(oam_partition_function(1.0, 40).direct - x * (1 + x) / (1 - x)) < 1e-12;
         }},
        {"GAD channel preserves trace",
         [] {
             return std::abs(gad_channel(QubitState::plus(), 0.3, 0.7).matrix().trace().real() - 1.0) < 1e-12;
         }},
        {"demon replays bit for bit",
         [] {
             DemonConfig c;
             c.trials = 5000;
             c.rng_seed = 7;
             return demon_run(c) == demon_run(c);
         }},
        {"free Gaussian follows the diffraction law",
         [] {
             const double w = 0.05, k0 = 400.0;
             const Grid g = Grid::for_waist(w, 64);
             const FieldGrid out = free_propagate(hg_mode(0, w, g), k0, 0.5 * k0 * w * w);
             return std::abs(rms_radius(out) / rms_radius(hg_mode(0, w, g)) - std::sqrt(2.0)) < 1e-6;
         }},
    };
    bool all = true;
    for (const auto& [name, check] : checks) {
        bool ok = false;
        try {
            ok = check();
        } catch (const std::exception& e) {
            std::cerr << name << ": " << e.what() << '\n';
        }
        std::cout << (ok ? "PASS " : "FAIL ") << name << '\n';
        all = all && ok;
    }
    return all ? exit_ok : exit_failure;
}

void print_table1(const RunOutput& out)
{
    std::cout << out.tables.front().render("csv");
}

template <class F>
int guarded(F&& body)
{
    try {
        return body();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_validation;
    } catch (const ConvergenceError& e) {
        std::cerr << "convergence error: " << e.what() << '\n';
        return exit_convergence;
    } catch (const ConditioningError& e) {
        std::cerr << "conditioning error: " << e.what() << '\n';
        return exit_convergence;
    } catch (const WindowError& e) {
        std::cerr << "window error: " << e.what() << '\n';
        return exit_convergence;
    } catch (const Error& e) {
        // Remaining library errors reject the requested parameters.
        std::cerr << "invalid input: " << e.what() << '\n';
        return exit_validation;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_validation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_failure;
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"qthermo: work statistics of driven oscillators and their optical analogues"};
    app.set_version_flag("--version", std::string(version));
    app.require_subcommand(1);

    Overrides ov;
    std::uint64_t seed = 0;
    int dim = 0;
    std::string out_dir;
    app.add_option("--seed", seed, "override rng_seed");
    app.add_option("--dim", dim, "initial Fock truncation for the convergence loop")->check(CLI::Range(2, 1 << 14));
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--format", ov.format, "tabular artifact format")->check(CLI::IsMember({"csv", "json"}));

    std::string config_path;
    auto* run = app.add_subcommand("run", "run one experiment from a JSON config");
    run->add_option("config", config_path, "config file")->required();
    auto* table1 = app.add_subcommand("table1", "reproduce the free-energy table");
    auto* self = app.add_subcommand("selftest", "quick internal consistency checks");
    for (auto* sub : {run, table1, self})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_validation;
    }
    if (app.count("--seed"))
        ov.seed = seed;
    if (app.count("--dim"))
        ov.dim = dim;
    if (app.count("--out"))
        ov.out = out_dir;

    if (*self)
        return selftest();

    return guarded([&] {
        ExperimentConfig cfg;
        if (*table1)
            cfg = parse_config({{"kind", "table1"}}, ov);
        else
            cfg = load_config(config_path, ov);
        const RunOutput out = run_experiment(cfg);
        if (*table1) {
            print_table1(out);
            if (!ov.out)
                return int{exit_ok};
        }
        write_artifacts(cfg, out, ov.format);
        std::cerr << "wrote " << cfg.output_dir << '\n';
        return int{exit_ok};
    });
}
