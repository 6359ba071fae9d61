// qgol: command-line runner for the quantum Game of Life experiments.
//
//   qgol evolve    --initial 00001010000 --tmax 30 --measures all --out runs/blinker
//   qgol classical --initial 00001010000 --steps 20 --out runs/cone
//   qgol ensemble  --length 16 --density 0.25,0.5 --samples 32 --seed 7 --out runs/eq
//
// Errors go to stderr as a one-line JSON record and give a nonzero exit code.

#include "qgol/experiment.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <iostream>
#include <map>
#include <string>

namespace {

int fail(const std::string& kind, const std::string& message, int code)
{
    std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
    return code;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Quantum Game of Life spin-chain experiments"};
    app.set_version_flag("--version", std::string(qgol::version_string));
    app.require_subcommand(1);

    // Flag values are kept as raw strings and applied on top of the config
    // file through the same key-value parser.
    std::map<std::string, std::string> overrides;
    std::string config_path;

    const std::map<std::string, std::string> descriptions{
        {"length", "Lattice size L"},
        {"initial", "Initial bitstring, site 1 leftmost"},
        {"density", "Initial density rho(0), comma separated for ensembles"},
        {"tmax", "Final time"},
        {"dt", "RK4 time step (default 0.01)"},
        {"sample-every", "Record every n-th integration step"},
        {"steps", "Classical or stroboscopic steps"},
        {"samples", "Samples per density"},
        {"seed", "Master seed for random initial states"},
        {"measures", "populations,discretized,clusters,diversity,entropies,bond,mi,network,concurrence or all"},
        {"distances", "Concurrence distances, comma separated"},
        {"bonds", "Bonds for bond entropy, comma separated (default all)"},
        {"window", "Quantum averaging window begin,end"},
        {"classical-window", "Classical averaging window begin,end"},
        {"period", "Ring size for circulant runs"},
        {"hopping", "Ring hopping amplitude J"},
        {"workers", "Worker threads for ensembles"},
        {"out", "Output directory"},
    };

    const std::vector<std::pair<std::string, std::string>> commands{
        {"evolve", "Quantum RK4 evolution from a Fock state"},
        {"classical", "Classical F12 cellular automaton"},
        {"strobe", "Stroboscopic quantum protocol"},
        {"ensemble", "Random Fock ensembles and equilibrium averages"},
        {"circulant", "Ring model of a classical cycle"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "Key-value config file")->check(CLI::ExistingFile);
        for (const auto& [key, desc] : descriptions)
            sub->add_option_function<std::string>(
                "--" + key, [&overrides, key = key](const std::string& v) { overrides[key] = v; }, desc);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), 2);
    }

    try {
        qgol::RunConfig cfg;
        cfg.kind = qgol::parse_kind(app.get_subcommands().front()->get_name());
        if (!config_path.empty())
            qgol::apply_config_file(cfg, config_path);
        for (const auto& [key, value] : overrides)
            qgol::apply_setting(cfg, key, value);
        for (int k = 0; k < argc; ++k)
            cfg.command_line += (k ? " " : "") + std::string(argv[k]);

        const qgol::RunSummary s = qgol::run(cfg);
        nlohmann::json record{{"status", "ok"}, {"out", s.directory.string()}, {"summary", s.summary}};
        std::cout << record.dump() << '\n';
        return 0;
    } catch (const qgol::config_error& e) {
        return fail("config", e.what(), 2);
    } catch (const qgol::integration_error& e) {
        return fail("integration", e.what(), 3);
    } catch (const std::exception& e) {
        return fail("runtime", e.what(), 1);
    }
}
