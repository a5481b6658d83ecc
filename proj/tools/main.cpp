// volimm: scenario runner and invariant checker for the volume-preserving
// immersion library.
//
//   volimm run <scenario.json>       execute one scenario
//   volimm check                     run the invariant suite
//   volimm plotdata <run-dir>        emit plot-ready files for a finished run
//   volimm sweep <scenario.json>     run a parameter sweep
//
// Exit codes: 0 success, 2 invalid input, 3 numerical failure.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "volimm/checks.hpp"
#include "volimm/run.hpp"

namespace {

volimm::Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw volimm::ConfigError("cannot read scenario file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return volimm::parse_scenario(buf.str());
}

void print_summary(const volimm::RunRecord& rec) {
    std::cout << (rec.failed ? "FAILED" : "ok") << "  " << rec.scenario.name << "\n";
    for (const auto& [k, v] : rec.summary)
        std::cout << "  " << k << " = " << volimm::io::fmt(v) << "\n";
    if (rec.failed) std::cout << "  failure: " << rec.failure << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"geometry of volume-preserving immersions: scenario runner"};
    app.require_subcommand(1);

    std::string scenario_path, run_dir, out_override, kind = "auto";
    std::int64_t seed_override = -1;
    int threads = 1;

    CLI::App* cmd_run = app.add_subcommand("run", "execute one scenario");
    cmd_run->add_option("scenario", scenario_path, "scenario JSON file")->required();
    cmd_run->add_option("--out", out_override, "override the output directory");
    cmd_run->add_option("--seed", seed_override, "override the scenario seed");

    CLI::App* cmd_check = app.add_subcommand("check", "run the invariant suite");

    CLI::App* cmd_plot = app.add_subcommand("plotdata", "emit plot-ready data");
    cmd_plot->add_option("run_dir", run_dir, "directory of a finished run")->required();
    cmd_plot->add_option("--kind", kind,
                         "auto | curves | fields | invariants | convergence");

    CLI::App* cmd_sweep = app.add_subcommand("sweep", "run a parameter sweep");
    cmd_sweep->add_option("scenario", scenario_path, "scenario JSON file with sweep axes")
        ->required();
    cmd_sweep->add_option("--threads", threads, "worker threads for the sweep");
    cmd_sweep->add_option("--out", out_override, "override the output directory");
    cmd_sweep->add_option("--seed", seed_override, "override the scenario seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_run->parsed()) {
            volimm::Scenario sc = load_scenario(scenario_path);
            if (!out_override.empty()) sc.out_dir = out_override;
            if (seed_override >= 0) sc.seed = static_cast<std::uint64_t>(seed_override);
            volimm::RunRecord rec = volimm::run_scenario(sc);
            print_summary(rec);
            return rec.failed ? 3 : 0;
        }
        if (cmd_check->parsed()) {
            auto results = volimm::run_invariant_suite(std::cout);
            for (const auto& r : results)
                if (!r.pass) return 3;
            return 0;
        }
        if (cmd_plot->parsed()) {
            volimm::emit_plotdata(run_dir, kind);
            return 0;
        }
        if (cmd_sweep->parsed()) {
            volimm::Scenario sc = load_scenario(scenario_path);
            if (!out_override.empty()) sc.out_dir = out_override;
            if (seed_override >= 0) sc.seed = static_cast<std::uint64_t>(seed_override);
            auto records = volimm::run_sweep(sc, threads);
            bool any_failed = false;
            for (const auto& rec : records) {
                print_summary(rec);
                any_failed = any_failed || rec.failed;
            }
            return any_failed ? 3 : 0;
        }
    } catch (const volimm::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const volimm::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
