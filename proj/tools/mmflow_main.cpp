// Command-line driver: loads a JSON experiment config, optionally overrides
// the job through a subcommand, executes it and writes the artifact
// directory.  Exit code 0 iff the job completed and its hard checks passed.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mmflow/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"mmflow: minimizing-movement solver for nonlinear-mobility "
                 "evolution equations (1-D, cell-centered)"};
    app.fallthrough();
    app.require_subcommand(0, 1);

    std::string config_path;
    std::string out_dir = "out";
    int         threads = 1;
    unsigned    seed    = 0;
    app.add_option("-c,--config", config_path, "JSON experiment configuration")
        ->required()
        ->check(CLI::ExistingFile);
    app.add_option("-o,--out", out_dir, "artifact output directory");
    app.add_option("-t,--threads", threads, "max concurrent runs in a study")
        ->check(CLI::PositiveNumber);
    app.add_option("--seed", seed,
                   "accepted for interface compatibility; every algorithm here "
                   "is deterministic and no randomness is consumed");

    CLI::App* sc_run   = app.add_subcommand("run", "single scheme run");
    CLI::App* sc_study = app.add_subcommand("convergence-study",
                                            "scheme runs over the whole tau list");
    CLI::App* sc_cmp   = app.add_subcommand("compare-reference",
                                            "scheme runs against the explicit "
                                            "finite-volume reference");
    CLI::App* sc_dist  = app.add_subcommand("distance",
                                            "squared transport distance between "
                                            "initial and initial_b");
    CLI::App* sc_adm   = app.add_subcommand("check-admissibility",
                                            "structural checks of the configured "
                                            "mobility");

    CLI11_PARSE(app, argc, argv);

    try {
        mmflow::ExperimentConfig cfg = mmflow::load_config(config_path);
        if (sc_run->parsed()) cfg.job = mmflow::JobKind::run;
        if (sc_study->parsed()) cfg.job = mmflow::JobKind::convergence_study;
        if (sc_cmp->parsed()) cfg.job = mmflow::JobKind::compare_reference;
        if (sc_dist->parsed()) cfg.job = mmflow::JobKind::distance;
        if (sc_adm->parsed()) cfg.job = mmflow::JobKind::check_admissibility;
        if (cfg.job == mmflow::JobKind::distance && !cfg.initial_b)
            throw mmflow::ConfigError("/initial_b",
                                      "the distance job needs a second endpoint");

        const mmflow::RunOutcome out = mmflow::execute(cfg, out_dir, threads);
        if (!out.failure.empty()) std::cerr << "failure: " << out.failure << "\n";
        std::cout << mmflow::job_kind_name(cfg.job) << ": artifacts in " << out_dir
                  << (out.exit_code == 0 ? " (ok)" : " (failed)") << "\n";
        return out.exit_code;
    } catch (const mmflow::ConfigError& e) {
        std::cerr << "config error at " << e.pointer() << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
