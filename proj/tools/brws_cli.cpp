#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "brws/errors.hpp"
#include "brws/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"branching random walk simulation and verification toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, records_path, plot_out;
    std::int64_t seed_override = -1;
    std::size_t workers = 0;

    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("--config", config_path, "experiment config (JSON)")->required();
    run->add_option("--seed", seed_override, "override the config's seed list with one seed");
    run->add_option("--workers", workers, "replica-level worker count");
    run->add_option("--out", out_dir, "output directory (overrides config and BRWS_OUT)");

    auto* plot = app.add_subcommand("plot-data", "emit tidy plot CSV from a records file");
    plot->add_option("--records", records_path, "records.jsonl produced by run")->required();
    plot->add_option("--out", plot_out, "output CSV path (default: stdout)");

    auto* validate = app.add_subcommand("validate-config", "schema-check a config file");
    validate->add_option("--config", config_path, "experiment config (JSON)")->required();

    app.add_subcommand("list-experiments", "list available experiment kinds");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            brws::ExperimentConfig cfg = brws::ExperimentConfig::parse_file(config_path);
            if (seed_override >= 0) {
                cfg.resolved["seeds"] = {static_cast<std::uint64_t>(seed_override)};
                cfg.seeds = {static_cast<std::uint64_t>(seed_override)};
            }
            if (workers > 0) {
                cfg.resolved["workers"] = workers;
                cfg.workers = workers;
            }
            if (!out_dir.empty()) {
                cfg.resolved["out_dir"] = out_dir;
                cfg.out_dir = out_dir;
            }
            brws::RunOutputs out = brws::run_experiment(cfg);
            std::cout << "records: " << out.records_path.string() << "\n"
                      << "summary: " << out.summary_path.string() << "\n";
        } else if (plot->parsed()) {
            std::string csv = brws::emit_plot_data(records_path);
            if (plot_out.empty()) {
                std::cout << csv;
            } else {
                std::ofstream f(plot_out);
                if (!f) throw brws::ConfigError("cannot open " + plot_out);
                f << csv;
                std::cout << "plot data: " << plot_out << "\n";
            }
        } else if (validate->parsed()) {
            brws::ExperimentConfig cfg = brws::ExperimentConfig::parse_file(config_path);
            std::cout << "OK: kind=" << cfg.kind << " seeds=" << cfg.seeds.size()
                      << " hash=" << cfg.config_hash() << "\n";
        } else {
            for (const auto& k : brws::experiment_kinds()) std::cout << k << "\n";
        }
    } catch (const brws::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
