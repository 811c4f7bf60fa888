// Command-line front end: validate configs, list presets, run experiments.
// Exit codes: 0 success, 1 error, 2 strict-mode diagnostics failure.

#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <ebt/harness.hpp>

int main(int argc, char** argv) {
    CLI::App app{"Escalator boxcar train convergence harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    int threads = 1;
    bool strict = false;

    auto* run_cmd = app.add_subcommand("run", "Run the experiment described by a config");
    run_cmd->add_option("config", config_path, "Path to the experiment config")->required();
    run_cmd->add_option("--out", out_dir, "Output directory (overrides the config)");
    run_cmd->add_option("--threads", threads, "Concurrent width runs")
        ->check(CLI::PositiveNumber);
    run_cmd->add_flag("--strict", strict,
                      "Exit nonzero when diagnostics fire or the reference budget fails");

    auto* check_cmd = app.add_subcommand("check", "Validate a config and exit");
    check_cmd->add_option("config", config_path, "Path to the experiment config")
        ->required();

    auto* presets_cmd = app.add_subcommand("presets", "List coefficient presets");

    CLI11_PARSE(app, argc, argv);

    try {
        if (presets_cmd->parsed()) {
            for (const auto& name : ebt::preset_names())
                std::cout << "two-sex " << name << "\n";
            for (const auto& name : ebt::scalar_preset_names())
                std::cout << "scalar " << name << "\n";
            return 0;
        }
        if (check_cmd->parsed()) {
            ebt::load_config(config_path);
            std::cout << "ok " << config_path << "\n";
            return 0;
        }

        const auto cfg = ebt::load_config(config_path);
        const auto report = ebt::run_experiment(cfg, threads);
        const std::string dir = out_dir.empty() ? cfg.output : out_dir;
        ebt::write_outputs(report, cfg, dir);

        bool dirty = !report.valid;
        for (const auto& r : report.results) {
            std::cout << "width " << ebt::format_number(r.width) << " error "
                      << ebt::format_number(r.error) << "\n";
            if (!r.diag.clean()) dirty = true;
        }
        std::cout << "order " << ebt::format_number(report.order) << "\n";
        std::cout << "reference error " << ebt::format_number(report.reference_error)
                  << " allowance " << ebt::format_number(report.reference_allowance)
                  << (report.valid ? " ok" : " exceeded") << "\n";
        std::cout << "wrote " << dir << "/report.csv\n";
        if (strict && dirty) {
            std::cerr << "strict: diagnostics are not clean\n";
            return 2;
        }
        return 0;
    } catch (const ebt::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
