#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "selfmine/cli.hpp"

namespace {

// Exit codes: 0 success, 1 validation-suite failure, 2 config error,
// 3 numerical failure.
constexpr int kExitOk = 0;
constexpr int kExitValidationSuite = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

void emit(const std::string& content, const std::optional<std::string>& out_path) {
    if (out_path) {
        std::ofstream f(*out_path, std::ios::binary);
        if (!f) throw selfmine::ValidationError("cannot open output file: " + *out_path);
        f << content;
    } else {
        std::cout << content;
    }
}

void print_warnings(const selfmine::cli::ExperimentConfig& cfg) {
    for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Analyzer for the pegging policy of a selfish mining pool: exact chain "
                 "solves, policy sensitivity, and Monte Carlo cross-validation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::string format = "default";
    uint64_t seed = 0;
    bool seed_given = false;
    bool inject_fault = false;

    auto add_common = [&](CLI::App* cmd, bool allow_csv) {
        cmd->add_option("--config", config_path, "path to the JSON experiment config")
            ->required();
        cmd->add_option("--out", out_path, "output file (default: stdout)");
        auto formats = allow_csv ? std::vector<std::string>{"csv", "json"}
                                 : std::vector<std::string>{"json"};
        cmd->add_option("--format", format, "output format")->check(CLI::IsMember(formats));
    };

    CLI::App* solve = app.add_subcommand(
        "solve", "stationary distribution, average profit, potential and its R-split");
    add_common(solve, false);
    CLI::App* sensitivity = app.add_subcommand(
        "sensitivity", "policy derivative, R-linear coefficients, threshold, recommendation");
    add_common(sensitivity, false);
    CLI::App* sweep = app.add_subcommand("sweep", "eta and d_eta/dp over a (p, R) grid (CSV)");
    add_common(sweep, true);
    CLI::App* simulate =
        app.add_subcommand("simulate", "Monte Carlo estimate of the average profit");
    add_common(simulate, false);
    simulate->add_option("--seed", seed, "override the config seed")
        ->each([&](const std::string&) { seed_given = true; });
    CLI::App* validate =
        app.add_subcommand("validate", "run the cross-validation suite (exit 1 on failure)");
    add_common(validate, false);
    validate
        ->add_flag("--inject-generator-fault", inject_fault,
                   "test hook: corrupt the generator so the block-vs-direct check fails")
        ->group(""); // hidden

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        selfmine::cli::ExperimentConfig cfg = selfmine::cli::load_config(config_path);
        print_warnings(cfg);
        std::optional<std::string> out;
        if (!out_path.empty()) out = out_path;
        else if (cfg.out_path) out = cfg.out_path;

        if (solve->parsed()) {
            emit(selfmine::cli::cmd_solve(cfg).dump(2) + "\n", out);
        } else if (sensitivity->parsed()) {
            emit(selfmine::cli::cmd_sensitivity(cfg).dump(2) + "\n", out);
        } else if (sweep->parsed()) {
            const selfmine::cli::SweepOutput res = selfmine::cli::cmd_sweep(cfg);
            if (format == "json") {
                emit(res.as_json.dump(2) + "\n", out);
            } else {
                emit(res.csv, out);
                if (out) {
                    emit(res.verdict_sidecar.dump(2) + "\n", *out + ".verdicts.json");
                } else {
                    std::cerr << res.verdict_sidecar.dump(2) << "\n";
                }
            }
        } else if (simulate->parsed()) {
            std::optional<uint64_t> seed_override;
            if (seed_given) seed_override = seed;
            emit(selfmine::cli::cmd_simulate(cfg, seed_override).dump(2) + "\n", out);
        } else if (validate->parsed()) {
            const selfmine::cli::ValidateOutput res =
                selfmine::cli::cmd_validate(cfg, inject_fault);
            emit(res.report.dump(2) + "\n", out);
            for (const auto& check : res.report["checks"]) {
                std::cerr << (check["passed"].get<bool>() ? "[PASS] " : "[FAIL] ")
                          << check["name"].get<std::string>()
                          << " residual=" << check["residual"].get<double>()
                          << " tolerance=" << check["tolerance"].get<double>() << "\n";
            }
            return res.all_passed ? kExitOk : kExitValidationSuite;
        }
        return kExitOk;
    } catch (const selfmine::ValidationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const selfmine::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
}
