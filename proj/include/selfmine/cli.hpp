#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "selfmine/model.hpp"
#include "selfmine/sim.hpp"

namespace selfmine::cli {

// Parsed and schema-checked experiment configuration. Unknown keys and
// type mismatches are rejected at parse time with the offending key named.
struct ExperimentConfig {
    ModelParams model;

    // Exactly one of the three policy forms.
    std::optional<double> policy_p;
    std::optional<std::vector<double>> policy_grid;
    std::optional<std::map<State, double>> policy_table;

    std::vector<double> R_list;       // from "R_list" or "rBrF_pairs"
    std::vector<double> sweep_p_grid; // from the "sweep" section

    SimConfig sim;
    bool sim_section_present = false;

    uint64_t validate_seed = 1;
    long long validate_mc_cycles = 200000;
    int validate_policy_pairs = 20;
    int validate_derivative_points = 10;

    std::optional<std::string> out_path;
    std::vector<std::string> warnings; // soft model warnings

    // Throws ValidationError when the command needs a scalar p.
    double require_scalar_p(const char* command) const;
    Policy make_policy(const char* command) const; // scalar or per-state
};

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);

nlohmann::json cmd_solve(const ExperimentConfig& cfg);
nlohmann::json cmd_sensitivity(const ExperimentConfig& cfg);

struct SweepOutput {
    std::string csv;                // header R,p,eta,d_eta_dp,sign
    nlohmann::json verdict_sidecar; // per-R monotonicity verdicts
    nlohmann::json as_json;         // same table for --format json
};
SweepOutput cmd_sweep(const ExperimentConfig& cfg);

nlohmann::json cmd_simulate(const ExperimentConfig& cfg,
                            std::optional<uint64_t> seed_override = std::nullopt);

struct ValidateOutput {
    nlohmann::json report;
    bool all_passed = false;
};
// The cross-validation suite: block solve vs direct solve, the exact
// difference equation, the analytic derivative vs finite differences, and
// Monte Carlo vs the analytic profit. `inject_generator_fault` corrupts
// the direct solve's generator copy so the first check must fail (test hook).
ValidateOutput cmd_validate(const ExperimentConfig& cfg, bool inject_generator_fault = false);

} // namespace selfmine::cli
