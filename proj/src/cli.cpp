#include "selfmine/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "selfmine/dynamics.hpp"
#include "selfmine/sensitivity.hpp"
#include "selfmine/solve.hpp"

namespace selfmine::cli {

using nlohmann::json;

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void reject_unknown_keys(const json& obj, const std::string& where,
                         std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }) == allowed.end()) {
            throw ValidationError("unknown key \"" + key + "\" in " + where);
        }
    }
}

double get_number(const json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key)) {
        throw ValidationError(where + " is missing required key \"" + std::string(key) + "\"");
    }
    if (!obj[key].is_number()) {
        throw ValidationError(where + "." + key + " must be a number");
    }
    return obj[key].get<double>();
}

State parse_state_key(const std::string& key) {
    const auto comma = key.find(',');
    if (comma == std::string::npos) {
        throw ValidationError("state key \"" + key + "\" must have the form \"n1,n2\"");
    }
    try {
        size_t used1 = 0, used2 = 0;
        const int n1 = std::stoi(key.substr(0, comma), &used1);
        const std::string rest = key.substr(comma + 1);
        const int n2 = std::stoi(rest, &used2);
        if (used1 != comma || used2 != rest.size()) {
            throw std::invalid_argument("trailing characters");
        }
        return State{n1, n2};
    } catch (const std::exception&) {
        throw ValidationError("state key \"" + key + "\" must have the form \"n1,n2\"");
    }
}

json vector_to_json(const StateSpace& space, const Eigen::VectorXd& v) {
    json out = json::object();
    for (int i = 0; i < space.size(); ++i) {
        out[to_string(space.state_at(i))] = v(i);
    }
    return out;
}

std::vector<double> uniform_grid(int points) {
    std::vector<double> grid(static_cast<size_t>(points));
    for (int i = 0; i < points; ++i) {
        grid[static_cast<size_t>(i)] = static_cast<double>(i) / static_cast<double>(points - 1);
    }
    return grid;
}

double eta_at(const ModelParams& params, const StateSpace& space, double p) {
    const Dynamics dyn = build_generator(params, space, Policy::scalar(p));
    return average_profit(dyn, stationary_direct(dyn));
}

} // namespace

double ExperimentConfig::require_scalar_p(const char* command) const {
    if (!policy_p) {
        throw ValidationError(std::string(command) + " requires a scalar policy: set policy.p");
    }
    return *policy_p;
}

Policy ExperimentConfig::make_policy(const char* command) const {
    if (policy_p) return Policy::scalar(*policy_p);
    if (policy_table) return Policy::per_state(*policy_table);
    throw ValidationError(std::string(command) +
                          " requires policy.p or policy.per_state (a p_grid only drives sweeps)");
}

ExperimentConfig parse_config(const json& doc) {
    if (!doc.is_object()) throw ValidationError("config must be a JSON object");
    reject_unknown_keys(doc, "config",
                        {"model", "policy", "R_list", "rBrF_pairs", "sweep", "sim", "validate",
                         "out"});

    ExperimentConfig cfg;

    if (!doc.contains("model")) throw ValidationError("config is missing the \"model\" section");
    const json& model = doc["model"];
    if (!model.is_object()) throw ValidationError("config.model must be an object");
    reject_unknown_keys(model, "config.model",
                        {"alpha1", "alpha2_tilde", "tau", "gamma", "mu", "c_P", "c_A", "r_B",
                         "r_F", "m"});
    cfg.model.alpha1 = get_number(model, "config.model", "alpha1");
    cfg.model.alpha2_tilde = get_number(model, "config.model", "alpha2_tilde");
    cfg.model.tau = get_number(model, "config.model", "tau");
    cfg.model.gamma = get_number(model, "config.model", "gamma");
    cfg.model.mu = get_number(model, "config.model", "mu");
    cfg.model.c_P = get_number(model, "config.model", "c_P");
    cfg.model.c_A = get_number(model, "config.model", "c_A");
    cfg.model.r_B = get_number(model, "config.model", "r_B");
    cfg.model.r_F = get_number(model, "config.model", "r_F");
    const double m_raw = get_number(model, "config.model", "m");
    if (m_raw != std::floor(m_raw)) throw ValidationError("config.model.m must be an integer");
    cfg.model.m = static_cast<int>(m_raw);
    cfg.warnings = cfg.model.validate();

    if (doc.contains("policy")) {
        const json& pol = doc["policy"];
        if (!pol.is_object()) throw ValidationError("config.policy must be an object");
        reject_unknown_keys(pol, "config.policy", {"p", "p_grid", "per_state"});
        int forms = 0;
        if (pol.contains("p")) {
            cfg.policy_p = get_number(pol, "config.policy", "p");
            ++forms;
        }
        if (pol.contains("p_grid")) {
            if (!pol["p_grid"].is_array()) {
                throw ValidationError("config.policy.p_grid must be an array of numbers");
            }
            std::vector<double> grid;
            for (const auto& v : pol["p_grid"]) {
                if (!v.is_number()) {
                    throw ValidationError("config.policy.p_grid must be an array of numbers");
                }
                grid.push_back(v.get<double>());
            }
            cfg.policy_grid = std::move(grid);
            ++forms;
        }
        if (pol.contains("per_state")) {
            if (!pol["per_state"].is_object()) {
                throw ValidationError("config.policy.per_state must map \"n1,n2\" keys to numbers");
            }
            std::map<State, double> table;
            for (const auto& [key, value] : pol["per_state"].items()) {
                if (!value.is_number()) {
                    throw ValidationError("config.policy.per_state values must be numbers");
                }
                table[parse_state_key(key)] = value.get<double>();
            }
            cfg.policy_table = std::move(table);
            ++forms;
        }
        if (forms != 1) {
            throw ValidationError(
                "config.policy must contain exactly one of \"p\", \"p_grid\", \"per_state\"");
        }
    }

    if (doc.contains("R_list") && doc.contains("rBrF_pairs")) {
        throw ValidationError("config may contain \"R_list\" or \"rBrF_pairs\", not both");
    }
    if (doc.contains("R_list")) {
        if (!doc["R_list"].is_array()) throw ValidationError("config.R_list must be an array");
        for (const auto& v : doc["R_list"]) {
            if (!v.is_number()) throw ValidationError("config.R_list entries must be numbers");
            const double R = v.get<double>();
            if (!(R >= 0.0)) throw ValidationError("config.R_list entries must be >= 0");
            cfg.R_list.push_back(R);
        }
    }
    if (doc.contains("rBrF_pairs")) {
        if (!doc["rBrF_pairs"].is_array()) {
            throw ValidationError("config.rBrF_pairs must be an array of [r_B, r_F] pairs");
        }
        for (const auto& pair : doc["rBrF_pairs"]) {
            if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() ||
                !pair[1].is_number()) {
                throw ValidationError("config.rBrF_pairs must be an array of [r_B, r_F] pairs");
            }
            const double rB = pair[0].get<double>();
            const double rF = pair[1].get<double>();
            if (!(rB >= 0.0 && rF >= 0.0)) {
                throw ValidationError("config.rBrF_pairs entries must be >= 0");
            }
            cfg.R_list.push_back(rB + rF);
        }
    }

    if (doc.contains("sweep")) {
        const json& sw = doc["sweep"];
        if (!sw.is_object()) throw ValidationError("config.sweep must be an object");
        reject_unknown_keys(sw, "config.sweep", {"p_grid", "p_points"});
        if (sw.contains("p_grid") && sw.contains("p_points")) {
            throw ValidationError("config.sweep takes \"p_grid\" or \"p_points\", not both");
        }
        if (sw.contains("p_grid")) {
            if (!sw["p_grid"].is_array()) {
                throw ValidationError("config.sweep.p_grid must be an array of numbers");
            }
            for (const auto& v : sw["p_grid"]) {
                if (!v.is_number()) {
                    throw ValidationError("config.sweep.p_grid must be an array of numbers");
                }
                cfg.sweep_p_grid.push_back(v.get<double>());
            }
        } else if (sw.contains("p_points")) {
            const double pts = get_number(sw, "config.sweep", "p_points");
            if (pts != std::floor(pts) || pts < 2) {
                throw ValidationError("config.sweep.p_points must be an integer >= 2");
            }
            cfg.sweep_p_grid = uniform_grid(static_cast<int>(pts));
        } else {
            throw ValidationError("config.sweep requires \"p_grid\" or \"p_points\"");
        }
    }

    if (doc.contains("sim")) {
        const json& sim = doc["sim"];
        if (!sim.is_object()) throw ValidationError("config.sim must be an object");
        reject_unknown_keys(sim, "config.sim", {"seed", "n_cycles", "horizon"});
        cfg.sim_section_present = true;
        if (sim.contains("seed")) {
            if (!sim["seed"].is_number_unsigned() && !sim["seed"].is_number_integer()) {
                throw ValidationError("config.sim.seed must be a nonnegative integer");
            }
            cfg.sim.seed = sim["seed"].get<uint64_t>();
        }
        if (sim.contains("n_cycles") && sim.contains("horizon")) {
            throw ValidationError("config.sim takes \"n_cycles\" or \"horizon\", not both");
        }
        if (sim.contains("n_cycles")) {
            const double nc = get_number(sim, "config.sim", "n_cycles");
            if (nc != std::floor(nc) || nc < 1) {
                throw ValidationError("config.sim.n_cycles must be an integer >= 1");
            }
            cfg.sim.n_cycles = static_cast<long long>(nc);
        }
        if (sim.contains("horizon")) {
            const double h = get_number(sim, "config.sim", "horizon");
            if (!(h > 0.0)) throw ValidationError("config.sim.horizon must be > 0");
            cfg.sim.horizon = h;
        }
        if (cfg.sim.n_cycles == 0 && cfg.sim.horizon == 0.0) {
            throw ValidationError("config.sim requires \"n_cycles\" or \"horizon\"");
        }
    }

    if (doc.contains("validate")) {
        const json& val = doc["validate"];
        if (!val.is_object()) throw ValidationError("config.validate must be an object");
        reject_unknown_keys(val, "config.validate",
                            {"seed", "mc_cycles", "policy_pairs", "derivative_points"});
        if (val.contains("seed")) {
            if (!val["seed"].is_number_unsigned() && !val["seed"].is_number_integer()) {
                throw ValidationError("config.validate.seed must be a nonnegative integer");
            }
            cfg.validate_seed = val["seed"].get<uint64_t>();
        }
        if (val.contains("mc_cycles")) {
            const double nc = get_number(val, "config.validate", "mc_cycles");
            if (nc != std::floor(nc) || nc < 1) {
                throw ValidationError("config.validate.mc_cycles must be an integer >= 1");
            }
            cfg.validate_mc_cycles = static_cast<long long>(nc);
        }
        if (val.contains("policy_pairs")) {
            const double np = get_number(val, "config.validate", "policy_pairs");
            if (np != std::floor(np) || np < 1) {
                throw ValidationError("config.validate.policy_pairs must be an integer >= 1");
            }
            cfg.validate_policy_pairs = static_cast<int>(np);
        }
        if (val.contains("derivative_points")) {
            const double np = get_number(val, "config.validate", "derivative_points");
            if (np != std::floor(np) || np < 1) {
                throw ValidationError("config.validate.derivative_points must be an integer >= 1");
            }
            cfg.validate_derivative_points = static_cast<int>(np);
        }
    }

    if (doc.contains("out")) {
        if (!doc["out"].is_string()) throw ValidationError("config.out must be a string path");
        cfg.out_path = doc["out"].get<std::string>();
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config is not valid JSON: " + std::string(e.what()));
    }
    return parse_config(doc);
}

namespace {

json model_echo(const ModelParams& mp) {
    const auto rates = derive_rates(mp);
    return json{{"alpha1", mp.alpha1}, {"alpha2_tilde", mp.alpha2_tilde},
                {"tau", mp.tau},       {"gamma", mp.gamma},
                {"mu", mp.mu},         {"c_P", mp.c_P},
                {"c_A", mp.c_A},       {"r_B", mp.r_B},
                {"r_F", mp.r_F},       {"m", mp.m},
                {"lambda1", rates.lambda1}, {"lambda2", rates.lambda2},
                {"R", rates.R},        {"C", rates.C}};
}

json policy_echo(const ExperimentConfig& cfg, const char* command) {
    if (cfg.policy_p) return json{{"p", *cfg.policy_p}};
    if (cfg.policy_table) {
        json table = json::object();
        for (const auto& [s, v] : *cfg.policy_table) table[to_string(s)] = v;
        return json{{"per_state", table}};
    }
    throw ValidationError(std::string(command) + " requires a policy section");
}

} // namespace

json cmd_solve(const ExperimentConfig& cfg) {
    const StateSpace space(cfg.model.m);
    const Policy policy = cfg.make_policy("solve");
    const Dynamics dyn = build_generator(cfg.model, space, policy);
    const SolveResult sol = solve_all(dyn);

    json out;
    out["model"] = model_echo(cfg.model);
    out["policy"] = policy_echo(cfg, "solve");
    out["pi"] = vector_to_json(space, sol.pi);
    out["eta"] = sol.eta;
    out["g"] = vector_to_json(space, sol.g);
    out["a"] = vector_to_json(space, sol.a);
    out["b"] = vector_to_json(space, sol.b);
    out["residuals"] = json{{"stationary", sol.stationary_residual},
                            {"poisson", sol.potential_residual},
                            {"decomposition", sol.decomposition_residual}};
    out["warnings"] = cfg.warnings;
    return out;
}

json cmd_sensitivity(const ExperimentConfig& cfg) {
    const double p = cfg.require_scalar_p("sensitivity");
    const StateSpace space(cfg.model.m);
    const Dynamics dyn = build_generator(cfg.model, space, Policy::scalar(p));
    const SolveResult sol = solve_all(dyn);
    const SensitivityReport rep = analyze_sensitivity(dyn, sol);

    json out;
    out["model"] = model_echo(cfg.model);
    out["p"] = rep.p;
    out["R"] = rep.R;
    out["eta"] = sol.eta;
    out["d_eta_dp"] = rep.d_eta_dp;
    out["a_bar"] = rep.a_bar;
    out["b_bar"] = rep.b_bar;
    if (rep.R_star) {
        out["R_star"] = *rep.R_star;
    } else {
        out["R_star_omitted_reason"] =
            "|a_bar| <= 1e-12 * mu: the derivative does not depend on R";
    }
    out["a_bar_sign"] = rep.a_bar_sign;
    out["sign_anomaly"] = rep.sign_anomaly;
    out["recommendation"] = to_string(rep.recommendation);
    if (!cfg.R_list.empty()) {
        json by_R = json::array();
        for (double R : cfg.R_list) {
            const Recommendation rec =
                threshold_and_recommend(rep.a_bar, rep.b_bar, R, cfg.model.mu);
            by_R.push_back(json{{"R", R},
                                {"d_eta_dp", rep.a_bar * R + rep.b_bar},
                                {"recommendation", to_string(rec)}});
        }
        out["by_R"] = by_R;
    }
    out["residuals"] = json{{"stationary", sol.stationary_residual},
                            {"poisson", sol.potential_residual},
                            {"decomposition", sol.decomposition_residual}};
    out["warnings"] = cfg.warnings;
    return out;
}

SweepOutput cmd_sweep(const ExperimentConfig& cfg) {
    std::vector<double> p_grid = cfg.sweep_p_grid;
    if (p_grid.empty() && cfg.policy_grid) p_grid = *cfg.policy_grid;
    if (p_grid.empty()) {
        throw ValidationError("sweep requires sweep.p_grid, sweep.p_points, or policy.p_grid");
    }
    if (cfg.R_list.empty()) {
        throw ValidationError("sweep requires R_list or rBrF_pairs");
    }
    const SweepResult res = sweep(cfg.model, cfg.model.m, p_grid, cfg.R_list);

    std::ostringstream csv;
    csv << "R,p,eta,d_eta_dp,sign\n";
    for (const SweepRow& row : res.rows) {
        csv << fmt17(row.R) << ',' << fmt17(row.p) << ',' << fmt17(row.eta) << ','
            << fmt17(row.d_eta_dp) << ',' << row.sign << '\n';
    }

    json verdicts = json::array();
    for (size_t i = 0; i < res.R_values.size(); ++i) {
        verdicts.push_back(
            json{{"R", res.R_values[i]}, {"verdict", to_string(res.verdicts[i])}});
    }
    json r_star = json::array();
    for (const auto& rs : res.R_star_by_p) {
        if (rs) r_star.push_back(*rs);
        else r_star.push_back(nullptr);
    }
    SweepOutput out;
    out.csv = csv.str();
    out.verdict_sidecar = json{{"p_grid", res.p_grid},
                               {"verdicts", verdicts},
                               {"R_star_by_p", r_star}};
    if (res.R_star_spread) {
        out.verdict_sidecar["R_star_spread"] = *res.R_star_spread;
    } else {
        out.verdict_sidecar["R_star_spread"] = nullptr;
    }

    json rows = json::array();
    for (const SweepRow& row : res.rows) {
        rows.push_back(json{{"R", row.R},
                            {"p", row.p},
                            {"eta", row.eta},
                            {"d_eta_dp", row.d_eta_dp},
                            {"sign", row.sign}});
    }
    out.as_json = json{{"rows", rows}, {"verdicts", out.verdict_sidecar}};
    return out;
}

json cmd_simulate(const ExperimentConfig& cfg, std::optional<uint64_t> seed_override) {
    if (!cfg.sim_section_present) {
        throw ValidationError("simulate requires a \"sim\" section with n_cycles or horizon");
    }
    SimConfig sc = cfg.sim;
    if (seed_override) sc.seed = *seed_override;
    const Policy policy = cfg.make_policy("simulate");
    const SimEstimate est = simulate(cfg.model, cfg.model.m, policy, sc);

    // Analytic cross-check, cheap at this scale.
    const StateSpace space(cfg.model.m);
    const Dynamics dyn = build_generator(cfg.model, space, policy);
    const double eta = average_profit(dyn, stationary_direct(dyn));

    json out;
    out["model"] = model_echo(cfg.model);
    out["policy"] = policy_echo(cfg, "simulate");
    out["seed"] = est.seed;
    out["eta_hat"] = est.eta_hat;
    out["std_err"] = est.std_err;
    out["eta_hat_rate_form"] = est.eta_hat_rate_form;
    out["std_err_rate_form"] = est.std_err_rate_form;
    out["n_events"] = est.n_events;
    out["total_time"] = est.total_time;
    out["cycle_stats"] = json{{"count", est.cycle_stats.count},
                              {"mean_length", est.cycle_stats.mean_length},
                              {"var_length", est.cycle_stats.var_length},
                              {"mean_reward", est.cycle_stats.mean_reward},
                              {"var_reward", est.cycle_stats.var_reward}};
    out["analytic"] = json{{"eta", eta},
                           {"abs_error", std::abs(est.eta_hat - eta)},
                           {"within_3se", std::abs(est.eta_hat - eta) <= 3.0 * est.std_err}};
    out["warnings"] = cfg.warnings;
    return out;
}

ValidateOutput cmd_validate(const ExperimentConfig& cfg, bool inject_generator_fault) {
    const double p_base = cfg.require_scalar_p("validate");
    const StateSpace space(cfg.model.m);
    const ModelParams& mp = cfg.model;
    CounterRng rng(cfg.validate_seed, /*stream=*/17);

    json checks = json::array();
    bool all_passed = true;
    auto add_check = [&](const std::string& name, double residual, double tolerance,
                         bool passed, const std::string& note = "") {
        json c{{"name", name}, {"residual", residual}, {"tolerance", tolerance},
               {"passed", passed}};
        if (!note.empty()) c["note"] = note;
        checks.push_back(c);
        all_passed = all_passed && passed;
    };

    // 1. Block-structured stationary solve against the direct solve.
    if (mp.m >= 5) {
        double worst = 0.0;
        const std::vector<double> ps{p_base, 0.0, 0.25, 0.5, 0.75, 0.99};
        for (double p : ps) {
            if (p >= 1.0) continue;
            Dynamics dyn = build_generator(mp, space, Policy::scalar(p));
            const Eigen::VectorXd pi_block = stationary_block(dyn, space);
            if (inject_generator_fault) {
                // Corrupt only the direct route's copy of the generator.
                dyn.Q(0, 1) += 0.01 * mp.mu;
                dyn.Q(0, 0) -= 0.01 * mp.mu;
            }
            const Eigen::VectorXd pi_direct = stationary_direct(dyn);
            worst = std::max(worst, (pi_block - pi_direct).cwiseAbs().maxCoeff());
        }
        add_check("block_vs_direct", worst, 1e-10, worst <= 1e-10,
                  inject_generator_fault ? "generator fault injected" : "");
    } else {
        add_check("block_vs_direct", 0.0, 1e-10, true,
                  "skipped: the block solve requires m >= 5");
    }

    // 2. Exact performance difference equation on random policy pairs.
    {
        double worst = 0.0;
        for (int i = 0; i < cfg.validate_policy_pairs; ++i) {
            const double p = rng.uniform01();
            const double pp = rng.uniform01();
            const Dynamics dyn_p = build_generator(mp, space, Policy::scalar(p));
            const SolveResult sol_p = solve_all(dyn_p);
            const Dynamics dyn_pp = build_generator(mp, space, Policy::scalar(pp));
            const Eigen::VectorXd pi_pp = stationary_direct(dyn_pp);
            const double lhs = performance_difference(dyn_p, sol_p, dyn_pp, pi_pp);
            const double rhs = average_profit(dyn_pp, pi_pp) - sol_p.eta;
            const double scale = std::max({1.0, std::abs(rhs), std::abs(sol_p.eta)});
            worst = std::max(worst, std::abs(lhs - rhs) / scale);
        }
        add_check("difference_equation", worst, 1e-9, worst <= 1e-9);
    }

    // 3. Analytic derivative against central finite differences.
    {
        const double h = 1e-6;
        double worst = 0.0;
        for (int i = 0; i < cfg.validate_derivative_points; ++i) {
            const double p = 0.01 + 0.98 * rng.uniform01();
            const Dynamics dyn = build_generator(mp, space, Policy::scalar(p));
            const SolveResult sol = solve_all(dyn);
            const double analytic = policy_derivative(dyn, sol);
            const double fd =
                (eta_at(mp, space, p + h) - eta_at(mp, space, p - h)) / (2.0 * h);
            const double err = std::abs(analytic - fd);
            worst = std::max(worst, err <= 1e-9 ? 0.0 : err / std::max(1e-9, std::abs(fd)));
        }
        add_check("derivative_vs_finite_difference", worst, 1e-4, worst <= 1e-4);
    }

    // 4. R-linear form of the derivative.
    {
        const Dynamics dyn = build_generator(mp, space, Policy::scalar(p_base));
        const SolveResult sol = solve_all(dyn);
        const double deriv = policy_derivative(dyn, sol);
        const auto [a_bar, b_bar] = linear_coefficients(dyn, sol.a, sol.b, sol.pi);
        const double err = std::abs(a_bar * mp.reward() + b_bar - deriv) /
                           std::max(1.0, std::abs(deriv));
        add_check("linear_form_aR_plus_b", err, 1e-9, err <= 1e-9);
    }

    // 5. Monte Carlo against the analytic profit.
    {
        SimConfig sc;
        sc.seed = cfg.validate_seed;
        sc.n_cycles = cfg.validate_mc_cycles;
        const SimEstimate est = simulate(mp, mp.m, Policy::scalar(p_base), sc);
        const Dynamics dyn = build_generator(mp, space, Policy::scalar(p_base));
        const double eta = average_profit(dyn, stationary_direct(dyn));
        const double err = std::abs(est.eta_hat - eta);
        add_check("mc_vs_analytic", err, 3.0 * est.std_err, err <= 3.0 * est.std_err,
                  "cycles=" + std::to_string(est.cycle_stats.count));
    }

    ValidateOutput out;
    out.report = json{{"model", model_echo(mp)},
                      {"p", p_base},
                      {"checks", checks},
                      {"all_passed", all_passed},
                      {"warnings", cfg.warnings}};
    out.all_passed = all_passed;
    return out;
}

} // namespace selfmine::cli
