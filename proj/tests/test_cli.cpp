#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "selfmine/cli.hpp"
#include "test_params.hpp"

using namespace selfmine;
using nlohmann::json;

namespace {

json base_config() {
    return json{{"model",
                 {{"alpha1", 0.6},
                  {"alpha2_tilde", 0.3},
                  {"tau", 0.2},
                  {"gamma", 0.05},
                  {"mu", 2.0},
                  {"c_P", 0.5},
                  {"c_A", 0.3},
                  {"r_B", 1.0},
                  {"r_F", 0.2},
                  {"m", 5}}},
                {"policy", {{"p", 0.5}}}};
}

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = "/tmp/selfmine_test_" + name;
    std::ofstream f(path, std::ios::binary);
    f << content;
    return path;
}

struct RunResult {
    int exit_code;
    std::string out;
    std::string err;
};

RunResult run_cli(const std::string& args) {
    const std::string out_path = "/tmp/selfmine_test_stdout";
    const std::string err_path = "/tmp/selfmine_test_stderr";
    const std::string cmd =
        std::string(SELFMINE_CLI_PATH) + " " + args + " >" + out_path + " 2>" + err_path;
    const int raw = std::system(cmd.c_str());
    RunResult res;
    res.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    auto slurp = [](const std::string& p) {
        std::ifstream f(p, std::ios::binary);
        std::ostringstream ss;
        ss << f.rdbuf();
        return ss.str();
    };
    res.out = slurp(out_path);
    res.err = slurp(err_path);
    return res;
}

} // namespace

TEST_CASE("config schema rejects unknown and malformed keys by name") {
    CHECK_NOTHROW(cli::parse_config(base_config()));

    json cfg = base_config();
    cfg["extra"] = 1;
    CHECK_THROWS_WITH_AS(cli::parse_config(cfg), "unknown key \"extra\" in config",
                         ValidationError);

    cfg = base_config();
    cfg["model"]["bogus"] = 1.0;
    CHECK_THROWS_WITH_AS(cli::parse_config(cfg), "unknown key \"bogus\" in config.model",
                         ValidationError);

    cfg = base_config();
    cfg["model"].erase("mu");
    CHECK_THROWS_AS(cli::parse_config(cfg), ValidationError);

    cfg = base_config();
    cfg["model"]["m"] = 2;
    CHECK_THROWS_WITH_AS(cli::parse_config(cfg), "m must be >= 3", ValidationError);

    cfg = base_config();
    cfg["policy"] = json{{"p", 0.5}, {"p_grid", {0.0, 1.0}}};
    CHECK_THROWS_AS(cli::parse_config(cfg), ValidationError);

    cfg = base_config();
    cfg["R_list"] = {1.0, -0.5};
    CHECK_THROWS_AS(cli::parse_config(cfg), ValidationError);

    cfg = base_config();
    cfg["R_list"] = {1.0};
    cfg["rBrF_pairs"] = {{0.5, 0.5}};
    CHECK_THROWS_AS(cli::parse_config(cfg), ValidationError);

    cfg = base_config();
    cfg["sim"] = json{{"n_cycles", 10}, {"horizon", 5.0}};
    CHECK_THROWS_AS(cli::parse_config(cfg), ValidationError);

    cfg = base_config();
    cfg["rBrF_pairs"] = {{1.0, 0.5}};
    const cli::ExperimentConfig parsed = cli::parse_config(cfg);
    REQUIRE(parsed.R_list.size() == 1);
    CHECK(parsed.R_list[0] == 1.5);
}

TEST_CASE("per-state policies parse from n1,n2 keys") {
    json cfg = base_config();
    cfg["policy"] = json{{"per_state", {{"0,2", 0.3}, {"0,3", 0.9}}}};
    const cli::ExperimentConfig parsed = cli::parse_config(cfg);
    REQUIRE(parsed.policy_table.has_value());
    CHECK(parsed.policy_table->at(State{0, 2}) == 0.3);

    cfg["policy"] = json{{"per_state", {{"zap", 0.3}}}};
    CHECK_THROWS_AS(cli::parse_config(cfg), ValidationError);
}

TEST_CASE("solve report carries the full state-indexed vectors") {
    const json rep = cli::cmd_solve(cli::parse_config(base_config()));
    CHECK(rep["pi"].size() == 33);
    CHECK(rep["g"].size() == 33);
    CHECK(rep["pi"].contains("0,0"));
    CHECK(rep["pi"].contains("7,5"));
    double total = 0.0;
    for (const auto& [key, value] : rep["pi"].items()) total += value.get<double>();
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep["residuals"]["stationary"].get<double>() <= 1e-10 * 2.0);

    json zero = base_config();
    zero["model"]["r_B"] = 0.0;
    zero["model"]["r_F"] = 0.0;
    const json rep0 = cli::cmd_solve(cli::parse_config(zero));
    CHECK(rep0["eta"].get<double>() == doctest::Approx(-0.301).epsilon(1e-12));
}

TEST_CASE("solve accepts a per-state policy") {
    json cfg = base_config();
    cfg["policy"] = json{{"per_state", {{"0,2", 0.3}}}};
    const json rep = cli::cmd_solve(cli::parse_config(cfg));
    CHECK(rep["policy"].contains("per_state"));
    CHECK(rep["pi"].size() == 33);
}

TEST_CASE("sensitivity report is internally consistent") {
    json cfg = base_config();
    cfg["R_list"] = {0.0, 1.2};
    const json rep = cli::cmd_sensitivity(cli::parse_config(cfg));
    const double a_bar = rep["a_bar"].get<double>();
    const double b_bar = rep["b_bar"].get<double>();
    const double deriv = rep["d_eta_dp"].get<double>();
    CHECK(std::abs(a_bar * 1.2 + b_bar - deriv) <= 1e-9 * std::max(1.0, std::abs(deriv)));
    REQUIRE(rep.contains("R_star"));
    CHECK(std::abs(rep["R_star"].get<double>()) <= 1e-9);
    CHECK(rep["recommendation"] == "PegImmediately");
    REQUIRE(rep["by_R"].size() == 2);
    CHECK(rep["by_R"][0]["recommendation"] == "Indifferent"); // R = 0
    CHECK(rep["by_R"][1]["recommendation"] == "PegImmediately");
}

TEST_CASE("R_star is omitted with a reason when a_bar is negligible") {
    // With no dishonest mining at all the A1 region carries no stationary
    // mass, so the derivative is identically zero and R* is undefined.
    json cfg = base_config();
    cfg["model"]["alpha2_tilde"] = 0.0;
    cfg["model"]["gamma"] = 0.0;
    const json rep = cli::cmd_sensitivity(cli::parse_config(cfg));
    CHECK(!rep.contains("R_star"));
    REQUIRE(rep.contains("R_star_omitted_reason"));
    CHECK(rep["recommendation"] == "Indifferent");
    CHECK(std::abs(rep["d_eta_dp"].get<double>()) <= 1e-12);

    json grid_policy = base_config();
    grid_policy["policy"] = json{{"p_grid", {0.0, 0.5, 1.0}}};
    CHECK_THROWS_AS(cli::cmd_sensitivity(cli::parse_config(grid_policy)), ValidationError);
}

TEST_CASE("sweep emits an R-major CSV whose sidecar survives recomputation") {
    json cfg = base_config();
    cfg.erase("policy");
    cfg["sweep"] = json{{"p_points", 21}};
    cfg["R_list"] = {0.0, 0.6, 1.2};
    const cli::SweepOutput out = cli::cmd_sweep(cli::parse_config(cfg));

    std::istringstream csv(out.csv);
    std::string line;
    std::getline(csv, line);
    CHECK(line == "R,p,eta,d_eta_dp,sign");
    struct Row {
        double R, p, eta, d;
        int sign;
    };
    std::vector<Row> rows;
    while (std::getline(csv, line)) {
        Row r;
        REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%d", &r.R, &r.p, &r.eta, &r.d,
                            &r.sign) == 5);
        rows.push_back(r);
    }
    REQUIRE(rows.size() == 63); // 3 R values x 21 grid points
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].R == std::vector<double>{0.0, 0.6, 1.2}[i / 21]);
        if (i % 21 > 0) CHECK(rows[i].p > rows[i - 1].p);
    }
    // R = 0 rows are constant up to stationary-solver roundoff
    for (size_t i = 0; i < 21; ++i) CHECK(std::abs(rows[i].eta - rows[0].eta) <= 1e-12);

    // Recompute each verdict from the CSV itself and compare to the sidecar.
    for (size_t block = 0; block < 3; ++block) {
        double scale = 1.0;
        for (size_t i = 0; i < 21; ++i) {
            scale = std::max(scale, std::abs(rows[block * 21 + i].eta));
        }
        const double tol = 1e-10 * scale;
        bool up = false, down = false;
        for (size_t i = 0; i + 1 < 21; ++i) {
            const double d = rows[block * 21 + i + 1].eta - rows[block * 21 + i].eta;
            if (d > tol) up = true;
            if (d < -tol) down = true;
        }
        const std::string expect =
            up && down ? "mixed" : (up ? "increasing" : (down ? "decreasing" : "flat"));
        CHECK(out.verdict_sidecar["verdicts"][block]["verdict"] == expect);
    }
    CHECK(out.verdict_sidecar["verdicts"][0]["verdict"] == "flat");
    CHECK(out.verdict_sidecar["verdicts"][2]["verdict"] == "increasing");

    // byte-identical on recomputation
    const cli::SweepOutput again = cli::cmd_sweep(cli::parse_config(cfg));
    CHECK(again.csv == out.csv);
    CHECK(again.verdict_sidecar.dump() == out.verdict_sidecar.dump());
}

TEST_CASE("simulate report records the seed and replays identically") {
    json cfg = base_config();
    cfg["sim"] = json{{"seed", 77}, {"n_cycles", 3000}};
    const json rep = cli::cmd_simulate(cli::parse_config(cfg));
    CHECK(rep["seed"].get<uint64_t>() == 77);
    CHECK(rep["cycle_stats"]["count"].get<long long>() == 3000);
    const json rep2 = cli::cmd_simulate(cli::parse_config(cfg));
    CHECK(rep.dump() == rep2.dump());
    const json rep3 = cli::cmd_simulate(cli::parse_config(cfg), 78);
    CHECK(rep3["seed"].get<uint64_t>() == 78);
    CHECK(rep3["eta_hat"].get<double>() != rep["eta_hat"].get<double>());

    json zero = base_config();
    zero["model"]["r_B"] = 0.0;
    zero["model"]["r_F"] = 0.0;
    zero["sim"] = json{{"seed", 1}, {"n_cycles", 500}};
    const json rep0 = cli::cmd_simulate(cli::parse_config(zero));
    CHECK(rep0["eta_hat"].get<double>() == -0.301);
    CHECK(rep0["std_err"].get<double>() == 0.0);
}

TEST_CASE("validate passes on the default model and fails under fault injection") {
    json cfg = base_config();
    cfg["validate"] = json{{"seed", 4}, {"mc_cycles", 20000}};
    const cli::ValidateOutput ok = cli::cmd_validate(cli::parse_config(cfg));
    CHECK(ok.all_passed);
    REQUIRE(ok.report["checks"].size() == 5);
    for (const auto& check : ok.report["checks"]) CHECK(check["passed"].get<bool>());

    const cli::ValidateOutput bad = cli::cmd_validate(cli::parse_config(cfg), true);
    CHECK(!bad.all_passed);
    CHECK(bad.report["checks"][0]["name"] == "block_vs_direct");
    CHECK(!bad.report["checks"][0]["passed"].get<bool>());
}

TEST_CASE("validate handles the R = 0 degeneracy with zero residuals") {
    json cfg = base_config();
    cfg["model"]["r_B"] = 0.0;
    cfg["model"]["r_F"] = 0.0;
    cfg["validate"] = json{{"seed", 4}, {"mc_cycles", 2000}, {"policy_pairs", 5},
                           {"derivative_points", 3}};
    const cli::ValidateOutput out = cli::cmd_validate(cli::parse_config(cfg));
    CHECK(out.all_passed);
}

TEST_CASE("the shipped example config validates and drives every command") {
    const cli::ExperimentConfig cfg =
        cli::load_config(std::string(SELFMINE_CONFIG_DIR) + "/example.json");
    CHECK(cfg.model.m == 5);
    CHECK(cfg.policy_p == 0.5);
    CHECK(cfg.R_list.size() == 4);
    CHECK(cfg.sweep_p_grid.size() == 21);
    CHECK(cfg.sim.n_cycles == 200000);
    CHECK_NOTHROW(cli::cmd_solve(cfg));
    CHECK_NOTHROW(cli::cmd_sensitivity(cfg));
    CHECK_NOTHROW(cli::cmd_sweep(cfg));
}

TEST_CASE("cli binary: exit codes and byte-identical reruns") {
    const std::string good = write_temp("good.json", base_config().dump());
    const RunResult solve1 = run_cli("solve --config " + good);
    CHECK(solve1.exit_code == 0);
    const json parsed = json::parse(solve1.out);
    CHECK(parsed["pi"].size() == 33);
    const RunResult solve2 = run_cli("solve --config " + good);
    CHECK(solve2.out == solve1.out);

    json bad_model = base_config();
    bad_model["model"]["m"] = 2;
    const std::string bad = write_temp("bad.json", bad_model.dump());
    const RunResult rejected = run_cli("solve --config " + bad);
    CHECK(rejected.exit_code == 2);
    CHECK(rejected.err.find("m must be >= 3") != std::string::npos);

    const RunResult missing = run_cli("solve --config /tmp/selfmine_no_such_file.json");
    CHECK(missing.exit_code == 2);

    json val = base_config();
    val["validate"] = json{{"seed", 4}, {"mc_cycles", 2000}, {"policy_pairs", 3},
                           {"derivative_points", 2}};
    const std::string val_path = write_temp("val.json", val.dump());
    const RunResult val_ok = run_cli("validate --config " + val_path);
    CHECK(val_ok.exit_code == 0);
    const RunResult val_bad =
        run_cli("validate --config " + val_path + " --inject-generator-fault");
    CHECK(val_bad.exit_code == 1);

    json sweep_cfg = base_config();
    sweep_cfg.erase("policy");
    sweep_cfg["sweep"] = json{{"p_points", 5}};
    sweep_cfg["R_list"] = {1.2};
    const std::string sweep_path = write_temp("sweep.json", sweep_cfg.dump());
    const std::string sweep_out = "/tmp/selfmine_test_sweep.csv";
    const RunResult swept = run_cli("sweep --config " + sweep_path + " --out " + sweep_out);
    CHECK(swept.exit_code == 0);
    std::ifstream csv(sweep_out);
    std::string header;
    std::getline(csv, header);
    CHECK(header == "R,p,eta,d_eta_dp,sign");
    std::ifstream sidecar(sweep_out + ".verdicts.json");
    CHECK(sidecar.good());
    const json verdicts = json::parse(sidecar);
    CHECK(verdicts["verdicts"][0]["verdict"] == "increasing");
}
