#pragma once

#include <optional>
#include <string>
#include <vector>

#include "selfmine/solve.hpp"

namespace selfmine {

enum class Recommendation { PegImmediately, WithholdToCap, Indifferent };
const char* to_string(Recommendation r);

// Sensitivity of the long-run average profit to the pegging probability,
// evaluated at one policy: the derivative, its R-linear coefficients
// (d_eta_dp = a_bar*R + b_bar), the sign-change threshold R_star =
// -b_bar/a_bar, and the resulting policy recommendation.
struct SensitivityReport {
    double p = 0.0;
    double R = 0.0;
    double d_eta_dp = 0.0;
    double a_bar = 0.0;
    double b_bar = 0.0;
    std::optional<double> R_star; // only when |a_bar| > 1e-12 * mu
    int a_bar_sign = 0;
    bool sign_anomaly = false;    // a_bar < 0: the monotone-increase reading flips
    Recommendation recommendation = Recommendation::Indifferent;
};

// Exact performance difference between two policies sharing one model:
//   eta' - eta = pi' [ (Q' - Q) g + (f' - f) ]
// evaluated with the base policy's potential. Throws on mismatched models.
double performance_difference(const Dynamics& dyn_base, const SolveResult& sol_base,
                              const Dynamics& dyn_other, const Eigen::VectorXd& pi_other);

// d eta / dp = pi [ (dQ/dp) g + df/dp ]. With a per-state policy this is
// the directional derivative along raising every controlled slot at once.
double policy_derivative(const Dynamics& dyn, const SolveResult& sol);

// Coefficients of d_eta_dp = a_bar*R + b_bar, from the potential split:
//   a_bar = pi [ (dQ/dp) a + df_R/dp ],  b_bar = pi [ (dQ/dp) b ].
std::pair<double, double> linear_coefficients(const Dynamics& dyn, const Eigen::VectorXd& a,
                                              const Eigen::VectorXd& b,
                                              const Eigen::VectorXd& pi);

// Sign of a_bar*R + b_bar decides the policy: positive pegs immediately,
// negative withholds to the cap; values inside the indifference band
// |.| <= 1e-12 * mu * max(1, R) read as the knife edge. Requires R >= 0.
Recommendation threshold_and_recommend(double a_bar, double b_bar, double R, double mu);

// Bundles the derivative, coefficients, threshold and recommendation at
// the dynamics' own policy and reward.
SensitivityReport analyze_sensitivity(const Dynamics& dyn, const SolveResult& sol);

enum class Verdict { Increasing, Decreasing, Flat, Mixed };
const char* to_string(Verdict v);

struct SweepRow {
    double R = 0.0;
    double p = 0.0;
    double eta = 0.0;
    double d_eta_dp = 0.0;
    int sign = 0;
};

struct SweepResult {
    std::vector<double> p_grid;
    std::vector<double> R_values;
    std::vector<SweepRow> rows;      // R-major, p-ascending
    std::vector<Verdict> verdicts;   // eta monotonicity over p, one per R
    std::vector<std::optional<double>> R_star_by_p;
    std::optional<double> R_star_spread; // max-min over the defined entries
};

// Evaluates eta and its policy derivative over a (p, R) grid. The reward
// enters only through R, so each p costs one stationary solve; eta and
// d_eta_dp follow from their exact R-affine forms.
SweepResult sweep(const ModelParams& params, int m, const std::vector<double>& p_grid,
                  const std::vector<double>& R_list);

struct OptimalPolicyResult {
    std::optional<double> p_star;     // empty when indifferent
    double eta_at_p_star = 0.0;
    double eta_at_0 = 0.0;
    double eta_at_1 = 0.0;
    Recommendation recommendation = Recommendation::Indifferent; // sensitivity route, at p = 0.5
    bool endpoint_agrees = true;
    std::string diagnostic;           // filled when the two routes disagree
};

// Optimal scalar policy for pegging reward R: the sensitivity
// recommendation cross-checked against direct endpoint evaluation. The
// endpoint comparison decides p_star; a disagreement with the sensitivity
// route is reported in `diagnostic` rather than resolved silently.
OptimalPolicyResult optimal_policy(const ModelParams& params, int m, double R);

} // namespace selfmine
