#include "selfmine/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace selfmine {

namespace {

bool same_model(const ModelParams& a, const ModelParams& b) {
    return a.alpha1 == b.alpha1 && a.alpha2_tilde == b.alpha2_tilde && a.tau == b.tau &&
           a.gamma == b.gamma && a.mu == b.mu && a.c_P == b.c_P && a.c_A == b.c_A &&
           a.r_B == b.r_B && a.r_F == b.r_F && a.m == b.m;
}

double indifference_band(double mu, double R) { return 1e-12 * mu * std::max(1.0, R); }

} // namespace

const char* to_string(Recommendation r) {
    switch (r) {
        case Recommendation::PegImmediately: return "PegImmediately";
        case Recommendation::WithholdToCap: return "WithholdToCap";
        case Recommendation::Indifferent: return "Indifferent";
    }
    return "?";
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Increasing: return "increasing";
        case Verdict::Decreasing: return "decreasing";
        case Verdict::Flat: return "flat";
        case Verdict::Mixed: return "mixed";
    }
    return "?";
}

double performance_difference(const Dynamics& dyn_base, const SolveResult& sol_base,
                              const Dynamics& dyn_other, const Eigen::VectorXd& pi_other) {
    if (!same_model(dyn_base.params, dyn_other.params)) {
        throw ValidationError("performance_difference requires both policies on one model");
    }
    const Eigen::VectorXd bracket =
        (dyn_other.Q - dyn_base.Q) * sol_base.g + (dyn_other.f - dyn_base.f);
    return pi_other.dot(bracket);
}

double policy_derivative(const Dynamics& dyn, const SolveResult& sol) {
    return sol.pi.dot(dyn.dQ_dp * sol.g + dyn.df_dp);
}

std::pair<double, double> linear_coefficients(const Dynamics& dyn, const Eigen::VectorXd& a,
                                              const Eigen::VectorXd& b,
                                              const Eigen::VectorXd& pi) {
    const double a_bar = pi.dot(dyn.dQ_dp * a + dyn.df_R_dp);
    const double b_bar = pi.dot(dyn.dQ_dp * b);
    return {a_bar, b_bar};
}

Recommendation threshold_and_recommend(double a_bar, double b_bar, double R, double mu) {
    if (!(R >= 0.0)) throw ValidationError("pegging reward R must be >= 0");
    const double value = a_bar * R + b_bar;
    const double band = indifference_band(mu, R);
    if (value > band) return Recommendation::PegImmediately;
    if (value < -band) return Recommendation::WithholdToCap;
    return Recommendation::Indifferent;
}

SensitivityReport analyze_sensitivity(const Dynamics& dyn, const SolveResult& sol) {
    SensitivityReport rep;
    rep.p = dyn.policy.is_scalar() ? dyn.policy.scalar_value()
                                   : std::numeric_limits<double>::quiet_NaN();
    rep.R = dyn.params.reward();
    rep.d_eta_dp = policy_derivative(dyn, sol);
    std::tie(rep.a_bar, rep.b_bar) = linear_coefficients(dyn, sol.a, sol.b, sol.pi);
    const double mu = dyn.params.mu;
    if (std::abs(rep.a_bar) > 1e-12 * mu) {
        rep.R_star = -rep.b_bar / rep.a_bar;
        rep.a_bar_sign = rep.a_bar > 0.0 ? 1 : -1;
    }
    rep.sign_anomaly = rep.a_bar_sign < 0;
    rep.recommendation = threshold_and_recommend(rep.a_bar, rep.b_bar, rep.R, mu);
    return rep;
}

SweepResult sweep(const ModelParams& params, int m, const std::vector<double>& p_grid,
                  const std::vector<double>& R_list) {
    if (p_grid.empty()) throw ValidationError("sweep requires a nonempty p grid");
    if (R_list.empty()) throw ValidationError("sweep requires a nonempty R list");
    for (double p : p_grid) {
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("sweep p grid values must lie in [0,1]");
    }
    for (double R : R_list) {
        if (!(R >= 0.0)) throw ValidationError("sweep R values must be >= 0");
    }
    ModelParams mp = params;
    mp.m = m;
    mp.validate();

    const StateSpace space(m);
    const double mu = mp.mu;

    // Per grid point: eta(R) = R*eta_R + eta_C and
    // d_eta_dp(R) = a_bar*R + b_bar, all independent of the reward fields.
    struct PointData {
        double eta_R, eta_C, a_bar, b_bar;
    };
    SweepResult out;
    out.p_grid = p_grid;
    out.R_values = R_list;
    std::vector<PointData> points;
    points.reserve(p_grid.size());
    for (double p : p_grid) {
        const Dynamics dyn = build_generator(mp, space, Policy::scalar(p));
        const Eigen::VectorXd pi = stationary_direct(dyn);
        const auto [a, b] = decompose_potential(dyn, pi);
        const auto [a_bar, b_bar] = linear_coefficients(dyn, a, b, pi);
        points.push_back(PointData{pi.dot(dyn.f_R), pi.dot(dyn.f_C), a_bar, b_bar});
        if (std::abs(a_bar) > 1e-12 * mu) {
            out.R_star_by_p.push_back(-b_bar / a_bar);
        } else {
            out.R_star_by_p.push_back(std::nullopt);
        }
    }

    double rs_min = 0.0, rs_max = 0.0;
    bool have_rs = false;
    for (const auto& rs : out.R_star_by_p) {
        if (!rs) continue;
        rs_min = have_rs ? std::min(rs_min, *rs) : *rs;
        rs_max = have_rs ? std::max(rs_max, *rs) : *rs;
        have_rs = true;
    }
    if (have_rs) out.R_star_spread = rs_max - rs_min;

    for (double R : R_list) {
        std::vector<double> etas;
        etas.reserve(p_grid.size());
        for (size_t i = 0; i < p_grid.size(); ++i) {
            const PointData& pt = points[i];
            SweepRow row;
            row.R = R;
            row.p = p_grid[i];
            row.eta = R * pt.eta_R + pt.eta_C;
            row.d_eta_dp = pt.a_bar * R + pt.b_bar;
            const double band = indifference_band(mu, R);
            row.sign = row.d_eta_dp > band ? 1 : (row.d_eta_dp < -band ? -1 : 0);
            etas.push_back(row.eta);
            out.rows.push_back(row);
        }
        double scale = 1.0;
        for (double e : etas) scale = std::max(scale, std::abs(e));
        const double flat_tol = 1e-10 * scale;
        bool up = false, down = false;
        for (size_t i = 0; i + 1 < etas.size(); ++i) {
            const double d = etas[i + 1] - etas[i];
            if (d > flat_tol) up = true;
            if (d < -flat_tol) down = true;
        }
        Verdict v = Verdict::Flat;
        if (up && down) v = Verdict::Mixed;
        else if (up) v = Verdict::Increasing;
        else if (down) v = Verdict::Decreasing;
        out.verdicts.push_back(v);
    }
    return out;
}

OptimalPolicyResult optimal_policy(const ModelParams& params, int m, double R) {
    if (!(R >= 0.0)) throw ValidationError("pegging reward R must be >= 0");
    ModelParams mp = params;
    mp.m = m;
    mp.r_B = R; // only the sum r_B + r_F enters the model
    mp.r_F = 0.0;
    mp.validate();
    const StateSpace space(m);

    const Dynamics dyn_mid = build_generator(mp, space, Policy::scalar(0.5));
    const SolveResult sol_mid = solve_all(dyn_mid);
    const SensitivityReport rep = analyze_sensitivity(dyn_mid, sol_mid);

    OptimalPolicyResult out;
    out.recommendation = rep.recommendation;
    const Dynamics dyn0 = build_generator(mp, space, Policy::scalar(0.0));
    const Dynamics dyn1 = build_generator(mp, space, Policy::scalar(1.0));
    out.eta_at_0 = average_profit(dyn0, stationary_direct(dyn0));
    out.eta_at_1 = average_profit(dyn1, stationary_direct(dyn1));

    const double scale = std::max({1.0, std::abs(out.eta_at_0), std::abs(out.eta_at_1)});
    const bool tie = std::abs(out.eta_at_1 - out.eta_at_0) <= 1e-10 * scale;
    if (tie) {
        out.eta_at_p_star = std::max(out.eta_at_0, out.eta_at_1);
    } else if (out.eta_at_1 > out.eta_at_0) {
        out.p_star = 1.0;
        out.eta_at_p_star = out.eta_at_1;
    } else {
        out.p_star = 0.0;
        out.eta_at_p_star = out.eta_at_0;
    }

    const Recommendation endpoint_rec =
        tie ? Recommendation::Indifferent
            : (out.eta_at_1 > out.eta_at_0 ? Recommendation::PegImmediately
                                           : Recommendation::WithholdToCap);
    out.endpoint_agrees = endpoint_rec == rep.recommendation;
    if (!out.endpoint_agrees) {
        out.diagnostic = std::string("sensitivity route at p=0.5 recommends ") +
                         to_string(rep.recommendation) + " but the endpoint comparison gives " +
                         to_string(endpoint_rec) + " (eta(0)=" + std::to_string(out.eta_at_0) +
                         ", eta(1)=" + std::to_string(out.eta_at_1) + ")";
    }
    return out;
}

} // namespace selfmine
