#include "selfmine/solve.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace selfmine {

namespace {

double stationary_tolerance(const Dynamics& dyn) { return 1e-10 * dyn.params.mu; }

double potential_scale(const Dynamics& dyn) {
    const auto rates = derive_rates(dyn.params);
    return std::max({dyn.params.mu, rates.C, rates.R * dyn.params.mu * dyn.params.m});
}

// Intersection of forward- and backward-reachable sets of the root.
std::vector<int> communicating_class(const Dynamics& dyn) {
    const int n = dyn.size();
    std::vector<char> fwd(static_cast<size_t>(n), 0), bwd(static_cast<size_t>(n), 0);
    for (int i : reachable_from_root(dyn)) fwd[static_cast<size_t>(i)] = 1;
    std::vector<int> stack{0};
    bwd[0] = 1;
    while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        for (int j = 0; j < n; ++j) {
            if (j != i && dyn.Q(j, i) > 0.0 && !bwd[static_cast<size_t>(j)]) {
                bwd[static_cast<size_t>(j)] = 1;
                stack.push_back(j);
            }
        }
    }
    std::vector<int> cls;
    for (int i = 0; i < n; ++i) {
        if (fwd[static_cast<size_t>(i)] && bwd[static_cast<size_t>(i)]) cls.push_back(i);
    }
    return cls;
}

// pi^T Q = 0, pi^T 1 = 1, with the root balance row swapped for the
// normalization. Q must be irreducible here.
Eigen::VectorXd stationary_replaced_row(const Eigen::MatrixXd& Q) {
    const int n = static_cast<int>(Q.rows());
    Eigen::MatrixXd A = Q.transpose();
    A.row(0) = Eigen::RowVectorXd::Ones(n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(0) = 1.0;
    return A.partialPivLu().solve(rhs);
}

} // namespace

Eigen::VectorXd stationary_direct(const Dynamics& dyn) {
    const int n = dyn.size();
    const std::vector<int> cls = communicating_class(dyn);
    Eigen::VectorXd pi = Eigen::VectorXd::Zero(n);

    if (static_cast<int>(cls.size()) == n) {
        pi = stationary_replaced_row(dyn.Q);
    } else {
        const int nc = static_cast<int>(cls.size());
        std::vector<char> in_cls(static_cast<size_t>(n), 0);
        for (int i : cls) in_cls[static_cast<size_t>(i)] = 1;
        for (int i : cls) {
            for (int j = 0; j < n; ++j) {
                if (j != i && dyn.Q(i, j) > 0.0 && !in_cls[static_cast<size_t>(j)]) {
                    throw NumericalError("communicating class of (0,0) is not closed");
                }
            }
        }
        Eigen::MatrixXd Qc(nc, nc);
        for (int r = 0; r < nc; ++r) {
            for (int c = 0; c < nc; ++c) {
                Qc(r, c) = dyn.Q(cls[static_cast<size_t>(r)], cls[static_cast<size_t>(c)]);
            }
        }
        const Eigen::VectorXd pic = stationary_replaced_row(Qc);
        for (int r = 0; r < nc; ++r) pi(cls[static_cast<size_t>(r)]) = pic(r);
    }

    const double residual = (pi.transpose() * dyn.Q).cwiseAbs().maxCoeff();
    if (!(residual <= stationary_tolerance(dyn))) {
        std::ostringstream os;
        os << "stationary solve residual " << residual << " exceeds tolerance "
           << stationary_tolerance(dyn);
        throw NumericalError(os.str());
    }
    return pi;
}

BlockFactors stationary_block_factors(const Dynamics& dyn, const StateSpace& space) {
    if (space.m() != dyn.m()) {
        throw ValidationError("state space and dynamics were built for different m");
    }
    if (dyn.m() < 5) {
        throw ValidationError("the block-structured stationary solve requires m >= 5");
    }
    if (!is_irreducible(dyn)) {
        throw ValidationError(
            "the block-structured stationary solve requires an irreducible chain "
            "(pegging probabilities below 1); use stationary_direct instead");
    }

    const LevelBlocks blocks = level_block_view(dyn, space);
    const int levels = space.level_count();
    const int n0 = space.level_size(0);

    BlockFactors out;
    out.D.reserve(static_cast<size_t>(levels));
    out.D.push_back(Eigen::MatrixXd::Identity(1, 1)); // D_0 = 1

    // Running product P_k = D_1 ... D_k (P_0 = I), accumulated into the
    // level-0 boundary system pi_0 * M = 0, pi_0 * w = 1.
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n0, n0);
    Eigen::MatrixXd M = blocks.diag[0];
    Eigen::VectorXd w = P * Eigen::VectorXd::Ones(n0);
    std::vector<Eigen::MatrixXd> products;
    products.reserve(static_cast<size_t>(levels));
    products.push_back(P);
    for (int k = 1; k < levels; ++k) {
        // D_k = B_{k-1} (-Q_{k,k})^{-1}, via the transposed system
        // (-Q_{k,k})^T D_k^T = B_{k-1}^T.
        const Eigen::MatrixXd minus_diag_t = (-blocks.diag[static_cast<size_t>(k)]).transpose();
        Eigen::FullPivLU<Eigen::MatrixXd> lu(minus_diag_t);
        if (!lu.isInvertible()) {
            throw NumericalError("singular within-level block Q_{k,k} at level " +
                                 std::to_string(k));
        }
        const Eigen::MatrixXd Dk =
            lu.solve(blocks.super[static_cast<size_t>(k - 1)].transpose()).transpose();
        out.D.push_back(Dk);
        P = P * Dk;
        products.push_back(P);
        M += P * blocks.col0[static_cast<size_t>(k)];
        w += P * Eigen::VectorXd::Ones(space.level_size(k));
    }

    Eigen::MatrixXd A = M.transpose();
    A.row(0) = w.transpose();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n0);
    rhs(0) = 1.0;
    const Eigen::VectorXd pi0 = A.partialPivLu().solve(rhs);

    out.pi = Eigen::VectorXd::Zero(space.size());
    for (int k = 0; k < levels; ++k) {
        out.pi.segment(space.level_offset(k), space.level_size(k)) =
            (pi0.transpose() * products[static_cast<size_t>(k)]).transpose();
    }

    const double residual = (out.pi.transpose() * dyn.Q).cwiseAbs().maxCoeff();
    if (!(residual <= stationary_tolerance(dyn))) {
        std::ostringstream os;
        os << "block stationary solve residual " << residual << " exceeds tolerance "
           << stationary_tolerance(dyn);
        throw NumericalError(os.str());
    }
    return out;
}

Eigen::VectorXd stationary_block(const Dynamics& dyn, const StateSpace& space) {
    return stationary_block_factors(dyn, space).pi;
}

double average_profit(const Dynamics& dyn, const Eigen::VectorXd& pi) {
    return pi.dot(dyn.f);
}

namespace {

Eigen::VectorXd poisson_solve_with_eta(const Dynamics& dyn, const Eigen::VectorXd& pi,
                                       const Eigen::VectorXd& reward, double eta) {
    const int n = dyn.size();
    Eigen::MatrixXd A = dyn.Q;
    A.row(0) = pi.transpose();
    Eigen::VectorXd rhs = eta * Eigen::VectorXd::Ones(n) - reward;
    rhs(0) = 0.0;
    const Eigen::VectorXd x = A.partialPivLu().solve(rhs);

    // Residual against the full (un-replaced) equation set.
    const Eigen::VectorXd full_rhs = eta * Eigen::VectorXd::Ones(n) - reward;
    const double residual = (dyn.Q * x - full_rhs).cwiseAbs().maxCoeff();
    const double tol = 1e-9 * potential_scale(dyn);
    if (!(residual <= tol)) {
        std::ostringstream os;
        os << "Poisson solve residual " << residual << " exceeds tolerance " << tol;
        throw NumericalError(os.str());
    }
    return x;
}

} // namespace

Eigen::VectorXd poisson_solve(const Dynamics& dyn, const Eigen::VectorXd& pi,
                              const Eigen::VectorXd& reward) {
    return poisson_solve_with_eta(dyn, pi, reward, pi.dot(reward));
}

Eigen::VectorXd solve_potential(const Dynamics& dyn, const Eigen::VectorXd& pi, double eta) {
    return poisson_solve_with_eta(dyn, pi, dyn.f, eta);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> decompose_potential(const Dynamics& dyn,
                                                                const Eigen::VectorXd& pi) {
    return {poisson_solve(dyn, pi, dyn.f_R), poisson_solve(dyn, pi, dyn.f_C)};
}

SolveResult solve_all(const Dynamics& dyn) {
    SolveResult res;
    res.pi = stationary_direct(dyn);
    res.eta = average_profit(dyn, res.pi);
    res.g = solve_potential(dyn, res.pi, res.eta);
    std::tie(res.a, res.b) = decompose_potential(dyn, res.pi);
    res.stationary_residual = (res.pi.transpose() * dyn.Q).cwiseAbs().maxCoeff();
    const Eigen::VectorXd rhs = res.eta * Eigen::VectorXd::Ones(dyn.size()) - dyn.f;
    res.potential_residual = (dyn.Q * res.g - rhs).cwiseAbs().maxCoeff();
    const double R = dyn.params.reward();
    res.decomposition_residual = (R * res.a + res.b - res.g).cwiseAbs().maxCoeff();
    return res;
}

} // namespace selfmine
