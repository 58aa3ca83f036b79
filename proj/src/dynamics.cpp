#include "selfmine/dynamics.hpp"

#include <algorithm>

namespace selfmine {

Dynamics build_generator(const ModelParams& params, const StateSpace& space,
                         const Policy& policy) {
    params.validate();
    if (space.m() != params.m) {
        throw ValidationError("state space was built for m=" + std::to_string(space.m()) +
                              " but params.m=" + std::to_string(params.m));
    }
    policy.validate(space);

    const auto [lambda1, lambda2, R, C] = derive_rates(params);
    const double mu = params.mu;
    const int n = space.size();
    const int root = space.index_of(State{0, 0});

    Dynamics dyn;
    dyn.params = params;
    dyn.policy = policy;
    dyn.Q = Eigen::MatrixXd::Zero(n, n);
    dyn.dQ_dp = Eigen::MatrixXd::Zero(n, n);
    dyn.f = Eigen::VectorXd::Constant(n, -C);
    dyn.df_dp = Eigen::VectorXd::Zero(n);
    dyn.f_R = Eigen::VectorXd::Zero(n);
    dyn.f_C = Eigen::VectorXd::Constant(n, -C);
    dyn.df_R_dp = Eigen::VectorXd::Zero(n);

    for (int i = 0; i < n; ++i) {
        const State s = space.state_at(i);
        switch (space.region_at(i)) {
            case Region::Competition:
                dyn.Q(i, space.index_of(State{s.n1 + 1, s.n2})) += lambda1;
                if (s.n2 < params.m) dyn.Q(i, space.index_of(State{s.n1, s.n2 + 1})) += lambda2;
                break;
            case Region::A1: {
                const double p = policy.value_at(s, space);
                const int up = space.index_of(State{s.n1, s.n2 + 1});
                dyn.Q(i, root) += mu * p;
                dyn.Q(i, up) += lambda2 * (1.0 - p);
                dyn.Q(i, space.index_of(State{s.n1 + 1, s.n2})) += lambda1;
                dyn.dQ_dp(i, root) += mu;
                dyn.dQ_dp(i, up) -= lambda2;
                dyn.f(i) = s.n2 * R * mu * p - C;
                dyn.f_R(i) = s.n2 * mu * p;
                dyn.df_dp(i) = s.n2 * R * mu;
                dyn.df_R_dp(i) = s.n2 * mu;
                break;
            }
            case Region::A2:
                dyn.Q(i, root) += mu;
                dyn.f(i) = params.m * R * mu - C;
                dyn.f_R(i) = params.m * mu;
                break;
            case Region::B:
                dyn.Q(i, root) += mu;
                break;
        }
    }
    // Diagonals close each row to an exact zero sum.
    for (int i = 0; i < n; ++i) {
        dyn.Q(i, i) = -dyn.Q.row(i).sum();
        dyn.dQ_dp(i, i) = -dyn.dQ_dp.row(i).sum();
    }
    return dyn;
}

LevelBlocks level_block_view(const Dynamics& dyn, const StateSpace& space) {
    if (space.m() != dyn.m()) {
        throw ValidationError("state space and dynamics were built for different m");
    }
    const int levels = space.level_count();
    LevelBlocks blocks;
    blocks.diag.reserve(static_cast<size_t>(levels));
    blocks.super.reserve(static_cast<size_t>(levels - 1));
    blocks.col0.resize(static_cast<size_t>(levels));
    for (int k = 0; k < levels; ++k) {
        const int off = space.level_offset(k);
        const int sz = space.level_size(k);
        blocks.diag.push_back(dyn.Q.block(off, off, sz, sz));
        if (k + 1 < levels) {
            blocks.super.push_back(
                dyn.Q.block(off, space.level_offset(k + 1), sz, space.level_size(k + 1)));
        }
        if (k >= 1) {
            blocks.col0[static_cast<size_t>(k)] = dyn.Q.block(off, 0, sz, space.level_size(0));
        }
    }
    return blocks;
}

Eigen::MatrixXd reassemble_blocks(const LevelBlocks& blocks, const StateSpace& space) {
    const int n = space.size();
    const int levels = space.level_count();
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < levels; ++k) {
        const int off = space.level_offset(k);
        const int sz = space.level_size(k);
        Q.block(off, off, sz, sz) = blocks.diag[static_cast<size_t>(k)];
        if (k + 1 < levels) {
            Q.block(off, space.level_offset(k + 1), sz, space.level_size(k + 1)) =
                blocks.super[static_cast<size_t>(k)];
        }
        if (k >= 1) {
            Q.block(off, 0, sz, space.level_size(0)) += blocks.col0[static_cast<size_t>(k)];
        }
    }
    return Q;
}

namespace {

std::vector<int> reach(const Eigen::MatrixXd& Q, int start, bool forward) {
    const int n = static_cast<int>(Q.rows());
    std::vector<char> seen(static_cast<size_t>(n), 0);
    std::vector<int> stack{start};
    seen[static_cast<size_t>(start)] = 1;
    while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        for (int j = 0; j < n; ++j) {
            const double rate = forward ? Q(i, j) : Q(j, i);
            if (j != i && rate > 0.0 && !seen[static_cast<size_t>(j)]) {
                seen[static_cast<size_t>(j)] = 1;
                stack.push_back(j);
            }
        }
    }
    std::vector<int> out;
    for (int i = 0; i < n; ++i) {
        if (seen[static_cast<size_t>(i)]) out.push_back(i);
    }
    return out;
}

} // namespace

std::vector<int> reachable_from_root(const Dynamics& dyn) {
    return reach(dyn.Q, 0, /*forward=*/true);
}

bool is_irreducible(const Dynamics& dyn) {
    const int n = dyn.size();
    return static_cast<int>(reachable_from_root(dyn).size()) == n &&
           static_cast<int>(reach(dyn.Q, 0, /*forward=*/false).size()) == n;
}

} // namespace selfmine
