#pragma once

#include <Eigen/Dense>
#include <vector>

#include "selfmine/model.hpp"

namespace selfmine {

// Generator, reward vector, and their exact policy derivatives for one
// (params, policy) instance. Dense storage; the space is O(m^2) states
// and stays tiny for the supported m <= 50.
//
// In per-state policy mode, row s of dQ_dp is the derivative of row s of
// Q with respect to that state's own probability slot (rows of distinct
// slots never interact). With a scalar policy the same matrix is the full
// dQ/dp, because the controlled-row pattern does not depend on p.
struct Dynamics {
    ModelParams params;
    Policy policy;

    Eigen::MatrixXd Q;      // infinitesimal generator, rows sum to 0
    Eigen::VectorXd f;      // reward rate per state
    Eigen::MatrixXd dQ_dp;  // nonzero only on A1 rows
    Eigen::VectorXd df_dp;  // nonzero only on A1 entries

    // Reward split f = R * f_R + f_C (f_C is the constant -C vector),
    // used by the potential decomposition and the R-linear coefficients.
    Eigen::VectorXd f_R;
    Eigen::VectorXd f_C;
    Eigen::VectorXd df_R_dp;

    int m() const { return params.m; }
    int size() const { return static_cast<int>(Q.rows()); }
};

// Assembles Q, f and their policy derivatives from the transition rules:
//   Competition (n1,n2): lambda1 -> (n1+1,n2); lambda2 -> (n1,n2+1) while
//                        n2 < m (the cap silences dishonest mining);
//   A1 (n1,n2):          mu*p -> (0,0); lambda2*(1-p) -> (n1,n2+1);
//                        lambda1 -> (n1+1,n2);
//   A2 (n1,m):           mu -> (0,0);
//   B (n2+2,n2):         mu -> (0,0);
// with the diagonal closing each row to zero. Rewards: n2*R*mu*p - C on
// A1, m*R*mu - C on A2, -C elsewhere.
Dynamics build_generator(const ModelParams& params, const StateSpace& space,
                         const Policy& policy);

// The generator partitioned by level: diag[k] = Q_{k,k} (within-level
// rates plus diagonal), super[k] = B_k (level k -> k+1), col0[k] = Q_{k,0}
// (rates into level 0; for k = 0 this is empty since Q_{0,0} already
// carries the level-0 internal entries). The blocks tile Q exactly.
struct LevelBlocks {
    std::vector<Eigen::MatrixXd> diag;   // k = 0..m+2
    std::vector<Eigen::MatrixXd> super;  // k = 0..m+1
    std::vector<Eigen::MatrixXd> col0;   // k = 1..m+2 (index 0 unused, 0x0)
};

LevelBlocks level_block_view(const Dynamics& dyn, const StateSpace& space);

// Rebuilds the full generator from its blocks (exact tiling identity).
Eigen::MatrixXd reassemble_blocks(const LevelBlocks& blocks, const StateSpace& space);

// Forward-reachable set from the fork root (0,0) on the jump graph of Q,
// as sorted indices. For p in [0,1) this is the whole space; at p = 1 the
// states with n2 >= n1 + 3 drop out.
std::vector<int> reachable_from_root(const Dynamics& dyn);

// True when every state both reaches (0,0) and is reached from it.
bool is_irreducible(const Dynamics& dyn);

} // namespace selfmine
