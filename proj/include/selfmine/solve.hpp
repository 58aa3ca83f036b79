#pragma once

#include <utility>
#include <vector>

#include "selfmine/dynamics.hpp"

namespace selfmine {

// Stationary distribution, long-run average profit, performance potential
// and its R-linear split g = R*a + b, with the residuals of the solves.
struct SolveResult {
    Eigen::VectorXd pi;
    double eta = 0.0;
    Eigen::VectorXd g;
    Eigen::VectorXd a;
    Eigen::VectorXd b;
    double stationary_residual = 0.0;    // ||pi^T Q||_inf
    double potential_residual = 0.0;     // ||Q g - (eta*1 - f)||_inf
    double decomposition_residual = 0.0; // ||R*a + b - g||_inf
};

// Solves pi^T Q = 0, pi^T 1 = 1 by replacing the balance equation of the
// fork root (0,0) with the normalization row. A reducible chain (p = 1)
// is restricted to the communicating class of (0,0) first; states outside
// it get exact zeros. Throws NumericalError with the failing residual if
// the result does not satisfy ||pi^T Q||_inf <= 1e-10 * mu.
Eigen::VectorXd stationary_direct(const Dynamics& dyn);

// The block-structured stationary solve: D_k = B_{k-1} (-Q_{k,k})^{-1},
// pi_k = pi_0 * D_1 * ... * D_k, with pi_0 from the level-0 boundary system.
// Requires m >= 5 and an irreducible chain (pegging probabilities < 1).
Eigen::VectorXd stationary_block(const Dynamics& dyn, const StateSpace& space);

// Same solve, also exposing the D_k factors (D[0] is the scalar seed 1).
struct BlockFactors {
    std::vector<Eigen::MatrixXd> D;
    Eigen::VectorXd pi;
};
BlockFactors stationary_block_factors(const Dynamics& dyn, const StateSpace& space);

// eta = pi . f
double average_profit(const Dynamics& dyn, const Eigen::VectorXd& pi);

// Poisson equation Q x = (pi.reward)*1 - reward, normalized to pi.x = 0.
// Unique under that normalization; works on the reducible boundary too.
Eigen::VectorXd poisson_solve(const Dynamics& dyn, const Eigen::VectorXd& pi,
                              const Eigen::VectorXd& reward);

// Performance potential: g solves Q g = eta*1 - f with pi.g = 0.
Eigen::VectorXd solve_potential(const Dynamics& dyn, const Eigen::VectorXd& pi, double eta);

// The R-linear parts of the potential: a and b solve the Poisson equation
// for the split rewards f_R and f_C, so g = R*a + b entrywise.
std::pair<Eigen::VectorXd, Eigen::VectorXd> decompose_potential(const Dynamics& dyn,
                                                                const Eigen::VectorXd& pi);

// Bundles the direct stationary solve, profit, potential and split.
SolveResult solve_all(const Dynamics& dyn);

} // namespace selfmine
