#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "selfmine/model.hpp"

namespace selfmine {

// Run length is either a number of regenerative cycles (returns to the
// fork root (0,0)) or a time horizon truncated to whole cycles.
struct SimConfig {
    uint64_t seed = 1;
    long long n_cycles = 0;
    double horizon = 0.0;
};

struct CycleStats {
    long long count = 0;
    double mean_length = 0.0;
    double var_length = 0.0;
    double mean_reward = 0.0;
    double var_reward = 0.0;
};

struct SimEstimate {
    double eta_hat = 0.0;
    double std_err = 0.0;       // regenerative ratio-estimator standard error
    long long n_events = 0;
    double total_time = 0.0;
    CycleStats cycle_stats;
    uint64_t seed = 0;          // recorded for replay

    // Alternative accounting that accrues the reward rate f(state)
    // continuously instead of lumping peg payouts; estimates the same eta.
    double eta_hat_rate_form = 0.0;
    double std_err_rate_form = 0.0;
};

// Optional per-state statistics for consistency checks against pi and the
// generator's exit rates.
struct StateOccupancy {
    Eigen::VectorXd time_fraction;
    Eigen::VectorXd time_fraction_se;
    Eigen::VectorXd exit_rate;     // visits / total holding time
    Eigen::VectorXd exit_rate_se;  // ~ rate / sqrt(visits)
    Eigen::VectorXd visits;
};

// Event-driven exponential-race simulation of the mining race under the
// same transition rules as the generator. Rewards: lump n2*R on an A1 peg,
// m*R on an A2 peg, nothing on a B peg, minus the cost rate C accrued
// continuously. Estimates are regenerative, anchored at (0,0), and
// reproducible bit-for-bit from the seed on one platform and build.
SimEstimate simulate(const ModelParams& params, int m, const Policy& policy,
                     const SimConfig& config, StateOccupancy* occupancy = nullptr);

// Counter-based generator: the k-th output is a pure function of
// (seed, stream, k), so replications can use disjoint streams.
class CounterRng {
  public:
    CounterRng(uint64_t seed, uint64_t stream = 0);

    uint64_t next();
    double uniform01();                  // [0, 1)
    double exponential(double rate);     // inversion

  private:
    uint64_t base_;
    uint64_t counter_ = 0;
};

} // namespace selfmine
