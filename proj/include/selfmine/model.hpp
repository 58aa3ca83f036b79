#pragma once

#include <compare>
#include <map>
#include <string>
#include <vector>

#include "selfmine/errors.hpp"

namespace selfmine {

// Rates derived from the exogenous parameters: real mining rates of the
// honest (lambda1) and dishonest (lambda2) pools, the per-block pegging
// reward R, and the dishonest pool's mining cost rate C.
struct DerivedRates {
    double lambda1;
    double lambda2;
    double R;
    double C;
};

struct ModelParams {
    double alpha1 = 0.6;        // honest net mining rate (blocks/time)
    double alpha2_tilde = 0.3;  // dishonest net mining rate if all its miners were honest
    double tau = 0.2;           // efficiency-increased ratio of the dishonest pool
    double gamma = 0.05;        // net rate of honest miners jumping to the dishonest pool
    double mu = 2.0;            // pegging rate (1 / mean pegging time)
    double c_P = 0.5;           // power price per unit net mining rate per unit time
    double c_A = 0.3;           // administrative price per unit real mining rate per unit time
    double r_B = 1.0;           // block reward
    double r_F = 0.2;           // average total transaction fee per block
    int m = 5;                  // dishonest chain cap (>= 3)

    double lambda1() const { return alpha1 - gamma; }
    double lambda2() const { return (alpha2_tilde + gamma) * (1.0 + tau); }
    double reward() const { return r_B + r_F; }
    double cost() const { return (alpha2_tilde + gamma) * (c_P + c_A * (1.0 + tau)); }

    // Throws ValidationError naming the first violated hard constraint.
    // Returns soft warnings (e.g. the dishonest real mining rate matching
    // or exceeding the honest one, which the model tolerates but which
    // breaks the honest-majority reading).
    std::vector<std::string> validate() const;
};

// Validates `params` and returns the four derived scalars.
DerivedRates derive_rates(const ModelParams& params);

// Block counts (honest, dishonest) of the two branches forked at the root.
struct State {
    int n1 = 0;
    int n2 = 0;
    auto operator<=>(const State&) const = default;
};

std::string to_string(State s);

// Region of a state, which decides both the pegging behaviour and the
// reward earned there:
//   A1          dishonest main chain formed (lead >= 2, below the cap);
//               pegs with the policy probability.
//   A2          dishonest chain hit the cap m with the honest chain far
//               behind; pegging is forced.
//   B           honest main chain formed (n1 = n2 + 2); pegging only.
//   Competition neither chain has won yet (includes the fork root (0,0)).
enum class Region { A1, A2, B, Competition };

const char* to_string(Region r);

bool in_state_space(State s, int m);

// Total on the state space; throws ValidationError for states outside it.
Region classify(State s, int m);

// Enumeration of the state space, level-major (level k holds the states
// with n1 = k) with n2 ascending inside each level. This ordering is what
// the block-structured stationary solver relies on.
class StateSpace {
  public:
    explicit StateSpace(int m);

    int m() const { return m_; }
    int size() const { return static_cast<int>(states_.size()); }
    const std::vector<State>& states() const { return states_; }
    State state_at(int index) const { return states_[static_cast<size_t>(index)]; }
    Region region_at(int index) const { return regions_[static_cast<size_t>(index)]; }

    // Throws ValidationError for states outside the space.
    int index_of(State s) const;

    int level_count() const { return m_ + 3; }
    int level_size(int k) const;
    int level_offset(int k) const { return level_offsets_[static_cast<size_t>(k)]; }

    // Indices of the policy-controlled (A1) states, ascending.
    const std::vector<int>& a1_indices() const { return a1_indices_; }

  private:
    int m_;
    std::vector<State> states_;
    std::vector<Region> regions_;
    std::vector<int> level_offsets_;
    std::vector<int> a1_indices_;
};

StateSpace enumerate_states(int m);

// Blockchain-pegged policy: the probability that the dishonest pool pegs
// its formed main chain now instead of mining on toward the cap. Stored
// values cover the A1 states; A2 is implicitly 1 and everything else 0.
class Policy {
  public:
    static Policy scalar(double p);
    // Per-state probabilities keyed by A1 states; missing A1 states use 0.
    static Policy per_state(std::map<State, double> values);

    bool is_scalar() const { return scalar_mode_; }

    // Throws ValidationError in per-state mode.
    double scalar_value() const;

    // Effective pegging probability at a state: the stored value on A1,
    // 1 on A2, 0 elsewhere.
    double value_at(State s, const StateSpace& space) const;

    // Checks probabilities lie in [0,1] and per-state keys are A1 states.
    void validate(const StateSpace& space) const;

  private:
    bool scalar_mode_ = true;
    double p_ = 0.0;
    std::map<State, double> table_;
};

} // namespace selfmine
