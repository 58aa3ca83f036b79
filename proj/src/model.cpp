#include "selfmine/model.hpp"

#include <cmath>
#include <sstream>

namespace selfmine {

namespace {

void require(bool ok, const std::string& constraint) {
    if (!ok) throw ValidationError(constraint);
}

bool finite(double x) { return std::isfinite(x); }

} // namespace

std::vector<std::string> ModelParams::validate() const {
    require(finite(alpha1) && alpha1 >= 0.0, "alpha1 must be a finite nonnegative rate");
    require(finite(alpha2_tilde) && alpha2_tilde >= 0.0,
            "alpha2_tilde must be a finite nonnegative rate");
    require(finite(tau) && tau >= 0.0, "tau must be >= 0");
    require(finite(gamma) && gamma >= 0.0, "gamma must be a finite nonnegative rate");
    require(alpha1 - gamma > 0.0, "alpha1 - gamma must be > 0 (lambda1 must be positive)");
    require(finite(mu) && mu > 0.0, "mu must be > 0");
    require(finite(c_P) && c_P >= 0.0, "c_P must be >= 0");
    require(finite(c_A) && c_A >= 0.0, "c_A must be >= 0");
    require(finite(r_B) && r_B >= 0.0, "r_B must be >= 0");
    require(finite(r_F) && r_F >= 0.0, "r_F must be >= 0");
    require(m >= 3, "m must be >= 3");

    std::vector<std::string> warnings;
    if (lambda2() >= lambda1()) {
        std::ostringstream os;
        os << "dishonest real mining rate lambda2=" << lambda2()
           << " is not below the honest rate lambda1=" << lambda1()
           << "; the honest-majority assumption does not hold";
        warnings.push_back(os.str());
    }
    return warnings;
}

DerivedRates derive_rates(const ModelParams& params) {
    params.validate();
    return DerivedRates{params.lambda1(), params.lambda2(), params.reward(), params.cost()};
}

std::string to_string(State s) {
    return std::to_string(s.n1) + "," + std::to_string(s.n2);
}

const char* to_string(Region r) {
    switch (r) {
        case Region::A1: return "A1";
        case Region::A2: return "A2";
        case Region::B: return "B";
        case Region::Competition: return "COMPETITION";
    }
    return "?";
}

bool in_state_space(State s, int m) {
    if (s.n1 < 0 || s.n2 < 0) return false;
    if (s.n1 > m + 2 || s.n2 > m) return false;
    if (s.n1 >= 2 && s.n2 < s.n1 - 2) return false;
    return true;
}

Region classify(State s, int m) {
    if (!in_state_space(s, m)) {
        throw ValidationError("state (" + to_string(s) + ") lies outside the state space for m=" +
                              std::to_string(m));
    }
    if (s.n1 == s.n2 + 2) return Region::B;
    if (s.n2 == m && s.n1 <= m - 2) return Region::A2;
    if (s.n1 <= m - 3 && s.n2 >= s.n1 + 2 && s.n2 <= m - 1) return Region::A1;
    return Region::Competition;
}

StateSpace::StateSpace(int m) : m_(m) {
    if (m < 3) throw ValidationError("m must be >= 3");
    level_offsets_.reserve(static_cast<size_t>(m + 4));
    for (int k = 0; k <= m + 2; ++k) {
        level_offsets_.push_back(static_cast<int>(states_.size()));
        const int lo = k <= 1 ? 0 : k - 2;
        for (int n2 = lo; n2 <= m; ++n2) {
            states_.push_back(State{k, n2});
        }
    }
    level_offsets_.push_back(static_cast<int>(states_.size()));
    regions_.reserve(states_.size());
    for (size_t i = 0; i < states_.size(); ++i) {
        regions_.push_back(classify(states_[i], m));
        if (regions_.back() == Region::A1) a1_indices_.push_back(static_cast<int>(i));
    }
}

int StateSpace::level_size(int k) const {
    return level_offsets_[static_cast<size_t>(k + 1)] - level_offsets_[static_cast<size_t>(k)];
}

int StateSpace::index_of(State s) const {
    if (!in_state_space(s, m_)) {
        throw ValidationError("state (" + to_string(s) + ") lies outside the state space for m=" +
                              std::to_string(m_));
    }
    const int lo = s.n1 <= 1 ? 0 : s.n1 - 2;
    return level_offsets_[static_cast<size_t>(s.n1)] + (s.n2 - lo);
}

StateSpace enumerate_states(int m) { return StateSpace(m); }

Policy Policy::scalar(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("policy probability p must lie in [0,1]");
    Policy pol;
    pol.scalar_mode_ = true;
    pol.p_ = p;
    return pol;
}

Policy Policy::per_state(std::map<State, double> values) {
    for (const auto& [s, v] : values) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw ValidationError("policy probability at state (" + to_string(s) +
                                  ") must lie in [0,1]");
        }
    }
    Policy pol;
    pol.scalar_mode_ = false;
    pol.table_ = std::move(values);
    return pol;
}

double Policy::scalar_value() const {
    if (!scalar_mode_) throw ValidationError("policy is per-state, not a scalar");
    return p_;
}

double Policy::value_at(State s, const StateSpace& space) const {
    switch (classify(s, space.m())) {
        case Region::A2: return 1.0;
        case Region::B:
        case Region::Competition: return 0.0;
        case Region::A1: break;
    }
    if (scalar_mode_) return p_;
    const auto it = table_.find(s);
    return it == table_.end() ? 0.0 : it->second;
}

void Policy::validate(const StateSpace& space) const {
    if (scalar_mode_) {
        if (!(p_ >= 0.0 && p_ <= 1.0)) throw ValidationError("policy probability p must lie in [0,1]");
        return;
    }
    for (const auto& [s, v] : table_) {
        if (classify(s, space.m()) != Region::A1) {
            throw ValidationError("per-state policy key (" + to_string(s) +
                                  ") is not an A1 state for m=" + std::to_string(space.m()));
        }
        if (!(v >= 0.0 && v <= 1.0)) {
            throw ValidationError("policy probability at state (" + to_string(s) +
                                  ") must lie in [0,1]");
        }
    }
}

} // namespace selfmine
