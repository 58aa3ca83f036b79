#include "selfmine/sim.hpp"

#include <cmath>
#include <vector>

namespace selfmine {

namespace {

constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

uint64_t mix64(uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

struct Channel {
    double rate;
    int target;
    double lump_blocks; // pegged block count paid out at R per block
};

} // namespace

CounterRng::CounterRng(uint64_t seed, uint64_t stream)
    : base_(mix64(seed + kGolden) ^ mix64((stream + 1) * kGolden)) {}

uint64_t CounterRng::next() { return mix64(base_ + (++counter_) * kGolden); }

double CounterRng::uniform01() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double CounterRng::exponential(double rate) {
    return -std::log1p(-uniform01()) / rate;
}

SimEstimate simulate(const ModelParams& params, int m, const Policy& policy,
                     const SimConfig& config, StateOccupancy* occupancy) {
    ModelParams mp = params;
    mp.m = m;
    mp.validate();
    const bool cycle_mode = config.n_cycles > 0;
    const bool horizon_mode = config.horizon > 0.0;
    if (cycle_mode == horizon_mode) {
        throw ValidationError("sim config must set exactly one of n_cycles >= 1 or horizon > 0");
    }

    const StateSpace space(m);
    policy.validate(space);
    const auto [lambda1, lambda2, R, C] = derive_rates(mp);
    const double mu = mp.mu;
    const int n = space.size();

    // Same rule table as the generator, with peg transitions carrying the
    // pegged block count.
    std::vector<std::vector<Channel>> channels(static_cast<size_t>(n));
    std::vector<double> total_rate(static_cast<size_t>(n), 0.0);
    std::vector<double> reward_rate(static_cast<size_t>(n), -C); // f(state)
    for (int i = 0; i < n; ++i) {
        const State s = space.state_at(i);
        auto& ch = channels[static_cast<size_t>(i)];
        switch (space.region_at(i)) {
            case Region::Competition:
                ch.push_back({lambda1, space.index_of(State{s.n1 + 1, s.n2}), 0.0});
                if (s.n2 < m) ch.push_back({lambda2, space.index_of(State{s.n1, s.n2 + 1}), 0.0});
                break;
            case Region::A1: {
                const double p = policy.value_at(s, space);
                ch.push_back({mu * p, 0, static_cast<double>(s.n2)});
                ch.push_back({lambda2 * (1.0 - p), space.index_of(State{s.n1, s.n2 + 1}), 0.0});
                ch.push_back({lambda1, space.index_of(State{s.n1 + 1, s.n2}), 0.0});
                reward_rate[static_cast<size_t>(i)] = s.n2 * R * mu * p - C;
                break;
            }
            case Region::A2:
                ch.push_back({mu, 0, static_cast<double>(m)});
                reward_rate[static_cast<size_t>(i)] = m * R * mu - C;
                break;
            case Region::B:
                ch.push_back({mu, 0, 0.0});
                break;
        }
        for (const Channel& c : ch) total_rate[static_cast<size_t>(i)] += c.rate;
    }

    CounterRng rng(config.seed);

    std::vector<double> cyc_time, cyc_lump, cyc_rate_reward;
    if (cycle_mode) {
        cyc_time.reserve(static_cast<size_t>(config.n_cycles));
        cyc_lump.reserve(static_cast<size_t>(config.n_cycles));
        cyc_rate_reward.reserve(static_cast<size_t>(config.n_cycles));
    }

    const bool detail = occupancy != nullptr;
    std::vector<double> hold_time, cur_cycle_time_in;
    std::vector<double> occ_sum, occ_sumsq, occ_sum_t;
    std::vector<long long> visit_count;
    if (detail) {
        hold_time.assign(static_cast<size_t>(n), 0.0);
        cur_cycle_time_in.assign(static_cast<size_t>(n), 0.0);
        occ_sum.assign(static_cast<size_t>(n), 0.0);
        occ_sumsq.assign(static_cast<size_t>(n), 0.0);
        occ_sum_t.assign(static_cast<size_t>(n), 0.0);
        visit_count.assign(static_cast<size_t>(n), 0);
    }

    long long n_events = 0;
    double total_time = 0.0;
    double cur_time = 0.0, cur_lump = 0.0, cur_rate_reward = 0.0;
    int state = 0;
    long long done = 0;

    while (cycle_mode ? done < config.n_cycles : total_time < config.horizon) {
        const double rate = total_rate[static_cast<size_t>(state)];
        const double dt = rng.exponential(rate);
        const double u = rng.uniform01() * rate;

        const auto& ch = channels[static_cast<size_t>(state)];
        const Channel* chosen = &ch.back();
        double acc = 0.0;
        for (const Channel& c : ch) {
            acc += c.rate;
            if (u < acc) {
                chosen = &c;
                break;
            }
        }

        if (detail) {
            hold_time[static_cast<size_t>(state)] += dt;
            cur_cycle_time_in[static_cast<size_t>(state)] += dt;
            ++visit_count[static_cast<size_t>(state)];
        }
        total_time += dt;
        cur_time += dt;
        cur_rate_reward += reward_rate[static_cast<size_t>(state)] * dt;
        cur_lump += chosen->lump_blocks * R;
        state = chosen->target;
        ++n_events;

        if (state == 0) {
            cyc_time.push_back(cur_time);
            cyc_lump.push_back(cur_lump);
            cyc_rate_reward.push_back(cur_rate_reward);
            cur_time = cur_lump = cur_rate_reward = 0.0;
            ++done;
            if (detail) {
                for (int i = 0; i < n; ++i) {
                    const double y = cur_cycle_time_in[static_cast<size_t>(i)];
                    occ_sum[static_cast<size_t>(i)] += y;
                    occ_sumsq[static_cast<size_t>(i)] += y * y;
                    occ_sum_t[static_cast<size_t>(i)] += y * cyc_time.back();
                    cur_cycle_time_in[static_cast<size_t>(i)] = 0.0;
                }
            }
        }
    }

    const long long nc = done;
    if (nc < 1) {
        throw NumericalError("simulation horizon too short to complete one regenerative cycle");
    }

    double sum_t = 0.0, sum_lump = 0.0, sum_rate = 0.0;
    for (long long i = 0; i < nc; ++i) {
        sum_t += cyc_time[static_cast<size_t>(i)];
        sum_lump += cyc_lump[static_cast<size_t>(i)];
        sum_rate += cyc_rate_reward[static_cast<size_t>(i)];
    }
    const double mean_t = sum_t / static_cast<double>(nc);
    const double lump_rate = sum_lump / sum_t;

    SimEstimate est;
    est.seed = config.seed;
    est.n_events = n_events;
    est.total_time = sum_t;
    est.eta_hat = lump_rate - C;
    est.eta_hat_rate_form = sum_rate / sum_t;

    // Ratio-estimator variance from the per-cycle residuals.
    auto ratio_se = [&](const std::vector<double>& y, double ratio) {
        if (nc < 2) return 0.0;
        double ss = 0.0;
        for (long long i = 0; i < nc; ++i) {
            const double z = y[static_cast<size_t>(i)] - ratio * cyc_time[static_cast<size_t>(i)];
            ss += z * z;
        }
        const double var = ss / static_cast<double>(nc - 1);
        return std::sqrt(var / static_cast<double>(nc)) / mean_t;
    };
    est.std_err = ratio_se(cyc_lump, lump_rate);
    est.std_err_rate_form = ratio_se(cyc_rate_reward, est.eta_hat_rate_form);

    est.cycle_stats.count = nc;
    est.cycle_stats.mean_length = mean_t;
    double ss_len = 0.0, ss_rew = 0.0, mean_rew = 0.0;
    for (long long i = 0; i < nc; ++i) {
        mean_rew += cyc_lump[static_cast<size_t>(i)] - C * cyc_time[static_cast<size_t>(i)];
    }
    mean_rew /= static_cast<double>(nc);
    for (long long i = 0; i < nc; ++i) {
        const double dl = cyc_time[static_cast<size_t>(i)] - mean_t;
        const double dr =
            cyc_lump[static_cast<size_t>(i)] - C * cyc_time[static_cast<size_t>(i)] - mean_rew;
        ss_len += dl * dl;
        ss_rew += dr * dr;
    }
    est.cycle_stats.mean_reward = mean_rew;
    if (nc > 1) {
        est.cycle_stats.var_length = ss_len / static_cast<double>(nc - 1);
        est.cycle_stats.var_reward = ss_rew / static_cast<double>(nc - 1);
    }

    if (detail) {
        occupancy->time_fraction = Eigen::VectorXd::Zero(n);
        occupancy->time_fraction_se = Eigen::VectorXd::Zero(n);
        occupancy->exit_rate = Eigen::VectorXd::Zero(n);
        occupancy->exit_rate_se = Eigen::VectorXd::Zero(n);
        occupancy->visits = Eigen::VectorXd::Zero(n);
        double sum_t_sq = 0.0;
        for (long long i = 0; i < nc; ++i) {
            sum_t_sq += cyc_time[static_cast<size_t>(i)] * cyc_time[static_cast<size_t>(i)];
        }
        for (int i = 0; i < n; ++i) {
            const size_t si = static_cast<size_t>(i);
            const double frac = occ_sum[si] / sum_t;
            occupancy->time_fraction(i) = frac;
            if (nc > 1) {
                const double ss =
                    occ_sumsq[si] - 2.0 * frac * occ_sum_t[si] + frac * frac * sum_t_sq;
                const double var = std::max(0.0, ss) / static_cast<double>(nc - 1);
                occupancy->time_fraction_se(i) =
                    std::sqrt(var / static_cast<double>(nc)) / mean_t;
            }
            occupancy->visits(i) = static_cast<double>(visit_count[si]);
            if (visit_count[si] > 0 && hold_time[si] > 0.0) {
                const double q = static_cast<double>(visit_count[si]) / hold_time[si];
                occupancy->exit_rate(i) = q;
                occupancy->exit_rate_se(i) = q / std::sqrt(static_cast<double>(visit_count[si]));
            }
        }
    }
    return est;
}

} // namespace selfmine
