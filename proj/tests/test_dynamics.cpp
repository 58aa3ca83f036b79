#include <doctest.h>

#include <cmath>

#include "selfmine/dynamics.hpp"
#include "test_params.hpp"

using namespace selfmine;

namespace {

Dynamics make(const ModelParams& mp, double p) {
    const StateSpace space(mp.m);
    return build_generator(mp, space, Policy::scalar(p));
}

} // namespace

TEST_CASE("generator row of the controlled state (0,2)") {
    const StateSpace space(5);
    const Dynamics dyn = build_generator(P0(), space, Policy::scalar(0.5));
    const int i = space.index_of(State{0, 2});
    CHECK(dyn.Q(i, space.index_of(State{0, 0})) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dyn.Q(i, space.index_of(State{0, 3})) == doctest::Approx(0.21).epsilon(1e-12));
    CHECK(dyn.Q(i, space.index_of(State{1, 2})) == doctest::Approx(0.55).epsilon(1e-12));
    CHECK(dyn.Q(i, i) == doctest::Approx(-1.76).epsilon(1e-12));
    int nonzeros = 0;
    for (int j = 0; j < space.size(); ++j) {
        if (dyn.Q(i, j) != 0.0) ++nonzeros;
    }
    CHECK(nonzeros == 4);
}

TEST_CASE("reward vector at the reference states") {
    const StateSpace space(5);
    const Dynamics dyn = build_generator(P0(), space, Policy::scalar(0.5));
    CHECK(dyn.f(space.index_of(State{0, 2})) == doctest::Approx(2.099).epsilon(1e-12));
    CHECK(dyn.f(space.index_of(State{1, 1})) == doctest::Approx(-0.301).epsilon(1e-12));
    // A2 and B rows
    CHECK(dyn.f(space.index_of(State{1, 5})) ==
          doctest::Approx(5 * 1.2 * 2.0 - 0.301).epsilon(1e-12));
    CHECK(dyn.f(space.index_of(State{4, 2})) == doctest::Approx(-0.301).epsilon(1e-12));
}

TEST_CASE("top state (m+2, m) pegs and does nothing else") {
    for (double p : {0.0, 0.5, 1.0}) {
        const StateSpace space(5);
        const Dynamics dyn = build_generator(P0(), space, Policy::scalar(p));
        const int i = space.index_of(State{7, 5});
        for (int j = 0; j < space.size(); ++j) {
            if (j == i) continue;
            if (j == space.index_of(State{0, 0})) {
                CHECK(dyn.Q(i, j) == doctest::Approx(2.0));
            } else {
                CHECK(dyn.Q(i, j) == 0.0);
            }
        }
    }
}

TEST_CASE("rows of Q and dQ/dp sum to zero across the grid") {
    for (const ModelParams& mp : {P0(), P1()}) {
        for (int m : {3, 5, 8}) {
            ModelParams mm = mp;
            mm.m = m;
            for (double p : {0.0, 0.3, 0.7, 1.0}) {
                const Dynamics dyn = make(mm, p);
                CHECK(dyn.Q.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12);
                CHECK(dyn.dQ_dp.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12);
                for (int i = 0; i < dyn.size(); ++i) {
                    for (int j = 0; j < dyn.size(); ++j) {
                        if (i != j) CHECK(dyn.Q(i, j) >= 0.0);
                    }
                }
            }
        }
    }
}

TEST_CASE("policy derivatives live on the A1 rows only") {
    const StateSpace space(5);
    const Dynamics dyn = build_generator(P0(), space, Policy::scalar(0.4));
    for (int i = 0; i < space.size(); ++i) {
        const bool controlled = space.region_at(i) == Region::A1;
        const bool row_nonzero = dyn.dQ_dp.row(i).cwiseAbs().maxCoeff() > 0.0;
        CHECK(row_nonzero == controlled);
        CHECK((dyn.df_dp(i) != 0.0) == controlled);
        CHECK((dyn.df_R_dp(i) != 0.0) == controlled);
    }
}

TEST_CASE("policy boundaries: no peg rate at p=0, no dishonest mining at p=1") {
    const StateSpace space(5);
    const int root = space.index_of(State{0, 0});
    const Dynamics at0 = build_generator(P0(), space, Policy::scalar(0.0));
    const Dynamics at1 = build_generator(P0(), space, Policy::scalar(1.0));
    for (int i : space.a1_indices()) {
        const State s = space.state_at(i);
        CHECK(at0.Q(i, root) == 0.0);
        CHECK(at1.Q(i, space.index_of(State{s.n1, s.n2 + 1})) == 0.0);
    }
}

TEST_CASE("dQ/dp matches finite differences of Q") {
    const double h = 1e-7;
    const StateSpace space(5);
    const Dynamics lo = build_generator(P0(), space, Policy::scalar(0.4));
    const Dynamics hi = build_generator(P0(), space, Policy::scalar(0.4 + h));
    const Eigen::MatrixXd fd = (hi.Q - lo.Q) / h;
    CHECK((fd - lo.dQ_dp).cwiseAbs().maxCoeff() <= 1e-6 * P0().mu);
}

TEST_CASE("reachability: irreducible below p=1, censored class at p=1") {
    for (double p : {0.0, 0.5, 0.99}) {
        CHECK(is_irreducible(make(P0(), p)));
    }
    const StateSpace space(5);
    const Dynamics dyn = build_generator(P0(), space, Policy::scalar(1.0));
    CHECK(!is_irreducible(dyn));
    const auto reachable = reachable_from_root(dyn);
    std::vector<char> in_class(static_cast<size_t>(space.size()), 0);
    for (int i : reachable) in_class[static_cast<size_t>(i)] = 1;
    for (int i = 0; i < space.size(); ++i) {
        const State s = space.state_at(i);
        CHECK(static_cast<bool>(in_class[static_cast<size_t>(i)]) == (s.n2 < s.n1 + 3));
    }
}

TEST_CASE("f is affine in p and in R (three-point collinearity)") {
    const StateSpace space(5);
    const auto at_p = [&](double p) { return build_generator(P0(), space, Policy::scalar(p)).f; };
    const Eigen::VectorXd mid = 0.5 * (at_p(0.2) + at_p(0.8));
    CHECK((mid - at_p(0.5)).cwiseAbs().maxCoeff() <= 1e-12);

    const auto at_R = [&](double rb) {
        ModelParams mp = P0();
        mp.r_B = rb;
        mp.r_F = 0.0;
        return build_generator(mp, space, Policy::scalar(0.5)).f;
    };
    const Eigen::VectorXd midR = 0.5 * (at_R(0.4) + at_R(2.0));
    CHECK((midR - at_R(1.2)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("level blocks tile the generator exactly") {
    for (double p : {0.0, 0.5, 1.0}) {
        const StateSpace space(5);
        const Dynamics dyn = build_generator(P0(), space, Policy::scalar(p));
        const LevelBlocks blocks = level_block_view(dyn, space);
        CHECK(blocks.super[6].rows() == 2); // B_6 is 2x1 for m=5
        CHECK(blocks.super[6].cols() == 1);
        // pegging always targets (0,0): first column of each Q_{k,0}
        for (int k = 1; k < space.level_count(); ++k) {
            const auto& col0 = blocks.col0[static_cast<size_t>(k)];
            for (int r = 0; r < col0.rows(); ++r) {
                for (int c = 1; c < col0.cols(); ++c) CHECK(col0(r, c) == 0.0);
            }
        }
        const Eigen::MatrixXd rebuilt = reassemble_blocks(blocks, space);
        CHECK((rebuilt - dyn.Q).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("mismatched inputs are rejected") {
    const StateSpace space6(6);
    CHECK_THROWS_AS(build_generator(P0(), space6, Policy::scalar(0.5)), ValidationError);
    const StateSpace space5(5);
    CHECK_THROWS_AS(
        build_generator(P0(), space5, Policy::per_state({{State{1, 1}, 0.5}})),
        ValidationError);
}
