#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "support.hpp"
#include "vturnpike/analytic.hpp"
#include "vturnpike/errors.hpp"
#include "vturnpike/ocp.hpp"
#include "vturnpike/steady.hpp"
#include "vturnpike/turnpike.hpp"

using namespace vturnpike;

namespace {

Trim origin() { return Trim{Vec::Zero(1), Vec::Zero(1), Vec::Zero(1), 0.0}; }

Trajectory from_deviation(const Vec& t, const Vec& d) {
    Trajectory tr;
    tr.t = t;
    tr.q = Mat::Zero(t.size(), 1);
    tr.v = d;
    tr.u = Mat::Zero(t.size(), 1);
    return tr;
}

std::vector<Trajectory> analytic_sweep(int N) {
    std::vector<Trajectory> out;
    for (double T : {5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0}) {
        out.push_back(analytic::analytic_trajectory(testing::reference_scenario(T), N).trajectory);
    }
    return out;
}

}  // namespace

TEST_SUITE("turnpike") {

TEST_CASE("theta measure on a linear ramp") {
    const Vec t = uniform_grid(0.0, 1.0, 1);
    const Trajectory tr = from_deviation(t, (Vec(2) << 0.0, 1.0).finished());
    CHECK(theta_measure(tr, origin(), 0.25) == doctest::Approx(0.75));
    CHECK(theta_measure(tr, origin(), 1.0) == 0.0);
    CHECK(theta_measure(tr, origin(), 0.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(theta_measure(tr, origin(), -0.1), ValidationError);
}

TEST_CASE("theta measure extremes") {
    const auto sol = analytic::analytic_trajectory(testing::reference_scenario(20.0), 400);
    const Vec d = trim_deviation(sol.trajectory, origin());
    CHECK(theta_measure(sol.trajectory, origin(), 0.5 * d.minCoeff()) == doctest::Approx(20.0));
    CHECK(theta_measure(sol.trajectory, origin(), d.maxCoeff()) == 0.0);
    CHECK(theta_measure(sol.trajectory, origin(), 1e6) == 0.0);
}

TEST_CASE("theta measure is non-increasing in eps on random trajectories") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> x(-2.0, 2.0);
    std::uniform_real_distribution<double> h(0.01, 0.5);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 5 + trial;
        Trajectory tr;
        tr.t.resize(n);
        tr.t(0) = 0.0;
        for (int k = 1; k < n; ++k) tr.t(k) = tr.t(k - 1) + h(rng);
        tr.q = Mat::Zero(n, 2);
        tr.v.resize(n, 2);
        tr.u.resize(n, 1);
        for (int k = 0; k < n; ++k) {
            tr.v(k, 0) = x(rng);
            tr.v(k, 1) = x(rng);
            tr.u(k, 0) = x(rng);
        }
        const Trim trim{Vec::Constant(2, 0.1), Vec::Constant(1, -0.2), std::nullopt, 0.0};
        double prev = std::numeric_limits<double>::infinity();
        for (double eps = 0.0; eps < 4.0; eps += 0.05) {
            const double mu = theta_measure(tr, trim, eps);
            CHECK(mu <= prev + 1e-12);
            CHECK(mu >= 0.0);
            CHECK(mu <= tr.horizon() + 1e-12);
            prev = mu;
        }
    }
}

TEST_CASE("common trim") {
    const Trim a = origin();
    Trim b = origin();
    CHECK_NOTHROW(common_trim({a, b}));
    b.v_bar(0) = 0.5;
    CHECK_THROWS_AS(common_trim({a, b}), ValidationError);
    CHECK_THROWS_AS(common_trim({}), ValidationError);
}

TEST_CASE("turnpike report on the closed-form sweep") {
    const auto sweep = analytic_sweep(1000);
    TurnpikeOptions opt;
    opt.eps_grid = {1.0, 0.1, 0.5, 0.25, 1e3};
    const TurnpikeReport rep = turnpike_report(sweep, origin(), opt);
    REQUIRE(rep.epsilons.size() == 5);
    CHECK(rep.epsilons.front() == 0.1);
    CHECK(rep.entries.front().interior_empty);  // T = 5 <= 2 nu_bar
    CHECK(!rep.entries.back().interior_empty);
    for (const auto& e : rep.entries) CHECK(e.measures.back() == 0.0);
    CHECK(rep.verdict);
    for (std::size_t i = 0; i < rep.epsilons.size(); ++i) CHECK(rep.nu_of_eps[i] <= 35.0);
    // interior deviation of the plateau decays like 1/T
    for (const auto& e : rep.entries) {
        if (!e.interior_empty) CHECK(e.T_times_max_deviation == doctest::Approx(e.T * e.max_interior_deviation));
    }
}

TEST_CASE("a solution that never approaches the trim is flagged") {
    std::vector<Trajectory> sweep;
    for (double T : {10.0, 20.0, 30.0}) {
        const Vec t = uniform_grid(0.0, T, 100);
        sweep.push_back(from_deviation(t, Vec::Constant(t.size(), 0.3)));
    }
    TurnpikeOptions opt;
    opt.eps_grid = {0.1};
    const TurnpikeReport rep = turnpike_report(sweep, origin(), opt);
    CHECK(rep.nu_of_eps[0] == doctest::Approx(30.0));
    // saturated rows are skipped, so a constant offset is inconclusive rather than bounded by luck
    std::vector<Trajectory> drift;
    for (double T : {10.0, 20.0, 30.0}) {
        const Vec t = uniform_grid(0.0, T, 100);
        Vec d = Vec::Constant(t.size(), 0.3);
        d.head(10).setZero();
        drift.push_back(from_deviation(t, d));
    }
    const TurnpikeReport rep2 = turnpike_report(drift, origin(), opt);
    CHECK(!rep2.verdict);
}

TEST_CASE("measure table validation") {
    TurnpikeReport rep;
    rep.epsilons = {0.1, 0.2};
    TurnpikeEntry e;
    e.T = 10.0;
    e.measures = {3.0, 4.0};
    rep.entries.push_back(e);
    CHECK_THROWS_AS(validate_measure_table(rep), ValidationError);
    rep.entries[0].measures = {4.0, 3.0};
    CHECK_NOTHROW(validate_measure_table(rep));
    rep.entries[0].measures = {11.0, 3.0};
    CHECK_THROWS_AS(validate_measure_table(rep), ValidationError);
}

TEST_CASE("dissipativity of the quadratic problem") {
    const auto sweep = analytic_sweep(2000);
    const StageCost cost = quadratic_cost(Mat::Identity(1, 1), Mat::Identity(1, 1));
    DissipativityOptions fixed;
    fixed.alpha_a = 0.5;
    const DissipativityReport r = check_dissipativity(sweep, origin(), cost, StorageSpec::zero(), fixed);
    CHECK(r.dissipative);
    CHECK(r.strict);
    CHECK(r.strict_violation_count == 0);
    CHECK(r.worst_strict_margin <= 1e-9);
    CHECK(r.s_hat == 0.0);
    CHECK(r.scope == "certified on sweep");

    const DissipativityReport fit = check_dissipativity(sweep, origin(), cost, StorageSpec::zero());
    CHECK(fit.alpha_fitted);
    CHECK(fit.alpha_a >= 0.49);
    CHECK(fit.alpha_a <= 0.51);

    DissipativityOptions too_big;
    too_big.alpha_a = 0.75;
    const DissipativityReport bad = check_dissipativity(sweep, origin(), cost, StorageSpec::zero(), too_big);
    CHECK(bad.dissipative);
    CHECK(!bad.strict);
    CHECK(bad.strict_violation_count > 0);
}

TEST_CASE("storage violations are located") {
    // q = t, v = 1, u = 0 against the origin with S = q^2 / 2:
    // S(t_j) - S(t_i) - int w = (t_j - t_i)(t_j + t_i - 1) / 2.
    const Vec t = uniform_grid(0.0, 2.0, 20);
    Trajectory tr;
    tr.t = t;
    tr.q = t;
    tr.v = Mat::Ones(t.size(), 1);
    tr.u = Mat::Zero(t.size(), 1);
    Mat P = Mat::Zero(2, 2);
    P(0, 0) = 1.0;
    const StageCost cost = quadratic_cost(Mat::Identity(1, 1), Mat::Identity(1, 1));
    DissipativityOptions opt;
    opt.alpha_a = 0.0;
    const DissipativityReport r = check_dissipativity({tr}, origin(), cost, StorageSpec::quadratic(P, Vec::Zero(2)), opt);
    CHECK(!r.dissipative);
    CHECK(r.worst_margin == doctest::Approx(1.5 * 1.5 / 2.0));  // [0.5, 2]
    std::size_t expected = 0;
    for (Eigen::Index i = 0; i < t.size(); ++i)
        for (Eigen::Index j = i + 1; j < t.size(); ++j)
            if (0.5 * (t(j) - t(i)) * (t(j) + t(i) - 1.0) > 1e-9) ++expected;
    CHECK(r.violation_count == expected);
    for (const auto& v : r.violations) {
        if (v.strict) continue;
        CHECK(v.margin == doctest::Approx(0.5 * (v.t_end - v.t_start) * (v.t_end + v.t_start - 1.0)));
    }
    CHECK(!r.supply_integrals.empty());
    CHECK(r.supply_integrals[0].size() == 20);
}

TEST_CASE("invalid storage is rejected") {
    const StageCost cost = quadratic_cost(Mat::Identity(1, 1), Mat::Identity(1, 1));
    const auto sweep = analytic_sweep(100);
    Mat P = Mat::Identity(2, 2);
    P(1, 1) = -1.0;
    CHECK_THROWS_AS(check_dissipativity(sweep, origin(), cost, StorageSpec::quadratic(P, Vec::Zero(2))),
                    ValidationError);
    Mat asym = Mat::Identity(2, 2);
    asym(0, 1) = 1.0;
    CHECK_THROWS_AS(StorageSpec::quadratic(asym, Vec::Zero(2)), ValidationError);
}

TEST_CASE("occupation bound") {
    const auto sweep = analytic_sweep(1000);
    const StageCost cost = quadratic_cost(Mat::Identity(1, 1), Mat::Identity(1, 1));
    DissipativityOptions opt;
    opt.alpha_a = 0.5;
    const DissipativityReport r = check_dissipativity(sweep, origin(), cost, StorageSpec::zero(), opt);
    const Trim trim = origin();
    const auto rows = occupation_bound(r, {0.0, 0.1, 0.25, 0.5, 1.0}, sweep, &trim);
    CHECK(std::isinf(rows[0].bound));
    for (const auto& row : rows) {
        if (row.eps > 0.0) CHECK(row.bound == doctest::Approx(r.cost_bound / (0.5 * row.eps * row.eps)));
        CHECK(row.holds);
    }
    DissipativityOptions plain;
    plain.alpha_a = 0.0;
    const DissipativityReport p = check_dissipativity(sweep, origin(), cost, StorageSpec::zero(), plain);
    CHECK_THROWS_AS(occupation_bound(p, {0.1}), DomainError);
}

TEST_CASE("adjoint intervals on a trim trajectory") {
    const SystemModel sys = builtin_system("damped_integrator", {1, 0.5});
    const StageCost cost = testing::tracking_cost();
    const SteadyStateResult st =
        solve_velocity_steady_state({sys, cost, Vec(), Vec(), Vec(), std::nullopt});
    const double T = 12.0;
    Trajectory tr;
    tr.t = uniform_grid(0.0, T, 240);
    const Eigen::Index n = tr.t.size();
    tr.q = st.trim.v_bar(0) * tr.t;
    tr.v = Mat::Constant(n, 1, st.trim.v_bar(0));
    tr.u = Mat::Constant(n, 1, st.trim.u_bar(0));
    tr.lambda_q = Mat::Zero(n, 1);
    tr.lambda_v = Mat::Constant(n, 1, (*st.trim.lambda_bar)(0));
    const AdjointIntervalReport rep = adjoint_intervals(tr, sys, cost, 1e-9, 1e-9);
    REQUIRE(rep.intervals.size() == 1);
    CHECK(rep.intervals[0].t1 == 0.0);
    CHECK(rep.intervals[0].t2 == T);
    CHECK(rep.intervals[0].max_kkt_residual <= 1e-8);
    CHECK(rep.intervals[0].kkt_verified);

    // a kink in lambda_v splits the interval
    (*tr.lambda_v)(120, 0) += 1.0;
    const AdjointIntervalReport split = adjoint_intervals(tr, sys, cost, 1e-9, 1e-9);
    CHECK(split.intervals.size() == 2);
}

TEST_CASE("adjoint intervals on a generic solution") {
    const auto sol = analytic::analytic_trajectory(testing::reference_scenario(20.0), 2000);
    const SystemModel sys = builtin_system("double_integrator");
    const StageCost cost = quadratic_cost(Mat::Identity(1, 1), Mat::Identity(1, 1));
    const AdjointIntervalReport rep = adjoint_intervals(sol.trajectory, sys, cost, 1e-6, 1e-6);
    CHECK(rep.intervals.empty());
    CHECK(rep.max_abs_lambda_q > 0.1);

    const double inf = std::numeric_limits<double>::infinity();
    const AdjointIntervalReport all = adjoint_intervals(sol.trajectory, sys, cost, inf, inf);
    REQUIRE(all.intervals.size() == 1);
    CHECK(all.intervals[0].t1 == 0.0);
    CHECK(all.intervals[0].t2 == 20.0);

    Trajectory bare = sol.trajectory;
    bare.lambda_v.reset();
    CHECK_THROWS_AS(adjoint_intervals(bare, sys, cost, 1e-6, 1e-6), ValidationError);
}

}
