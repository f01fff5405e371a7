#include <cmath>

#include "doctest.h"
#include "support.hpp"
#include "vturnpike/analytic.hpp"
#include "vturnpike/errors.hpp"
#include "vturnpike/ocp.hpp"

using namespace vturnpike;
using namespace vturnpike::analytic;

namespace {

// Initial adjoints written directly with cosh/sinh, usable for moderate T.
AdjointInit hyperbolic_form(const Scenario& s) {
    const double ch = std::cosh(s.T);
    const double sh = std::sinh(s.T);
    const double lq = (sh * (s.qT - s.q0) + (1.0 - ch) * (s.v0 + s.vT)) / (2.0 * (ch - 1.0) - s.T * sh);
    const double lv = (ch * s.v0 - s.vT + (ch - 1.0) * lq) / sh;
    return {lq, lv};
}

}  // namespace

TEST_SUITE("analytic") {

TEST_CASE("matrix exponential: identity, semigroup and ODE residual") {
    CHECK((exp_At(0.0) - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::Matrix4d A = state_adjoint_matrix();
    for (double s : {0.1, 0.7, 1.3, 2.9}) {
        for (double t : {0.2, 1.1, 3.4}) {
            const Eigen::Matrix4d lhs = exp_At(s + t);
            const Eigen::Matrix4d rhs = exp_At(s) * exp_At(t);
            CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * lhs.cwiseAbs().maxCoeff());
        }
    }
    for (double t : {0.0, 0.5, 2.0, 6.0}) {
        const double h = 1e-4;
        const Eigen::Matrix4d d = (exp_At(t + h) - exp_At(t - h)) / (2.0 * h);
        const Eigen::Matrix4d r = d - A * exp_At(t);
        CHECK(r.cwiseAbs().maxCoeff() <= 1e-8 * exp_At(t).cwiseAbs().maxCoeff());
    }
    // Agreement with a truncated series
    Eigen::Matrix4d series = Eigen::Matrix4d::Identity();
    Eigen::Matrix4d term = Eigen::Matrix4d::Identity();
    for (int k = 1; k < 40; ++k) {
        term = term * A * (0.8 / k);
        series += term;
    }
    CHECK((series - exp_At(0.8)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("initial adjoints agree with the hyperbolic form") {
    for (double T : {0.5, 2.0, 5.0, 12.0}) {
        const Scenario s{0.4, 3.0, 5.0, -1.5, T};
        const AdjointInit a = adjoint_initial_values(s);
        const AdjointInit b = hyperbolic_form(s);
        CHECK(a.lambda_q0 == doctest::Approx(b.lambda_q0).epsilon(1e-10));
        CHECK(a.lambda_v0 == doctest::Approx(b.lambda_v0).epsilon(1e-10));
    }
}

TEST_CASE("horizon guard") {
    CHECK_THROWS_AS(adjoint_initial_values({0, 1, 1, 0, 1e-4}), DomainError);
    CHECK_THROWS_AS(analytic_trajectory({0, 1, 1, 0, -1.0}, 10), DomainError);
    CHECK_NOTHROW(adjoint_initial_values({0, 1, 1, 0, kMinHorizon}));
    // small horizons stay continuous across the series branch
    const AdjointInit a = adjoint_initial_values({0, 1, 1, 0, 0.0499});
    const AdjointInit b = adjoint_initial_values({0, 1, 1, 0, 0.0501});
    const double sa = a.lambda_q0 * std::pow(0.0499, 3), sb = b.lambda_q0 * std::pow(0.0501, 3);
    CHECK(std::abs(sa - sb) < 1e-3 * std::abs(sa));
    CHECK(scaled_denominator(0.0499) == doctest::Approx(2.0 * std::tanh(0.0499 / 2.0) - 0.0499).epsilon(1e-8));
}

TEST_CASE("boundary values and state propagation") {
    for (double T : {1.0, 5.0, 20.0, 35.0, 200.0}) {
        const Solution sol = analytic_trajectory(testing::reference_scenario(T), 400);
        const Trajectory& tr = sol.trajectory;
        const Eigen::Index last = tr.nodes() - 1;
        CHECK(std::abs(tr.q(0, 0) - 0.0) < 1e-12);
        CHECK(std::abs(tr.v(0, 0) - 3.0) < 1e-12);
        CHECK(std::abs(tr.q(last, 0) - 5.0) < 1e-10);
        CHECK(std::abs(tr.v(last, 0) - 6.0) < 1e-10);
        CHECK(tr.q.allFinite());
        CHECK(tr.u.allFinite());
        CHECK((tr.u + *tr.lambda_v).cwiseAbs().maxCoeff() == 0.0);
        CHECK(((*tr.lambda_q).array() == sol.adjoint_init.lambda_q0).all());
    }
    const double T = 5.0;
    const Solution sol = analytic_trajectory(testing::reference_scenario(T), 50);
    const Eigen::Vector4d z0(0.0, 3.0, sol.adjoint_init.lambda_q0, sol.adjoint_init.lambda_v0);
    for (Eigen::Index k = 0; k < sol.trajectory.nodes(); k += 7) {
        const Eigen::Vector4d z = exp_At(sol.trajectory.t(k)) * z0;
        CHECK(z(0) == doctest::Approx(sol.trajectory.q(k, 0)).epsilon(1e-11));
        CHECK(z(1) == doctest::Approx(sol.trajectory.v(k, 0)).epsilon(1e-11));
        CHECK(z(3) == doctest::Approx((*sol.trajectory.lambda_v)(k, 0)).epsilon(1e-11));
    }
}

TEST_CASE("closed form satisfies the necessary conditions") {
    const Solution sol = analytic_trajectory(testing::reference_scenario(20.0), 2000);
    const PmpResiduals r = pmp_residuals(sol.trajectory, testing::reference_spec(20.0, 2000));
    CHECK(r.max_all() <= 1e-6);
}

TEST_CASE("velocity decomposition identities") {
    for (double T : {0.5, 5.0, 20.0, 35.0, 120.0}) {
        const Solution sol = analytic_trajectory(testing::reference_scenario(T), 500);
        const VelocityDecomposition& d = sol.decomposition;
        const Vec v = sol.trajectory.v.col(0);
        CHECK((d.zero_velocity + d.arc + d.coupling - v).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + v.cwiseAbs().maxCoeff()));
        CHECK((d.factor_product - d.zero_velocity - d.coupling).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(std::abs(d.shape_factor(0)) < 1e-12);
        CHECK(std::abs(d.shape_factor(500)) < 1e-12);
    }
    // v0 = vT = 0 leaves only the zero-velocity term
    const Solution z = analytic_trajectory({0.0, 0.0, 5.0, 0.0, 10.0}, 100);
    CHECK(z.decomposition.arc.cwiseAbs().maxCoeff() == 0.0);
    CHECK(z.decomposition.coupling.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("exact objective") {
    const Scenario s = testing::reference_scenario(20.0);
    const Solution coarse = analytic_trajectory(s, 2000);
    const Solution fine = analytic_trajectory(s, 64000);
    CHECK(std::abs(fine.trajectory.objective - coarse.exact_objective) < 1e-6);
    CHECK(std::abs(coarse.trajectory.objective - coarse.exact_objective) > std::abs(fine.trajectory.objective - coarse.exact_objective));
    const Solution zero = analytic_trajectory({1.0, 0.0, 1.0, 0.0, 7.0}, 50);
    CHECK(zero.exact_objective == 0.0);
    CHECK(zero.trajectory.v.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sinh ratio is stable") {
    CHECK(sinh_ratio(2.0, 5.0) == doctest::Approx(std::sinh(2.0) / std::sinh(5.0)).epsilon(1e-14));
    CHECK(sinh_ratio(700.0, 800.0) == doctest::Approx(std::exp(-100.0)).epsilon(1e-12));
    CHECK(sinh_ratio(0.0, 3.0) == 0.0);
    CHECK(sinh_ratio(3.0, 3.0) == doctest::Approx(1.0));
}

}
