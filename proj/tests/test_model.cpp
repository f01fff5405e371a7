#include <cmath>
#include <random>

#include "doctest.h"
#include "support.hpp"
#include "vturnpike/errors.hpp"
#include "vturnpike/exprlang.hpp"
#include "vturnpike/model.hpp"

using namespace vturnpike;

TEST_SUITE("model") {

TEST_CASE("builtin systems") {
    const SystemModel di = builtin_system("double_integrator");
    CHECK(di.n_q() == 1);
    CHECK(di.f(Vec::Constant(1, 4.0), Vec::Constant(1, -2.0))(0) == -2.0);

    const SystemModel dm = builtin_system("damped_integrator", {1, 0.5});
    CHECK(dm.f(Vec::Constant(1, 2.0), Vec::Constant(1, 3.0))(0) == doctest::Approx(2.0));

    const SystemModel inline_c = builtin_system("damped_integrator(0.25)");
    CHECK(inline_c.f(Vec::Constant(1, 4.0), Vec::Zero(1))(0) == doctest::Approx(-1.0));

    const SystemModel planar = builtin_system("double_integrator", {3, 0.0});
    CHECK(planar.n_q() == 3);
    CHECK(planar.m() == 3);
}

TEST_CASE("unknown system lists the registry") {
    try {
        builtin_system("triple_integrator");
        FAIL("expected LookupError");
    } catch (const LookupError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("double_integrator") != std::string::npos);
        CHECK(msg.find("damped_integrator") != std::string::npos);
    }
    CHECK_THROWS_AS(builtin_system("damped_integrator(abc)"), ValidationError);
}

TEST_CASE("dimension checks on evaluation") {
    const SystemModel di = builtin_system("double_integrator");
    CHECK_THROWS_AS(di.f(Vec::Zero(2), Vec::Zero(1)), ValidationError);
    CHECK_THROWS_AS(di.df_du(Vec::Zero(1), Vec::Zero(3)), ValidationError);
}

TEST_CASE("jacobians match finite differences at random points") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> d(-3.0, 3.0);
    const std::vector<SystemModel> systems{
        builtin_system("double_integrator", {2, 0.0}), builtin_system("damped_integrator", {2, 0.7}),
        expr::system_from_expressions("pendulum_like", {"u[0] - sin(v[0])*v[1]", "cos(v[0]) + u[1]^3"}, 2, 2)};
    for (const SystemModel& s : systems) {
        for (int trial = 0; trial < 100; ++trial) {
            const Vec v = (Vec(2) << d(rng), d(rng)).finished();
            const Vec u = (Vec(2) << d(rng), d(rng)).finished();
            const Mat jv = central_difference_jacobian([&](const Vec& x) { return s.f(x, u); }, v);
            const Mat ju = central_difference_jacobian([&](const Vec& x) { return s.f(v, x); }, u);
            CHECK((s.df_dv(v, u) - jv).cwiseAbs().maxCoeff() < 1e-6 * (1.0 + jv.cwiseAbs().maxCoeff()));
            CHECK((s.df_du(v, u) - ju).cwiseAbs().maxCoeff() < 1e-6 * (1.0 + ju.cwiseAbs().maxCoeff()));
        }
    }
}

TEST_CASE("weighted hessian fallback") {
    const SystemModel s = expr::system_from_expressions("s", {"v[0]^2*u[0]"}, 1, 1);
    const Vec v = Vec::Constant(1, 1.5);
    const Vec u = Vec::Constant(1, -0.5);
    const Mat h = s.weighted_hessian(v, u, Vec::Constant(1, 2.0));
    // w * [[2u, 2v], [2v, 0]]
    CHECK(h(0, 0) == doctest::Approx(2.0 * 2.0 * u(0)).epsilon(1e-6));
    CHECK(h(0, 1) == doctest::Approx(2.0 * 2.0 * v(0)).epsilon(1e-6));
    CHECK(h(1, 0) == doctest::Approx(2.0 * 2.0 * v(0)).epsilon(1e-6));
    CHECK(std::abs(h(1, 1)) < 1e-6);
}

TEST_CASE("quadratic cost derivatives and validation") {
    Mat Q(2, 2);
    Q << 2, 0.5, 0.5, 1;
    const Mat R = Mat::Identity(1, 1) * 3.0;
    const StageCost c = quadratic_cost(Q, R, (Vec(2) << 1, -1).finished(), Vec::Constant(1, 0.5));
    const Vec v = (Vec(2) << 0.3, 0.7).finished();
    const Vec u = Vec::Constant(1, -0.2);
    const Vec dv = v - (Vec(2) << 1, -1).finished();
    CHECK(c.value(v, u) == doctest::Approx(0.5 * dv.dot(Q * dv) + 0.5 * 3.0 * 0.49));
    CHECK((c.grad_v(v, u) - Q * dv).norm() < 1e-14);
    CHECK(c.grad_u(v, u)(0) == doctest::Approx(3.0 * -0.7));
    CHECK((c.hess_vv(v, u) - Q).norm() == 0.0);
    CHECK(c.hess_vu(v, u).norm() == 0.0);

    Mat bad(2, 2);
    bad << 1, 0, 0, -1;
    CHECK_THROWS_AS(quadratic_cost(bad, R), ValidationError);
    CHECK_THROWS_AS(quadratic_cost(Q, Mat::Zero(1, 1)), ValidationError);
    Mat asym(2, 2);
    asym << 1, 1, 0, 1;
    CHECK_THROWS_AS(quadratic_cost(asym, R), ValidationError);

    const StageCost half = c.scaled(0.5);
    CHECK(half.value(v, u) == doctest::Approx(0.5 * c.value(v, u)));
}

TEST_CASE("ocp spec validation") {
    OcpSpec s = testing::reference_spec(20.0, 100);
    CHECK_NOTHROW(s.validate());
    s.T = 0.0;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = testing::reference_spec(20.0, 1);
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = testing::reference_spec(20.0, 100);
    s.q0 = Vec::Zero(2);
    CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("simulate the double integrator") {
    const SystemModel di = builtin_system("double_integrator");
    const Trajectory tr = simulate(di, [](double) { return Vec::Ones(1); }, Vec::Zero(1), Vec::Constant(1, 2.0), 3.0, 30);
    CHECK(tr.nodes() == 31);
    CHECK(tr.q(30, 0) == doctest::Approx(2.0 * 3.0 + 4.5));
    CHECK(tr.v(30, 0) == doctest::Approx(5.0));
    CHECK(!tr.has_adjoints());
}

TEST_CASE("trapezoidal objective and admissibility") {
    const StageCost c = quadratic_cost(Mat::Identity(1, 1), Mat::Identity(1, 1));
    const Vec t = uniform_grid(0.0, 2.0, 4);
    const Mat v = Mat::Constant(5, 1, 2.0);
    const Mat u = Mat::Zero(5, 1);
    CHECK(trapezoid_objective(t, v, u, c) == doctest::Approx(4.0));

    Trajectory tr;
    tr.t = t;
    tr.q = Mat::Zero(5, 1);
    tr.v = v;
    tr.u = u;
    tr.v(3, 0) = 10.0;
    Box box{Vec::Constant(1, -5.0), Vec::Constant(1, 5.0), Vec(), Vec()};
    const AdmissibilityReport rep = check_admissibility(tr, box);
    CHECK(!rep.admissible);
    REQUIRE(rep.violating_nodes.size() == 1);
    CHECK(rep.violating_nodes[0] == 3);
}

TEST_CASE("trajectory validation") {
    Trajectory tr;
    CHECK_THROWS_AS(tr.validate(), ValidationError);
    tr.t = (Vec(3) << 0, 1, 1).finished();
    tr.q = tr.v = tr.u = Mat::Zero(3, 1);
    CHECK_THROWS_AS(tr.validate(), ValidationError);
}

}
