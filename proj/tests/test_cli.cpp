#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "vturnpike/analytic.hpp"
#include "vturnpike/cli.hpp"
#include "vturnpike/csv.hpp"
#include "vturnpike/errors.hpp"
#include "vturnpike/scenario.hpp"

using namespace vturnpike;
namespace fs = std::filesystem;

namespace {

const std::string kScenarios = VTURNPIKE_SCENARIO_DIR;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("vturnpike_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string write_file(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
    return p.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream s;
    s << is.rdbuf();
    return s.str();
}

const char* kBase = R"({
  "system": {"builtin": "double_integrator"},
  "cost": {"quadratic": {"Qv": 1, "Ru": 1}},
  "ocp": {OCP}
})";

std::string with_ocp(const std::string& ocp) {
    std::string s = kBase;
    s.replace(s.find("{OCP}"), 5, ocp);
    return s;
}

std::string validation_message(const std::string& text) {
    try {
        parse_scenario(text);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("scenario schema errors name the path") {
    CHECK(validation_message(with_ocp(R"({"q0": 0, "v0": 3, "qT": 5, "vT": 6})")).find("ocp.T") != std::string::npos);
    CHECK(validation_message(with_ocp(R"({"T": 5, "q0": 0, "v0": 3, "qT": 5, "vT": 6, "NN": 3})")).find("ocp.NN") !=
          std::string::npos);
    CHECK(validation_message(with_ocp(R"({"T_sweep": [5, 0], "q0": 0, "v0": 3, "qT": 5, "vT": 6})"))
              .find("ocp.T_sweep[1]") != std::string::npos);
    CHECK(validation_message(with_ocp(R"({"T": -2, "q0": 0, "v0": 3, "qT": 5, "vT": 6})")).find("ocp.T") !=
          std::string::npos);
    CHECK(validation_message(with_ocp(R"({"T": 5, "q0": [0, 1], "v0": 3, "qT": 5, "vT": 6})")).find("ocp.q0") !=
          std::string::npos);
    CHECK(validation_message(with_ocp(R"({"T": 5, "v0": 3, "qT": 5, "vT": 6})")).find("ocp.q0") != std::string::npos);
    CHECK(validation_message(R"({"system": {"builtin": "nope"}, "cost": {"quadratic": {}}, "ocp": {}})")
              .find("system.builtin") != std::string::npos);
    CHECK(validation_message(R"({"system": {"builtin": "double_integrator"}, "cost": {"expression": "u[0]^"},
                                "ocp": {"T": 1, "q0": 0, "v0": 0, "qT": 0, "vT": 0}})")
              .find("cost.expression") != std::string::npos);
    CHECK(validation_message(R"({"system": {"builtin": "double_integrator"}, "cost": {"quadratic": {}},
                                "ocp": {"T": 1, "q0": 0, "v0": 0, "qT": 0, "vT": 0},
                                "dissipativity": {"alpha_a": "guess"}})")
              .find("dissipativity.alpha_a") != std::string::npos);
    CHECK(validation_message(R"({"systm": {}})").find("systm") != std::string::npos);
    CHECK(validation_message("{ not json").find("JSON") != std::string::npos);
}

TEST_CASE("scenario files in the repository parse") {
    const ScenarioFile s = load_scenario(kScenarios + "/double_integrator_sweep.json");
    CHECK(s.closed_form);
    CHECK(s.T_sweep.size() == 7);
    CHECK(s.N == 2000);
    CHECK(s.turnpike.has_value());
    CHECK(s.dissipativity.has_value());
    CHECK(!s.dissipativity->alpha_a.has_value());
    const ScenarioFile d = load_scenario(kScenarios + "/damped_integrator.json");
    CHECK(!d.closed_form);
    CHECK(d.horizons().size() == 1);
    CHECK_THROWS_AS(load_scenario(kScenarios + "/missing.json"), IoError);
}

TEST_CASE("csv round trip preserves theta measures") {
    const auto sol = analytic::analytic_trajectory(testing::reference_scenario(20.0), 2000);
    const fs::path dir = scratch("csv");
    write_trajectory_csv((dir / "a.csv").string(), sol.trajectory);
    const Trajectory back = read_trajectory_csv((dir / "a.csv").string());
    CHECK(back.has_adjoints());
    CHECK((back.v - sol.trajectory.v).cwiseAbs().maxCoeff() == 0.0);
    CHECK((*back.lambda_v - *sol.trajectory.lambda_v).cwiseAbs().maxCoeff() == 0.0);
    const Trim trim{Vec::Zero(1), Vec::Zero(1), std::nullopt, 0.0};
    for (double eps : {0.1, 0.25, 0.5, 1.0}) {
        CHECK(std::abs(theta_measure(back, trim, eps) - theta_measure(sol.trajectory, trim, eps)) <= 1e-12);
    }
}

TEST_CASE("csv headers for vector signals") {
    Trajectory tr;
    tr.t = uniform_grid(0.0, 1.0, 2);
    tr.q = tr.v = Mat::Ones(3, 2);
    tr.u = Mat::Zero(3, 1);
    const auto cols = trajectory_columns(tr);
    REQUIRE(cols.size() == 6);
    CHECK(cols[1] == "q[0]");
    CHECK(cols[4] == "v[1]");
    CHECK(cols[5] == "u");
    std::stringstream ss;
    write_trajectory_csv(ss, tr);
    const Trajectory back = read_trajectory_csv(ss);
    CHECK(back.q.cols() == 2);
    CHECK(!back.has_adjoints());

    std::stringstream bad("t,q,v,u\n0,1,2\n");
    CHECK_THROWS_AS(read_trajectory_csv(bad), ValidationError);
    std::stringstream nonnum("t,q,v,u\n0,1,x,2\n");
    CHECK_THROWS_AS(read_trajectory_csv(nonnum), ValidationError);
    CHECK(format_number(0.1) == "0.10000000000000001");
}

TEST_CASE("solve command writes deterministic csv") {
    const fs::path dir = scratch("solve");
    std::ostringstream out, err;
    const std::string scen = kScenarios + "/double_integrator_sweep.json";
    cli::Options quiet{true};
    for (const auto method : {cli::Method::Analytic, cli::Method::Direct, cli::Method::Indirect}) {
        CHECK(cli::cmd_solve(scen, method, (dir / "a.csv").string(), quiet, out, err) == 0);
        CHECK(cli::cmd_solve(scen, method, (dir / "b.csv").string(), quiet, out, err) == 0);
        CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    }
    const Trajectory tr = read_trajectory_csv((dir / "a.csv").string());
    CHECK(tr.nodes() == 2001);
    const Eigen::Index mid = 1000;
    CHECK(std::abs(tr.v(mid, 0)) < 0.5);
}

TEST_CASE("solve command exit codes") {
    const fs::path dir = scratch("exit");
    std::ostringstream out, err;
    const cli::Options quiet{true};
    const std::string missing_T =
        write_file(dir / "missing.json", with_ocp(R"({"q0": 0, "v0": 3, "qT": 5, "vT": 6})"));
    CHECK(cli::cmd_solve(missing_T, cli::Method::Direct, (dir / "x.csv").string(), quiet, out, err) == 1);
    CHECK(err.str().find("ocp.T") != std::string::npos);
    CHECK(cli::cmd_solve((dir / "nope.json").string(), cli::Method::Direct, (dir / "x.csv").string(), quiet, out,
                         err) == 3);
    const std::string ok = write_file(dir / "ok.json", with_ocp(R"({"T": 3, "q0": 0, "v0": 3, "qT": 5, "vT": 6})"));
    CHECK(cli::cmd_solve(ok, cli::Method::Direct, (dir / "no_such_dir" / "x.csv").string(), quiet, out, err) == 3);
    const std::string damped = kScenarios + "/damped_integrator.json";
    CHECK(cli::cmd_solve(damped, cli::Method::Analytic, (dir / "x.csv").string(), quiet, out, err) == 1);

    std::string tight = with_ocp(R"({"T": 3, "q0": 0, "v0": 3, "qT": 5, "vT": 6, "N": 50})");
    tight.insert(tight.rfind('}'), R"(, "system_unused": 1)");
    CHECK(cli::cmd_solve(write_file(dir / "typo.json", tight), cli::Method::Direct, (dir / "x.csv").string(), quiet,
                         out, err) == 1);

    const std::string stuck = write_file(
        dir / "stuck.json",
        R"({"system": {"builtin": "double_integrator"}, "cost": {"expression": "0.5*v[0]^2 + 0.25*u[0]^4"},
            "ocp": {"T": 4, "q0": 0, "v0": 3, "qT": 5, "vT": 6, "N": 50},
            "solver": {"max_iter": 1, "warm_start_fallback": false}})");
    std::ostringstream err2;
    CHECK(cli::cmd_solve(stuck, cli::Method::Indirect, (dir / "x.csv").string(), quiet, out, err2) == 2);
    CHECK(err2.str().find("error:") != std::string::npos);
    CHECK_THROWS_AS(cli::parse_method("spectral"), ValidationError);
}

TEST_CASE("sweep command") {
    const fs::path dir = scratch("sweep");
    std::ostringstream out, err;
    const cli::Options quiet{true};
    const std::string one = write_file(
        dir / "one.json", with_ocp(R"({"T_sweep": [12], "q0": 0, "v0": 3, "qT": 5, "vT": 6, "N": 400})"));
    CHECK(cli::cmd_sweep(one, cli::Method::Analytic, (dir / "out").string(), quiet, out, err) == 0);
    CHECK(fs::exists(dir / "out" / "trajectory_T12.csv"));
    const std::string summary = slurp(dir / "out" / "summary.csv");
    CHECK(summary.rfind("T,objective,max_interior_deviation,T_times_max_deviation,lambda_q0,lambda_v0\n", 0) == 0);
    CHECK(std::count(summary.begin(), summary.end(), '\n') == 2);

    const std::string single = write_file(dir / "single.json", with_ocp(R"({"T": 5, "q0": 0, "v0": 3, "qT": 5, "vT": 6})"));
    CHECK(cli::cmd_sweep(single, cli::Method::Analytic, (dir / "out2").string(), quiet, out, err) == 1);
    CHECK(err.str().find("ocp.T_sweep") != std::string::npos);

    const std::string several = write_file(
        dir / "several.json", with_ocp(R"({"T_sweep": [5, 10, 15], "q0": 0, "v0": 3, "qT": 5, "vT": 6, "N": 300})"));
    CHECK(cli::cmd_sweep(several, cli::Method::Direct, (dir / "out3").string(), quiet, out, err) == 0);
    const auto first = slurp(dir / "out3" / "summary.csv");
    CHECK(cli::cmd_sweep(several, cli::Method::Direct, (dir / "out3").string(), quiet, out, err) == 0);
    CHECK(slurp(dir / "out3" / "summary.csv") == first);
    CHECK(fs::exists(dir / "out3" / "trajectory_T15.csv"));
}

TEST_CASE("steady command") {
    std::ostringstream out, err;
    CHECK(cli::cmd_steady(kScenarios + "/double_integrator_sweep.json", {true}, out, err) == 0);
    CHECK(out.str().find("v_bar = [0]") != std::string::npos);
    CHECK(out.str().find("minimizer = yes") != std::string::npos);

    std::ostringstream out2;
    CHECK(cli::cmd_steady(kScenarios + "/damped_integrator.json", {true}, out2, err) == 0);
    CHECK(out2.str().find("v_bar = [1.6") != std::string::npos);

    const fs::path dir = scratch("steady");
    const std::string far = write_file(dir / "far.json", R"({
      "system": {"builtin": "double_integrator"},
      "cost": {"expression": "(v[0]^2 - 1)^2 + 0.1*(v[0] - 1)^2 + u[0]^2"},
      "ocp": {"T": 5, "q0": 0, "v0": 0, "qT": 0, "vT": 0},
      "steady": {"v_guess": 0.0}
    })");
    std::ostringstream out3;
    CHECK(cli::cmd_steady(far, {false}, out3, err) == 0);
    CHECK(out3.str().find("multistart") != std::string::npos);
}

TEST_CASE("turnpike command") {
    const fs::path dir = scratch("turnpike");
    std::ostringstream out, err;
    const cli::Options quiet{true};
    const std::string scen = write_file(dir / "tp.json", R"({
      "system": {"builtin": "double_integrator"},
      "cost": {"quadratic": {}},
      "ocp": {"T_sweep": [5, 10, 20], "q0": 0, "v0": 3, "qT": 5, "vT": 6, "N": 400},
      "turnpike": {"eps_grid": [0.5, 1.0, 1e9]},
      "dissipativity": {"storage": "zero", "alpha_a": "fit"}
    })");
    CHECK(cli::cmd_turnpike(scen, cli::Method::Analytic, (dir / "out").string(), quiet, out, err) == 0);
    for (const char* f : {"theta.csv", "hyperbolic.csv", "dissipativity.json", "occupation_bound.csv", "verdict.txt"}) {
        CHECK(fs::exists(dir / "out" / f));
    }
    const std::string theta = slurp(dir / "out" / "theta.csv");
    CHECK(theta.find("1000000000,0,0,0") != std::string::npos);
    CHECK(out.str().find("verdict:") != std::string::npos);
    CHECK(slurp(dir / "out" / "dissipativity.json").find("\"strict\": true") != std::string::npos);

    const std::string no_diss = write_file(dir / "nd.json", R"({
      "system": {"builtin": "double_integrator"},
      "cost": {"quadratic": {}},
      "ocp": {"T_sweep": [5, 10], "q0": 0, "v0": 3, "qT": 5, "vT": 6, "N": 200},
      "turnpike": {}
    })");
    std::ostringstream out2;
    CHECK(cli::cmd_turnpike(no_diss, cli::Method::Analytic, (dir / "out2").string(), {false}, out2, err) == 0);
    CHECK(out2.str().find("skipped") != std::string::npos);
    CHECK(!fs::exists(dir / "out2" / "dissipativity.json"));

    const std::string no_tp = write_file(dir / "nt.json", with_ocp(R"({"T": 5, "q0": 0, "v0": 3, "qT": 5, "vT": 6})"));
    CHECK(cli::cmd_turnpike(no_tp, cli::Method::Analytic, (dir / "out3").string(), quiet, out, err) == 1);
}

}
