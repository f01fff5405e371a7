#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "vturnpike/analytic.hpp"
#include "vturnpike/cli.hpp"
#include "vturnpike/csv.hpp"
#include "vturnpike/errors.hpp"
#include "vturnpike/exprlang.hpp"
#include "vturnpike/model.hpp"
#include "vturnpike/ocp.hpp"
#include "vturnpike/scenario.hpp"
#include "vturnpike/steady.hpp"
#include "vturnpike/turnpike.hpp"

namespace py = pybind11;
using namespace vturnpike;

namespace {

// Runs a CLI command, returning (exit_code, stdout, stderr).
template <class F>
py::tuple run_command(F&& f) {
    std::ostringstream out, err;
    int code = 0;
    {
        py::gil_scoped_release release;
        code = f(out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Velocity turnpike analysis for translation-symmetric optimal control problems";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<LookupError>(m, "LookupError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<SingularityError>(m, "SingularityError", base.ptr());
    py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<SyntaxError>(m, "SyntaxError", base.ptr());

    py::class_<NewtonConfig>(m, "NewtonConfig")
        .def(py::init<>())
        .def_readwrite("tol_residual", &NewtonConfig::tol_residual)
        .def_readwrite("max_iter", &NewtonConfig::max_iter)
        .def_readwrite("backtrack", &NewtonConfig::backtrack)
        .def_readwrite("armijo", &NewtonConfig::armijo);

    py::class_<SystemModel>(m, "SystemModel")
        .def_property_readonly("name", &SystemModel::name)
        .def_property_readonly("n_q", &SystemModel::n_q)
        .def_property_readonly("m", &SystemModel::m)
        .def("f", &SystemModel::f, py::arg("v"), py::arg("u"))
        .def("df_dv", &SystemModel::df_dv, py::arg("v"), py::arg("u"))
        .def("df_du", &SystemModel::df_du, py::arg("v"), py::arg("u"))
        .def("__repr__", [](const SystemModel& s) { return "<SystemModel " + s.name() + ">"; });

    py::class_<StageCost>(m, "StageCost")
        .def_property_readonly("description", &StageCost::description)
        .def_property_readonly("n_q", &StageCost::n_q)
        .def_property_readonly("m", &StageCost::m)
        .def("value", &StageCost::value, py::arg("v"), py::arg("u"))
        .def("grad_v", &StageCost::grad_v, py::arg("v"), py::arg("u"))
        .def("grad_u", &StageCost::grad_u, py::arg("v"), py::arg("u"));

    m.def(
        "builtin_system",
        [](const std::string& name, int dim, double damping) { return builtin_system(name, {dim, damping}); },
        py::arg("name"), py::arg("dim") = 1, py::arg("damping") = 0.5);
    m.def("builtin_system_names", &builtin_system_names);
    m.def("quadratic_cost", &quadratic_cost, py::arg("Qv"), py::arg("Ru"), py::arg("v_ref") = Vec(),
          py::arg("u_ref") = Vec());
    m.def("system_from_expressions", &expr::system_from_expressions, py::arg("name"), py::arg("sources"),
          py::arg("n_q"), py::arg("m"));
    m.def("cost_from_expression", &expr::cost_from_expression, py::arg("source"), py::arg("n_q"), py::arg("m"));
    m.def(
        "evaluate_expression",
        [](const std::string& src, const Vec& v, const Vec& u) {
            const expr::Expr e = expr::parse(src);
            expr::check_dimensions(e, static_cast<int>(v.size()), static_cast<int>(u.size()));
            const expr::Gradient g = expr::eval_with_gradient(e, v, u);
            return py::make_tuple(g.value, g.dv, g.du);
        },
        py::arg("source"), py::arg("v"), py::arg("u"), "Returns (value, d/dv, d/du).");

    py::class_<Box>(m, "Box")
        .def(py::init<>())
        .def_readwrite("v_lo", &Box::v_lo)
        .def_readwrite("v_hi", &Box::v_hi)
        .def_readwrite("u_lo", &Box::u_lo)
        .def_readwrite("u_hi", &Box::u_hi);

    py::class_<OcpSpec>(m, "OcpSpec")
        .def(py::init([](SystemModel system, StageCost cost, double T, Vec q0, Vec v0, Vec qT, Vec vT, int N,
                         std::optional<Box> bounds) {
                 OcpSpec s{std::move(system), std::move(cost), T, q0, v0, qT, vT, N, bounds};
                 s.validate();
                 return s;
             }),
             py::arg("system"), py::arg("cost"), py::arg("T"), py::arg("q0"), py::arg("v0"), py::arg("qT"),
             py::arg("vT"), py::arg("N") = 100, py::arg("bounds") = std::nullopt)
        .def_readonly("system", &OcpSpec::system)
        .def_readonly("cost", &OcpSpec::cost)
        .def_readwrite("T", &OcpSpec::T)
        .def_readwrite("q0", &OcpSpec::q0)
        .def_readwrite("v0", &OcpSpec::v0)
        .def_readwrite("qT", &OcpSpec::qT)
        .def_readwrite("vT", &OcpSpec::vT)
        .def_readwrite("N", &OcpSpec::N);

    py::class_<Trajectory>(m, "Trajectory")
        .def(py::init<>())
        .def_readwrite("t", &Trajectory::t)
        .def_readwrite("q", &Trajectory::q)
        .def_readwrite("v", &Trajectory::v)
        .def_readwrite("u", &Trajectory::u)
        .def_readwrite("lambda_q", &Trajectory::lambda_q)
        .def_readwrite("lambda_v", &Trajectory::lambda_v)
        .def_readwrite("objective", &Trajectory::objective)
        .def_property_readonly("horizon", &Trajectory::horizon)
        .def("has_adjoints", &Trajectory::has_adjoints)
        .def("validate", &Trajectory::validate);

    py::class_<Trim>(m, "Trim")
        .def(py::init([](Vec v_bar, Vec u_bar, std::optional<Vec> lambda_bar) {
                 return Trim{std::move(v_bar), std::move(u_bar), std::move(lambda_bar), 0.0};
             }),
             py::arg("v_bar"), py::arg("u_bar"), py::arg("lambda_bar") = std::nullopt)
        .def_readwrite("v_bar", &Trim::v_bar)
        .def_readwrite("u_bar", &Trim::u_bar)
        .def_readwrite("lambda_bar", &Trim::lambda_bar)
        .def_readwrite("cost_value", &Trim::cost_value);

    py::class_<SolveDiagnostics>(m, "SolveDiagnostics")
        .def_readonly("converged", &SolveDiagnostics::converged)
        .def_readonly("iterations", &SolveDiagnostics::iterations)
        .def_readonly("residual", &SolveDiagnostics::residual)
        .def_readonly("residual_history", &SolveDiagnostics::residual_history)
        .def_readonly("message", &SolveDiagnostics::message);

    py::class_<DirectSolution>(m, "DirectSolution")
        .def_readonly("trajectory", &DirectSolution::trajectory)
        .def_readonly("diagnostics", &DirectSolution::diagnostics)
        .def_readonly("max_defect", &DirectSolution::max_defect)
        .def_readonly("boundary_error", &DirectSolution::boundary_error);

    py::class_<IndirectOptions>(m, "IndirectOptions")
        .def(py::init<>())
        .def_readwrite("segment_length", &IndirectOptions::segment_length)
        .def_readwrite("warm_start_fallback", &IndirectOptions::warm_start_fallback);

    py::class_<IndirectSolution>(m, "IndirectSolution")
        .def_readonly("trajectory", &IndirectSolution::trajectory)
        .def_readonly("diagnostics", &IndirectSolution::diagnostics)
        .def_property_readonly("lambda_q0", [](const IndirectSolution& s) { return s.initial_adjoint.lambda_q0; })
        .def_property_readonly("lambda_v0", [](const IndirectSolution& s) { return s.initial_adjoint.lambda_v0; })
        .def_readonly("segments", &IndirectSolution::segments)
        .def_readonly("warm_started", &IndirectSolution::warm_started)
        .def_readonly("terminal_error", &IndirectSolution::terminal_error);

    m.def("solve_direct", &solve_direct, py::arg("spec"), py::arg("config") = NewtonConfig{},
          py::call_guard<py::gil_scoped_release>());
    m.def(
        "solve_indirect",
        [](const OcpSpec& spec, const NewtonConfig& cfg, const IndirectOptions& opt) {
            return solve_indirect(spec, cfg, std::nullopt, opt);
        },
        py::arg("spec"), py::arg("config") = NewtonConfig{}, py::arg("options") = IndirectOptions{},
        py::call_guard<py::gil_scoped_release>());

    py::class_<PmpResiduals>(m, "PmpResiduals")
        .def_readonly("lambda_q_rate", &PmpResiduals::lambda_q_rate)
        .def_readonly("costate", &PmpResiduals::costate)
        .def_readonly("stationarity", &PmpResiduals::stationarity)
        .def_readonly("max_lambda_q_rate", &PmpResiduals::max_lambda_q_rate)
        .def_readonly("max_costate", &PmpResiduals::max_costate)
        .def_readonly("max_stationarity", &PmpResiduals::max_stationarity)
        .def("max_all", &PmpResiduals::max_all);
    m.def("pmp_residuals", &pmp_residuals, py::arg("trajectory"), py::arg("spec"));

    // closed form for the double integrator with l = 1/2 (v^2 + u^2)
    py::module_ an = m.def_submodule("analytic", "Closed-form double integrator solution");
    py::class_<analytic::Scenario>(an, "Scenario")
        .def(py::init([](double q0, double v0, double qT, double vT, double T) {
                 return analytic::Scenario{q0, v0, qT, vT, T};
             }),
             py::arg("q0"), py::arg("v0"), py::arg("qT"), py::arg("vT"), py::arg("T"))
        .def_readwrite("q0", &analytic::Scenario::q0)
        .def_readwrite("v0", &analytic::Scenario::v0)
        .def_readwrite("qT", &analytic::Scenario::qT)
        .def_readwrite("vT", &analytic::Scenario::vT)
        .def_readwrite("T", &analytic::Scenario::T);
    py::class_<analytic::VelocityDecomposition>(an, "VelocityDecomposition")
        .def_readonly("zero_velocity", &analytic::VelocityDecomposition::zero_velocity)
        .def_readonly("arc", &analytic::VelocityDecomposition::arc)
        .def_readonly("coupling", &analytic::VelocityDecomposition::coupling)
        .def_readonly("factor_product", &analytic::VelocityDecomposition::factor_product)
        .def_readonly("shape_factor", &analytic::VelocityDecomposition::shape_factor);
    py::class_<analytic::Solution>(an, "Solution")
        .def_readonly("trajectory", &analytic::Solution::trajectory)
        .def_readonly("decomposition", &analytic::Solution::decomposition)
        .def_property_readonly("lambda_q0", [](const analytic::Solution& s) { return s.adjoint_init.lambda_q0; })
        .def_property_readonly("lambda_v0", [](const analytic::Solution& s) { return s.adjoint_init.lambda_v0; })
        .def_readonly("exact_objective", &analytic::Solution::exact_objective);
    an.def("exp_At", &analytic::exp_At, py::arg("t"));
    an.def("state_adjoint_matrix", &analytic::state_adjoint_matrix);
    an.def(
        "adjoint_initial_values",
        [](const analytic::Scenario& s) {
            const auto a = analytic::adjoint_initial_values(s);
            return py::make_tuple(a.lambda_q0, a.lambda_v0);
        },
        py::arg("scenario"));
    an.def("solve", py::overload_cast<const analytic::Scenario&, int>(&analytic::analytic_trajectory),
           py::arg("scenario"), py::arg("N"));
    an.def("solve_on_grid", py::overload_cast<const analytic::Scenario&, const Vec&>(&analytic::analytic_trajectory),
           py::arg("scenario"), py::arg("grid"));

    py::class_<SteadyStateResult>(m, "SteadyStateResult")
        .def_readonly("trim", &SteadyStateResult::trim)
        .def_readonly("kkt_residual", &SteadyStateResult::kkt_residual)
        .def_readonly("iterations", &SteadyStateResult::iterations)
        .def_readonly("is_minimizer", &SteadyStateResult::is_minimizer)
        .def_readonly("min_reduced_eigenvalue", &SteadyStateResult::min_reduced_eigenvalue)
        .def_readonly("within_bounds", &SteadyStateResult::within_bounds);
    m.def(
        "steady_state",
        [](const SystemModel& system, const StageCost& cost, Vec v_guess, Vec u_guess, Vec lambda_guess,
           std::optional<Box> bounds, const NewtonConfig& cfg) {
            return solve_velocity_steady_state({system, cost, v_guess, u_guess, lambda_guess, bounds}, cfg);
        },
        py::arg("system"), py::arg("cost"), py::arg("v_guess") = Vec(), py::arg("u_guess") = Vec(),
        py::arg("lambda_guess") = Vec(), py::arg("bounds") = std::nullopt, py::arg("config") = NewtonConfig{});
    m.def(
        "multistart_steady_state",
        [](const SystemModel& system, const StageCost& cost, std::vector<Vec> guesses, const NewtonConfig& cfg) {
            if (guesses.empty()) guesses = default_velocity_guesses(system.n_q());
            return multistart_steady_state({system, cost, {}, {}, {}, std::nullopt}, guesses, cfg);
        },
        py::arg("system"), py::arg("cost"), py::arg("v_guesses") = std::vector<Vec>{},
        py::arg("config") = NewtonConfig{});
    m.def("find_trim", &find_trim, py::arg("system"), py::arg("v_fixed"), py::arg("cost") = nullptr,
          py::arg("u_guess") = std::nullopt, py::arg("config") = NewtonConfig{});

    m.def("trim_deviation", &trim_deviation, py::arg("trajectory"), py::arg("trim"));
    m.def("theta_measure", &theta_measure, py::arg("trajectory"), py::arg("trim"), py::arg("eps"));

    py::class_<TurnpikeOptions>(m, "TurnpikeOptions")
        .def(py::init<>())
        .def_readwrite("nu_bar", &TurnpikeOptions::nu_bar)
        .def_readwrite("eps_grid", &TurnpikeOptions::eps_grid)
        .def_readwrite("delta_exact", &TurnpikeOptions::delta_exact)
        .def_readwrite("growth_rate", &TurnpikeOptions::growth_rate);
    py::class_<TurnpikeEntry>(m, "TurnpikeEntry")
        .def_readonly("T", &TurnpikeEntry::T)
        .def_readonly("measures", &TurnpikeEntry::measures)
        .def_readonly("exact_measure", &TurnpikeEntry::exact_measure)
        .def_readonly("interior_empty", &TurnpikeEntry::interior_empty)
        .def_readonly("max_interior_deviation", &TurnpikeEntry::max_interior_deviation)
        .def_readonly("T_times_max_deviation", &TurnpikeEntry::T_times_max_deviation)
        .def_readonly("max_interior_adjoint", &TurnpikeEntry::max_interior_adjoint)
        .def_readonly("T_times_max_adjoint", &TurnpikeEntry::T_times_max_adjoint);
    py::class_<TurnpikeReport>(m, "TurnpikeReport")
        .def_readonly("trim", &TurnpikeReport::trim)
        .def_readonly("nu_bar", &TurnpikeReport::nu_bar)
        .def_readonly("epsilons", &TurnpikeReport::epsilons)
        .def_readonly("entries", &TurnpikeReport::entries)
        .def_readonly("nu_of_eps", &TurnpikeReport::nu_of_eps)
        .def_readonly("bounded", &TurnpikeReport::bounded)
        .def_readonly("verdict", &TurnpikeReport::verdict);
    m.def("turnpike_report", &turnpike_report, py::arg("sweep"), py::arg("trim"),
          py::arg("options") = TurnpikeOptions{});

    py::class_<StorageSpec>(m, "StorageSpec")
        .def_static("zero", &StorageSpec::zero)
        .def_static("quadratic", &StorageSpec::quadratic, py::arg("P"), py::arg("center"))
        .def("evaluate", &StorageSpec::evaluate, py::arg("q"), py::arg("v"))
        .def("describe", &StorageSpec::describe);
    py::class_<DissipativityOptions>(m, "DissipativityOptions")
        .def(py::init<>())
        .def_readwrite("alpha_a", &DissipativityOptions::alpha_a)
        .def_readwrite("tolerance", &DissipativityOptions::tolerance)
        .def_readwrite("max_listed", &DissipativityOptions::max_listed);
    py::class_<DissipativityViolation>(m, "DissipativityViolation")
        .def_readonly("trajectory", &DissipativityViolation::trajectory)
        .def_readonly("t_start", &DissipativityViolation::t_start)
        .def_readonly("t_end", &DissipativityViolation::t_end)
        .def_readonly("margin", &DissipativityViolation::margin)
        .def_readonly("strict", &DissipativityViolation::strict);
    py::class_<DissipativityReport>(m, "DissipativityReport")
        .def_readonly("storage", &DissipativityReport::storage)
        .def_readonly("s_hat", &DissipativityReport::s_hat)
        .def_readonly("cost_bound", &DissipativityReport::cost_bound)
        .def_readonly("alpha_a", &DissipativityReport::alpha_a)
        .def_readonly("alpha_fitted", &DissipativityReport::alpha_fitted)
        .def_readonly("dissipative", &DissipativityReport::dissipative)
        .def_readonly("strict", &DissipativityReport::strict)
        .def_readonly("violation_count", &DissipativityReport::violation_count)
        .def_readonly("strict_violation_count", &DissipativityReport::strict_violation_count)
        .def_readonly("worst_margin", &DissipativityReport::worst_margin)
        .def_readonly("worst_strict_margin", &DissipativityReport::worst_strict_margin)
        .def_readonly("violations", &DissipativityReport::violations)
        .def_readonly("scope", &DissipativityReport::scope);
    m.def("check_dissipativity", &check_dissipativity, py::arg("trajectories"), py::arg("trim"), py::arg("cost"),
          py::arg("storage") = StorageSpec::zero(), py::arg("options") = DissipativityOptions{});

    py::class_<OccupationBoundRow>(m, "OccupationBoundRow")
        .def_readonly("eps", &OccupationBoundRow::eps)
        .def_readonly("bound", &OccupationBoundRow::bound)
        .def_readonly("max_measure", &OccupationBoundRow::max_measure)
        .def_readonly("holds", &OccupationBoundRow::holds);
    m.def(
        "occupation_bound",
        [](const DissipativityReport& r, const std::vector<double>& eps, const std::vector<Trajectory>& sweep,
           std::optional<Trim> trim) { return occupation_bound(r, eps, sweep, trim ? &*trim : nullptr); },
        py::arg("report"), py::arg("eps_grid"), py::arg("sweep") = std::vector<Trajectory>{},
        py::arg("trim") = std::nullopt);

    py::class_<AdjointInterval>(m, "AdjointInterval")
        .def_readonly("t1", &AdjointInterval::t1)
        .def_readonly("t2", &AdjointInterval::t2)
        .def_readonly("max_kkt_residual", &AdjointInterval::max_kkt_residual)
        .def_readonly("kkt_verified", &AdjointInterval::kkt_verified);
    py::class_<AdjointIntervalReport>(m, "AdjointIntervalReport")
        .def_readonly("intervals", &AdjointIntervalReport::intervals)
        .def_readonly("max_abs_lambda_q", &AdjointIntervalReport::max_abs_lambda_q);
    m.def("adjoint_intervals", &adjoint_intervals, py::arg("trajectory"), py::arg("system"), py::arg("cost"),
          py::arg("tol_const"), py::arg("tol_zero"));

    m.def("write_trajectory_csv", py::overload_cast<const std::string&, const Trajectory&>(&write_trajectory_csv),
          py::arg("path"), py::arg("trajectory"));
    m.def("read_trajectory_csv", py::overload_cast<const std::string&>(&read_trajectory_csv), py::arg("path"));

    // command-line entry points; each returns (exit_code, stdout, stderr)
    m.def(
        "cli_solve",
        [](const std::string& scenario, const std::string& method, const std::string& out, bool quiet) {
            const cli::Method mm = cli::parse_method(method);
            return run_command([&](std::ostream& o, std::ostream& e) {
                return cli::cmd_solve(scenario, mm, out, {quiet}, o, e);
            });
        },
        py::arg("scenario"), py::arg("method") = "direct", py::arg("out") = "trajectory.csv",
        py::arg("quiet") = false);
    m.def(
        "cli_sweep",
        [](const std::string& scenario, const std::string& method, const std::string& out, bool quiet) {
            const cli::Method mm = cli::parse_method(method);
            return run_command([&](std::ostream& o, std::ostream& e) {
                return cli::cmd_sweep(scenario, mm, out, {quiet}, o, e);
            });
        },
        py::arg("scenario"), py::arg("method") = "direct", py::arg("out") = ".", py::arg("quiet") = false);
    m.def(
        "cli_steady",
        [](const std::string& scenario, bool quiet) {
            return run_command([&](std::ostream& o, std::ostream& e) { return cli::cmd_steady(scenario, {quiet}, o, e); });
        },
        py::arg("scenario"), py::arg("quiet") = false);
    m.def(
        "cli_turnpike",
        [](const std::string& scenario, const std::string& method, const std::string& out, bool quiet) {
            const cli::Method mm = cli::parse_method(method);
            return run_command([&](std::ostream& o, std::ostream& e) {
                return cli::cmd_turnpike(scenario, mm, out, {quiet}, o, e);
            });
        },
        py::arg("scenario"), py::arg("method") = "direct", py::arg("out") = ".", py::arg("quiet") = false);
}
