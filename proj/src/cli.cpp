#include "vturnpike/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "vturnpike/analytic.hpp"
#include "vturnpike/csv.hpp"
#include "vturnpike/errors.hpp"
#include "vturnpike/ocp.hpp"

namespace vturnpike::cli {

namespace fs = std::filesystem;

Method parse_method(const std::string& name) {
    if (name == "direct") return Method::Direct;
    if (name == "indirect") return Method::Indirect;
    if (name == "analytic") return Method::Analytic;
    throw ValidationError("unknown method '" + name + "' (expected direct, indirect or analytic)");
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const IoError*>(&e)) return kIo;
    if (dynamic_cast<const ConvergenceError*>(&e) || dynamic_cast<const SingularityError*>(&e)) return kSolver;
    return kValidation;
}

Trajectory solve_scenario(const ScenarioFile& s, double horizon, Method method) {
    const OcpSpec spec = s.ocp(horizon);
    switch (method) {
        case Method::Analytic: {
            if (!s.closed_form) {
                throw ValidationError(
                    "method analytic requires the scalar double_integrator with cost 1/2 (v^2 + u^2)");
            }
            const analytic::Scenario a{s.q0(0), s.v0(0), s.qT(0), s.vT(0), horizon};
            return analytic::analytic_trajectory(a, s.N).trajectory;
        }
        case Method::Direct: {
            DirectSolution sol = solve_direct(spec, s.newton);
            if (!sol.diagnostics.converged) {
                throw ConvergenceError("direct collocation did not converge at T = " + format_number(horizon) +
                                           ": " + sol.diagnostics.message,
                                       sol.diagnostics.residual, sol.diagnostics.residual_history);
            }
            return std::move(sol.trajectory);
        }
        case Method::Indirect:
            return solve_indirect(spec, s.newton, std::nullopt, s.indirect).trajectory;
    }
    throw ValidationError("unknown method");
}

SteadyStateResult scenario_trim(const ScenarioFile& s, std::ostream* log) {
    SteadyStateProblem problem{s.system, s.cost, s.steady.v_guess, s.steady.u_guess, s.steady.lambda_guess, s.bounds};
    const auto acceptable = [](const SteadyStateResult& r) { return r.is_minimizer; };
    try {
        SteadyStateResult r = solve_velocity_steady_state(problem, s.newton);
        if (acceptable(r)) return r;
        if (log) *log << "steady state from the configured guess is not a minimizer; trying multistart\n";
    } catch (const ConvergenceError& e) {
        if (log) *log << "steady state from the configured guess failed (" << e.what() << "); trying multistart\n";
    }
    std::vector<Vec> guesses = default_velocity_guesses(s.system.n_q());
    const auto found = multistart_steady_state(problem, guesses, s.newton);
    if (log) {
        *log << "multistart: " << guesses.size() << " starts, " << found.size() << " distinct steady state"
             << (found.size() == 1 ? "" : "s") << '\n';
    }
    for (const auto& r : found) {
        if (acceptable(r)) return r;
    }
    throw ConvergenceError("no velocity steady state found from the configured guess or the multistart grid",
                           std::numeric_limits<double>::infinity());
}

namespace {

std::string horizon_tag(double T) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", T);
    return buf;
}

void ensure_directory(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir + "'");
}

void report_failure(const std::exception& e, std::ostream& err) {
    err << "error: " << e.what() << '\n';
    if (const auto* ce = dynamic_cast<const ConvergenceError*>(&e)) {
        const auto& h = ce->history();
        if (!h.empty()) {
            err << "residual history:";
            const std::size_t first = h.size() > 12 ? h.size() - 12 : 0;
            if (first > 0) err << " ...";
            for (std::size_t i = first; i < h.size(); ++i) err << ' ' << format_number(h[i]);
            err << '\n';
        }
    }
}

template <class Body>
int guarded(std::ostream& err, Body&& body) {
    try {
        return body();
    } catch (const std::exception& e) {
        report_failure(e, err);
        return exit_code_for(e);
    }
}

double single_horizon(const ScenarioFile& s) {
    if (s.T) return *s.T;
    if (s.T_sweep.size() == 1) return s.T_sweep.front();
    throw ValidationError("ocp.T: solve needs a single horizon; use the sweep command for ocp.T_sweep");
}

struct SweepEntry {
    double T = 0.0;
    std::optional<Trajectory> trajectory;
    std::exception_ptr error;
};

// Solves every horizon concurrently; results keep the sweep order.
std::vector<SweepEntry> solve_sweep(const ScenarioFile& s, Method method) {
    std::vector<std::future<Trajectory>> jobs;
    for (double T : s.horizons()) {
        jobs.push_back(std::async(std::launch::async, [&s, T, method] { return solve_scenario(s, T, method); }));
    }
    std::vector<SweepEntry> out;
    const auto horizons = s.horizons();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        SweepEntry e;
        e.T = horizons[i];
        try {
            e.trajectory = jobs[i].get();
        } catch (...) {
            e.error = std::current_exception();
        }
        out.push_back(std::move(e));
    }
    return out;
}

void add_indexed(std::vector<std::string>& header, const std::string& name, Eigen::Index dim) {
    if (dim == 1) {
        header.push_back(name);
        return;
    }
    for (Eigen::Index i = 0; i < dim; ++i) header.push_back(name + "[" + std::to_string(i) + "]");
}

double ratio_of_tail(const TurnpikeReport& rep, bool adjoint) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& e : rep.entries) {
        if (e.interior_empty) continue;
        const double x = adjoint ? e.T_times_max_adjoint : e.T_times_max_deviation;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    if (!(hi > 0.0)) return 1.0;
    return hi / lo;
}

}  // namespace

int cmd_solve(const std::string& scenario, Method method, const std::string& out, const Options& opts,
              std::ostream& out_stream, std::ostream& err_stream) {
    return guarded(err_stream, [&] {
        const ScenarioFile s = load_scenario(scenario);
        const double T = single_horizon(s);
        const Trajectory traj = solve_scenario(s, T, method);
        write_trajectory_csv(out, traj);
        if (!opts.quiet) {
            out_stream << "solved T = " << format_number(T) << " with " << traj.nodes() << " nodes, objective "
                       << format_number(traj.objective) << "; wrote " << out << '\n';
        }
        return int(kOk);
    });
}

int cmd_sweep(const std::string& scenario, Method method, const std::string& out_dir, const Options& opts,
              std::ostream& out_stream, std::ostream& err_stream) {
    return guarded(err_stream, [&] {
        const ScenarioFile s = load_scenario(scenario);
        if (s.T_sweep.empty()) throw ValidationError("missing required key ocp.T_sweep");
        ensure_directory(out_dir);
        const double nu_bar = s.turnpike ? s.turnpike->nu_bar : TurnpikeOptions{}.nu_bar;
        const SteadyStateResult trim = scenario_trim(s, opts.quiet ? nullptr : &out_stream);

        const auto entries = solve_sweep(s, method);

        CsvTable summary;
        summary.header = {"T", "objective", "max_interior_deviation", "T_times_max_deviation"};
        add_indexed(summary.header, "lambda_q0", s.system.n_q());
        add_indexed(summary.header, "lambda_v0", s.system.n_q());
        const std::string summary_path = (fs::path(out_dir) / "summary.csv").string();

        for (const SweepEntry& e : entries) {
            if (e.error) {
                write_table_csv(summary_path, summary);
                try {
                    std::rethrow_exception(e.error);
                } catch (const Error& err) {
                    err_stream << "sweep entry T = " << format_number(e.T) << " failed\n";
                    throw;
                }
            }
            const Trajectory& traj = *e.trajectory;
            const std::string file = (fs::path(out_dir) / ("trajectory_T" + horizon_tag(e.T) + ".csv")).string();
            write_trajectory_csv(file, traj);

            TurnpikeOptions topt;
            topt.nu_bar = nu_bar;
            topt.eps_grid.clear();
            const TurnpikeReport rep = turnpike_report({traj}, trim.trim, topt);
            const TurnpikeEntry& te = rep.entries.front();
            const double nan = std::numeric_limits<double>::quiet_NaN();
            std::vector<double> row{e.T, traj.objective, te.interior_empty ? nan : te.max_interior_deviation,
                                    te.interior_empty ? nan : te.T_times_max_deviation};
            for (Eigen::Index i = 0; i < s.system.n_q(); ++i) row.push_back(traj.has_adjoints() ? (*traj.lambda_q)(0, i) : nan);
            for (Eigen::Index i = 0; i < s.system.n_q(); ++i) row.push_back(traj.has_adjoints() ? (*traj.lambda_v)(0, i) : nan);
            summary.rows.push_back(std::move(row));
            if (!opts.quiet) out_stream << "T = " << format_number(e.T) << ": wrote " << file << '\n';
        }
        write_table_csv(summary_path, summary);
        if (!opts.quiet) out_stream << "wrote " << summary_path << '\n';
        return int(kOk);
    });
}

int cmd_steady(const std::string& scenario, const Options& opts, std::ostream& out_stream, std::ostream& err_stream) {
    return guarded(err_stream, [&] {
        const ScenarioFile s = load_scenario(scenario);
        std::ostringstream log;
        const SteadyStateResult r = scenario_trim(s, &log);
        const auto vec = [](const Vec& x) {
            std::string out = "[";
            for (Eigen::Index i = 0; i < x.size(); ++i) out += (i ? ", " : "") + format_number(x(i));
            return out + "]";
        };
        if (!opts.quiet) out_stream << log.str();
        out_stream << "v_bar = " << vec(r.trim.v_bar) << '\n';
        out_stream << "u_bar = " << vec(r.trim.u_bar) << '\n';
        out_stream << "lambda_bar = " << vec(r.trim.lambda_bar.value_or(Vec())) << '\n';
        out_stream << "cost = " << format_number(r.trim.cost_value) << '\n';
        out_stream << "kkt_residual = " << format_number(r.kkt_residual) << '\n';
        out_stream << "reduced_hessian_min_eigenvalue = " << format_number(r.min_reduced_eigenvalue) << '\n';
        out_stream << "minimizer = " << (r.is_minimizer ? "yes" : "no") << '\n';
        if (s.bounds) out_stream << "within_bounds = " << (r.within_bounds ? "yes" : "no") << '\n';
        return int(kOk);
    });
}

int cmd_turnpike(const std::string& scenario, Method method, const std::string& out_dir, const Options& opts,
                 std::ostream& out_stream, std::ostream& err_stream) {
    return guarded(err_stream, [&] {
        const ScenarioFile s = load_scenario(scenario);
        if (!s.turnpike) throw ValidationError("missing required section turnpike");
        ensure_directory(out_dir);
        const SteadyStateResult trim = scenario_trim(s, opts.quiet ? nullptr : &out_stream);

        std::vector<Trajectory> sweep;
        for (auto& e : solve_sweep(s, method)) {
            if (e.error) std::rethrow_exception(e.error);
            sweep.push_back(std::move(*e.trajectory));
        }

        TurnpikeOptions topt;
        topt.nu_bar = s.turnpike->nu_bar;
        topt.eps_grid = s.turnpike->eps_grid;
        topt.delta_exact = s.turnpike->delta_exact;
        const TurnpikeReport rep = turnpike_report(sweep, trim.trim, topt);

        CsvTable theta;
        theta.header = {"eps"};
        for (const auto& e : rep.entries) theta.header.push_back("mu_T" + horizon_tag(e.T));
        for (std::size_t i = 0; i < rep.epsilons.size(); ++i) {
            std::vector<double> row{rep.epsilons[i]};
            for (const auto& e : rep.entries) row.push_back(e.measures[i]);
            theta.rows.push_back(std::move(row));
        }
        write_table_csv((fs::path(out_dir) / "theta.csv").string(), theta);

        CsvTable hyper;
        hyper.header = {"T",
                        "max_interior_deviation",
                        "T_times_max_deviation",
                        "max_interior_adjoint",
                        "T_times_max_adjoint",
                        "exact_measure"};
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (const auto& e : rep.entries) {
            hyper.rows.push_back({e.T, e.interior_empty ? nan : e.max_interior_deviation,
                                  e.interior_empty ? nan : e.T_times_max_deviation,
                                  e.interior_empty ? nan : e.max_interior_adjoint,
                                  e.interior_empty ? nan : e.T_times_max_adjoint, e.exact_measure});
        }
        write_table_csv((fs::path(out_dir) / "hyperbolic.csv").string(), hyper);

        const double ratio = ratio_of_tail(rep, false);
        const double ratio_adj = ratio_of_tail(rep, true);
        std::ostringstream verdict;
        verdict << "verdict: measures " << (rep.verdict ? "bounded" : "growing") << " across the sweep"
                << "; T*max deviation ratio " << format_number(ratio) << ", T*max adjoint ratio "
                << format_number(ratio_adj);

        if (s.dissipativity) {
            DissipativityOptions dopt;
            dopt.alpha_a = s.dissipativity->alpha_a;
            dopt.reach_time_in = s.dissipativity->reach_time_in;
            dopt.reach_time_out = s.dissipativity->reach_time_out;
            const DissipativityReport d = check_dissipativity(sweep, trim.trim, s.cost, s.dissipativity->storage, dopt);

            nlohmann::ordered_json j;
            j["scope"] = d.scope;
            j["storage"] = d.storage;
            j["alpha_a"] = d.alpha_a;
            j["alpha_fitted"] = d.alpha_fitted;
            j["dissipative"] = d.dissipative;
            j["strict"] = d.strict;
            j["s_hat"] = d.s_hat;
            j["cost_bound"] = d.cost_bound;
            j["violation_count"] = d.violation_count;
            j["strict_violation_count"] = d.strict_violation_count;
            j["worst_margin"] = d.worst_margin;
            j["worst_strict_margin"] = d.worst_strict_margin;
            j["T0"] = d.reach_time_in ? nlohmann::ordered_json(*d.reach_time_in) : nlohmann::ordered_json();
            j["TT"] = d.reach_time_out ? nlohmann::ordered_json(*d.reach_time_out) : nlohmann::ordered_json();
            auto totals = nlohmann::ordered_json::array();
            for (std::size_t r = 0; r < sweep.size(); ++r) {
                double total = 0.0;
                for (double x : d.supply_integrals[r]) total += x;
                totals.push_back({{"T", sweep[r].horizon()}, {"supply_integral", total}});
            }
            j["trajectories"] = totals;
            auto viol = nlohmann::ordered_json::array();
            for (const auto& v : d.violations) {
                viol.push_back({{"trajectory", v.trajectory},
                                {"t_start", v.t_start},
                                {"t_end", v.t_end},
                                {"margin", v.margin},
                                {"strict", v.strict}});
            }
            j["violations"] = viol;
            const std::string dpath = (fs::path(out_dir) / "dissipativity.json").string();
            std::ofstream os(dpath, std::ios::binary);
            if (!os) throw IoError("cannot open '" + dpath + "' for writing");
            os << j.dump(2) << '\n';
            if (!os) throw IoError("write to '" + dpath + "' failed");

            verdict << "; dissipativity " << (d.strict ? "strict" : d.dissipative ? "plain only" : "violated")
                    << " with a = " << format_number(d.alpha_a);
            if (d.strict) {
                const auto rows = occupation_bound(d, rep.epsilons, sweep, &trim.trim);
                CsvTable bound;
                bound.header = {"eps", "bound", "max_measure", "holds"};
                bool all = true;
                for (const auto& r : rows) {
                    bound.rows.push_back({r.eps, r.bound, r.max_measure, r.holds ? 1.0 : 0.0});
                    all = all && r.holds;
                }
                write_table_csv((fs::path(out_dir) / "occupation_bound.csv").string(), bound);
                verdict << "; occupation bound " << (all ? "holds" : "violated");
            } else {
                verdict << "; occupation bound unavailable";
            }
        } else if (!opts.quiet) {
            out_stream << "notice: no dissipativity section; dissipativity check skipped\n";
        }

        const std::string line = verdict.str();
        std::ofstream vs((fs::path(out_dir) / "verdict.txt").string(), std::ios::binary);
        if (!vs) throw IoError("cannot write verdict.txt in '" + out_dir + "'");
        vs << line << '\n';
        out_stream << line << '\n';
        return int(kOk);
    });
}

}  // namespace vturnpike::cli
