#pragma once

#include <exception>
#include <iosfwd>
#include <string>

#include "vturnpike/model.hpp"
#include "vturnpike/scenario.hpp"
#include "vturnpike/steady.hpp"
#include "vturnpike/turnpike.hpp"

namespace vturnpike::cli {

enum class Method { Direct, Indirect, Analytic };

/// "direct", "indirect" or "analytic"; anything else is a ValidationError.
Method parse_method(const std::string& name);

enum ExitCode : int { kOk = 0, kValidation = 1, kSolver = 2, kIo = 3 };

/// Maps library errors to exit codes: validation, lookup, syntax and domain
/// errors to 1, convergence and singularity errors to 2, I/O errors to 3.
int exit_code_for(const std::exception& e);

struct Options {
    bool quiet = false;
};

/// Solves the scenario at `horizon` with the given method. Direct solves
/// that stop short of the tolerance raise ConvergenceError.
Trajectory solve_scenario(const ScenarioFile& s, double horizon, Method method);

/// Optimal velocity steady state of the scenario; falls back to a
/// multistart search when the configured guess fails. `log` may be null.
SteadyStateResult scenario_trim(const ScenarioFile& s, std::ostream* log);

int cmd_solve(const std::string& scenario, Method method, const std::string& out, const Options& opts,
              std::ostream& out_stream, std::ostream& err_stream);
int cmd_sweep(const std::string& scenario, Method method, const std::string& out_dir, const Options& opts,
              std::ostream& out_stream, std::ostream& err_stream);
int cmd_steady(const std::string& scenario, const Options& opts, std::ostream& out_stream, std::ostream& err_stream);
int cmd_turnpike(const std::string& scenario, Method method, const std::string& out_dir, const Options& opts,
                 std::ostream& out_stream, std::ostream& err_stream);

}  // namespace vturnpike::cli
