#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vturnpike/model.hpp"
#include "vturnpike/numerics.hpp"

namespace vturnpike {

struct SolveDiagnostics {
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;
    std::vector<double> residual_history;
    std::string message;
};

/// Direct transcription: trapezoidal defects
///   q_k - q_{k+1} + h/2 (v_k + v_{k+1}) = 0
///   v_k - v_{k+1} + h/2 (f_k + f_{k+1}) = 0
/// plus hard boundary equalities, solved by Newton on the full KKT system.
/// With this sign convention the defect multiplier of interval k
/// approximates the adjoint at its midpoint.
struct DirectSolution {
    Trajectory trajectory;
    SolveDiagnostics diagnostics;
    double max_defect = 0.0;
    double boundary_error = 0.0;
};

/// Never throws on Newton non-convergence: the last iterate is returned with
/// diagnostics.converged == false. Throws SingularityError (with a hint) if
/// the KKT matrix cannot be factored.
DirectSolution solve_direct(const OcpSpec& spec, const NewtonConfig& cfg = {});

struct ShootingGuess {
    Vec lambda_q0;
    Vec lambda_v0;
};

struct IndirectOptions {
    /// Maximum segment length of the multiple-shooting partition.
    double segment_length = 2.5;
    /// Retry from the direct solver's adjoint estimates when the first
    /// attempt fails.
    bool warm_start_fallback = true;
};

struct IndirectSolution {
    Trajectory trajectory;
    SolveDiagnostics diagnostics;
    ShootingGuess initial_adjoint;
    int segments = 1;
    bool warm_started = false;
    double terminal_error = 0.0;
};

/// Pontryagin shooting on q' = v, v' = f(v, u), lambda_q' = 0,
/// lambda_v' = -dl/dv - lambda_q - (df/dv)^T lambda_v with u eliminated
/// pointwise from dl/du + (df/du)^T lambda_v = 0. Integration is RK4 with N
/// uniform steps; the horizon is split into segments whose initial states
/// are extra Newton unknowns, which keeps the unstable adjoint modes from
/// amplifying rounding over long horizons. Throws ConvergenceError with the
/// residual history when no attempt converges.
IndirectSolution solve_indirect(const OcpSpec& spec, const NewtonConfig& cfg = {},
                                std::optional<ShootingGuess> guess = std::nullopt,
                                const IndirectOptions& options = {});

/// Solves dl/du(v, u) + (df/du)^T lambda_v = 0 for u by Newton from
/// `u_guess`. Throws ConvergenceError when the condition is singular in u.
Vec control_law(const SystemModel& system, const StageCost& cost, const Vec& v, const Vec& lambda_v,
                const Vec& u_guess);

struct PmpResiduals {
    Mat lambda_q_rate;  // d lambda_q / dt
    Mat costate;        // d lambda_v / dt + dl/dv + lambda_q + (df/dv)^T lambda_v
    Mat stationarity;   // dl/du + (df/du)^T lambda_v
    double max_lambda_q_rate = 0.0;
    double max_costate = 0.0;
    double max_stationarity = 0.0;
    double l2_lambda_q_rate = 0.0;
    double l2_costate = 0.0;
    double l2_stationarity = 0.0;

    double max_all() const;
};

/// Time derivatives use five-point finite-difference stencils on the grid
/// (centered in the interior, one-sided at the ends). L2 norms are
/// trapezoidal sqrt(int |r|^2 dt).
PmpResiduals pmp_residuals(const Trajectory& traj, const OcpSpec& spec);

/// d/dt of each column of `x` sampled on `t` from a five-point polynomial
/// stencil (fewer points if the grid is shorter).
Mat grid_derivative(const Vec& t, const Mat& x);

}  // namespace vturnpike
