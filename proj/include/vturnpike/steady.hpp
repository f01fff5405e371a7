#pragma once

#include <optional>
#include <vector>

#include "vturnpike/model.hpp"
#include "vturnpike/numerics.hpp"

namespace vturnpike {

/// Trim with velocity fixed to `v_fixed`: solves f(v_fixed, u) = 0 for u,
/// starting at `u_guess` (zero by default). Over- or underdetermined
/// systems (m != n_q) use Gauss-Newton on the least-squares residual.
Trim find_trim(const SystemModel& system, const Vec& v_fixed, const StageCost* cost = nullptr,
               std::optional<Vec> u_guess = std::nullopt, const NewtonConfig& cfg = {});

struct SteadyStateProblem {
    SystemModel system;
    StageCost cost;
    Vec v_guess, u_guess, lambda_guess;  // empty means zero
    std::optional<Box> bounds;
};

struct SteadyStateResult {
    Trim trim;
    double kkt_residual = 0.0;
    int iterations = 0;
    bool is_minimizer = true;
    double min_reduced_eigenvalue = 0.0;
    bool within_bounds = true;
};

/// Stacked residual of the steady-state optimality system
///   f(v, u) = 0,  dl/dv + (df/dv)^T lambda = 0,  dl/du + (df/du)^T lambda = 0.
Vec steady_kkt_residual(const SystemModel& system, const StageCost& cost, const Vec& v, const Vec& u,
                        const Vec& lambda);

/// Newton on the stationarity system above, followed by a second-order
/// check on the Hessian of the Lagrangian restricted to ker [df/dv df/du].
/// A smallest reduced eigenvalue below -1e-8 clears `is_minimizer`.
SteadyStateResult solve_velocity_steady_state(const SteadyStateProblem& problem, const NewtonConfig& cfg = {});

/// Runs the solver from every guess in `v_guesses` (u, lambda start at
/// zero). Failed starts are skipped; results closer than `dedup_tol` in
/// (v, u) are merged. Sorted by cost value.
std::vector<SteadyStateResult> multistart_steady_state(const SteadyStateProblem& problem,
                                                       const std::vector<Vec>& v_guesses,
                                                       const NewtonConfig& cfg = {}, double dedup_tol = 1e-6);

/// Default multistart grid: v = s * ones for s in {-10, -7.5, ..., 10}.
std::vector<Vec> default_velocity_guesses(int n_q);

}  // namespace vturnpike
