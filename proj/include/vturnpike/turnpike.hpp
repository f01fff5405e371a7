#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vturnpike/model.hpp"

namespace vturnpike {

/// d(t_k) = ||(v_k, u_k) - (v_bar, u_bar)|| at every node.
Vec trim_deviation(const Trajectory& traj, const Trim& trim);

/// Lebesgue measure of {t : d(t) > eps}, with d linearly interpolated
/// between nodes and crossing times found by inverting each linear piece.
double theta_measure(const Trajectory& traj, const Trim& trim, double eps);

/// Returns the shared trim; throws ValidationError when the entries differ
/// by more than `tol` in (v_bar, u_bar).
Trim common_trim(const std::vector<Trim>& trims, double tol = 1e-9);

struct TurnpikeOptions {
    double nu_bar = 3.0;
    std::vector<double> eps_grid{0.1, 0.25, 0.5, 1.0};
    double delta_exact = 1e-9;
    /// Largest tolerated growth of the measure per unit of horizon between
    /// the first and last unsaturated entries of the sweep.
    double growth_rate = 0.1;
};

struct TurnpikeEntry {
    double T = 0.0;
    std::vector<double> measures;  // one per epsilon (ascending)
    double exact_measure = 0.0;    // measure at delta_exact
    bool interior_empty = false;   // T <= 2 nu_bar
    double max_interior_deviation = 0.0;
    double T_times_max_deviation = 0.0;
    double max_interior_adjoint = 0.0;  // max |lambda_v - lambda_bar| on [nu_bar, T - nu_bar]
    double T_times_max_adjoint = 0.0;
};

struct TurnpikeReport {
    Trim trim;
    double nu_bar = 0.0;
    double delta_exact = 0.0;
    std::vector<double> epsilons;       // ascending
    std::vector<TurnpikeEntry> entries;  // ordered by T
    std::vector<double> nu_of_eps;      // empirical nu(eps) = max measure over the sweep
    std::vector<bool> bounded;          // per epsilon
    bool verdict = false;
};

/// Measures every trajectory of a horizon sweep against `trim`. A measure
/// sequence (ordered by T) counts as bounded when, ignoring saturated
/// entries (measure >= 0.95 T, horizons too short to reach the eps-ball),
/// (mu_last - mu_first) / (T_last - T_first) <= growth_rate. A solution
/// without the turnpike property has mu close to T, i.e. a rate near 1.
TurnpikeReport turnpike_report(const std::vector<Trajectory>& sweep, const Trim& trim,
                               const TurnpikeOptions& options = {});

/// Throws ValidationError if some row of the measure table increases in eps.
void validate_measure_table(const TurnpikeReport& report);

/// Storage function S(q, v) >= 0: either identically zero or
/// 1/2 (x - c)^T P (x - c) with x = (q, v) and P positive semidefinite.
struct StorageSpec {
    enum class Kind { Zero, Quadratic };
    Kind kind = Kind::Zero;
    Mat P;
    Vec center;

    static StorageSpec zero() { return {}; }
    static StorageSpec quadratic(Mat P, Vec center);

    double evaluate(const Vec& q, const Vec& v) const;
    std::string describe() const;
};

struct DissipativityViolation {
    std::size_t trajectory = 0;
    double t_start = 0.0;
    double t_end = 0.0;
    double margin = 0.0;  // amount by which the left side exceeds the right side
    bool strict = false;  // true: strict inequality with alpha, false: plain dissipation
};

struct DissipativityReport {
    std::string storage;
    double s_hat = 0.0;                             // max of S over the sampled states
    double cost_bound = 0.0;                        // max over the sweep of int_0^T w dt
    std::vector<std::vector<double>> supply_integrals;  // per trajectory, per grid interval
    double alpha_a = 0.0;                           // alpha(s) = a s^2
    bool alpha_fitted = false;
    bool dissipative = false;                       // plain inequality on every subinterval
    bool strict = false;                            // strict inequality with alpha_a > 0
    std::size_t violation_count = 0;
    std::size_t strict_violation_count = 0;
    double worst_margin = 0.0;
    double worst_strict_margin = 0.0;
    std::vector<DissipativityViolation> violations;  // first `max_listed` found
    std::optional<double> reach_time_in;             // T_0, recorded as supplied
    std::optional<double> reach_time_out;            // T_T, recorded as supplied
    std::string scope = "certified on sweep";
};

struct DissipativityOptions {
    std::optional<double> alpha_a;  // nullopt: fit by bisection on (0, 10]
    double tolerance = 1e-9;
    std::size_t max_listed = 1000;
    std::optional<double> reach_time_in;
    std::optional<double> reach_time_out;
};

/// Checks S(x_j) - S(x_i) <= int_{t_i}^{t_j} w dt and the strict version
/// with -alpha(d) added to the integrand, for every pair of nodes i < j of
/// every trajectory, with w = l - l(v_bar, u_bar) integrated by the
/// trapezoidal rule.
DissipativityReport check_dissipativity(const std::vector<Trajectory>& trajectories, const Trim& trim,
                                        const StageCost& cost, const StorageSpec& storage,
                                        const DissipativityOptions& options = {});

struct OccupationBoundRow {
    double eps = 0.0;
    double bound = 0.0;          // (2 S_hat + C) / alpha(eps)
    double max_measure = 0.0;    // over the cross-check sweep (0 if none given)
    bool holds = true;
};

/// Bound on the time spent outside the eps-ball. Throws DomainError when the
/// report carries no strict certificate.
std::vector<OccupationBoundRow> occupation_bound(const DissipativityReport& report, const std::vector<double>& eps_grid,
                                  const std::vector<Trajectory>& sweep = {}, const Trim* trim = nullptr);

struct AdjointInterval {
    double t1 = 0.0;
    double t2 = 0.0;
    double max_kkt_residual = 0.0;
    bool kkt_verified = false;  // residual <= 10 tol_const
};

struct AdjointIntervalReport {
    std::vector<AdjointInterval> intervals;
    double tol_const = 0.0;
    double tol_zero = 0.0;
    double max_abs_lambda_q = 0.0;
};

/// Disjoint intervals on which |lambda_q| <= tol_zero and lambda_v varies by
/// at most tol_const; on each, the steady-state optimality residuals are
/// evaluated with lambda = lambda_v(t).
AdjointIntervalReport adjoint_intervals(const Trajectory& traj, const SystemModel& system, const StageCost& cost,
                                        double tol_const, double tol_zero);

}  // namespace vturnpike
