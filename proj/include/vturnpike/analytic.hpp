#pragma once

#include <Eigen/Dense>

#include "vturnpike/model.hpp"

namespace vturnpike::analytic {

/// Closed-form solution of the scalar double integrator
///   minimize  int_0^T 1/2 (v^2 + u^2) dt,  q' = v, v' = u,
/// with fixed (q0, v0) and (qT, vT).

inline constexpr double kMinHorizon = 1e-3;

struct Scenario {
    double q0 = 0.0;
    double v0 = 0.0;
    double qT = 0.0;
    double vT = 0.0;
    double T = 1.0;

    /// Throws DomainError for T < kMinHorizon: the denominator
    /// 2 (cosh T - 1) - T sinh T ~ -T^4/12 vanishes at the origin.
    void validate() const;
};

/// Generator of the state-adjoint system for (q, v, lambda_q, lambda_v):
/// q' = v, v' = -lambda_v, lambda_q' = 0, lambda_v' = -v - lambda_q.
Eigen::Matrix4d state_adjoint_matrix();

/// exp(A t), entries built from 1, t, cosh t and sinh t.
Eigen::Matrix4d exp_At(double t);

struct AdjointInit {
    double lambda_q0 = 0.0;
    double lambda_v0 = 0.0;
};

/// Initial adjoints
///   lambda_q(0) = [sinh T (qT-q0) + (1-cosh T)(v0+vT)] / [2(cosh T-1) - T sinh T]
///   lambda_v(0) = [cosh T v0 - vT + (cosh T-1) lambda_q(0)] / sinh T
/// evaluated after dividing through by sinh T, so no term overflows.
AdjointInit adjoint_initial_values(const Scenario& s);

/// Pointwise terms of v*(t):
///   zero_velocity: the v0 = vT = 0 solution, proportional to qT - q0;
///   arc:           (sinh(T-t) v0 + sinh(t) vT) / sinh T;
///   coupling:      the (v0 + vT) correction.
/// zero_velocity + arc + coupling = v*. `factor_product` is the bracketed
/// coefficient [(1-cosh T)/sinh T (v0+vT) + (qT-q0)] times the shape
/// factor (sinh(T-t) - sinh T + sinh t) / (2(cosh T-1) - T sinh T); it
/// equals zero_velocity + coupling.
struct VelocityDecomposition {
    Vec zero_velocity;
    Vec arc;
    Vec coupling;
    Vec factor_product;
    Vec shape_factor;
};

struct Solution {
    Trajectory trajectory;  // q, v, u = -lambda_v, lambda_q, lambda_v; objective is the trapezoidal integral
    VelocityDecomposition decomposition;
    AdjointInit adjoint_init;
    double exact_objective = 0.0;  // closed-form integral of 1/2 (v^2 + u^2)
};

/// Samples the optimal solution on `grid` (a subset of [0, T]).
Solution analytic_trajectory(const Scenario& s, const Vec& grid);

/// Uniform grid with N intervals.
Solution analytic_trajectory(const Scenario& s, int N);

/// sinh(a) / sinh(T) for 0 <= a <= T without overflow.
double sinh_ratio(double a, double T);

/// 2 tanh(T/2) - T, i.e. (2(cosh T - 1) - T sinh T) / sinh T, with a series
/// branch for small T.
double scaled_denominator(double T);

}  // namespace vturnpike::analytic
