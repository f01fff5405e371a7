#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vturnpike/numerics.hpp"

namespace vturnpike {

/// Velocity dynamics v' = f(v, u) of a translation-symmetric mechanical
/// system with configuration q in R^{n_q} and q' = v.
///
/// The configuration never enters f, so shifting q by a constant maps
/// solutions onto solutions.
class SystemModel {
public:
    using Map = std::function<Vec(const Vec& v, const Vec& u)>;
    using JacobianMap = std::function<Mat(const Vec& v, const Vec& u)>;
    /// Hessian of w^T f(v, u) with respect to (v, u), (n_q+m) x (n_q+m).
    using WeightedHessianMap = std::function<Mat(const Vec& v, const Vec& u, const Vec& w)>;

    SystemModel(std::string name, int n_q, int m, Map f, JacobianMap df_dv, JacobianMap df_du,
                WeightedHessianMap weighted_hessian = {});

    const std::string& name() const { return name_; }
    int n_q() const { return n_q_; }
    int m() const { return m_; }

    Vec f(const Vec& v, const Vec& u) const;
    Mat df_dv(const Vec& v, const Vec& u) const;
    Mat df_du(const Vec& v, const Vec& u) const;

    /// Falls back to central differences of the Jacobians when no analytic
    /// second derivative was supplied.
    Mat weighted_hessian(const Vec& v, const Vec& u, const Vec& w) const;

private:
    void check_args(const Vec& v, const Vec& u) const;

    std::string name_;
    int n_q_;
    int m_;
    Map f_;
    JacobianMap df_dv_;
    JacobianMap df_du_;
    WeightedHessianMap weighted_hessian_;
};

/// Running cost l(v, u). It has no configuration argument.
class StageCost {
public:
    struct Callbacks {
        std::function<double(const Vec&, const Vec&)> value;
        std::function<Vec(const Vec&, const Vec&)> grad_v;
        std::function<Vec(const Vec&, const Vec&)> grad_u;
        std::function<Mat(const Vec&, const Vec&)> hess_vv;
        std::function<Mat(const Vec&, const Vec&)> hess_uu;
        std::function<Mat(const Vec&, const Vec&)> hess_vu;  // n_q x m
    };

    StageCost(std::string description, int n_q, int m, Callbacks callbacks);

    const std::string& description() const { return description_; }
    int n_q() const { return n_q_; }
    int m() const { return m_; }

    double value(const Vec& v, const Vec& u) const { return cb_.value(v, u); }
    Vec grad_v(const Vec& v, const Vec& u) const { return cb_.grad_v(v, u); }
    Vec grad_u(const Vec& v, const Vec& u) const { return cb_.grad_u(v, u); }
    Mat hess_vv(const Vec& v, const Vec& u) const { return cb_.hess_vv(v, u); }
    Mat hess_uu(const Vec& v, const Vec& u) const { return cb_.hess_uu(v, u); }
    Mat hess_vu(const Vec& v, const Vec& u) const { return cb_.hess_vu(v, u); }

    /// Returns a copy whose value and derivatives are multiplied by `factor`.
    StageCost scaled(double factor) const;

private:
    std::string description_;
    int n_q_;
    int m_;
    Callbacks cb_;
};

/// Box bounds on velocity and input. Only used for post-hoc admissibility
/// reports; solvers assume interior solutions.
struct Box {
    Vec v_lo, v_hi, u_lo, u_hi;

    bool contains(const Vec& v, const Vec& u) const;
};

struct OcpSpec {
    SystemModel system;
    StageCost cost;
    double T = 1.0;
    Vec q0, v0, qT, vT;
    int N = 100;
    std::optional<Box> bounds;

    void validate() const;
};

/// Primal-dual samples on a time grid, one row per node.
struct Trajectory {
    Vec t;
    Mat q, v, u;
    std::optional<Mat> lambda_q, lambda_v;
    double objective = 0.0;

    Eigen::Index nodes() const { return t.size(); }
    double horizon() const { return t.size() ? t(t.size() - 1) - t(0) : 0.0; }
    bool has_adjoints() const { return lambda_q.has_value() && lambda_v.has_value(); }
    void validate() const;
};

/// A velocity steady state (v_bar, u_bar) with f(v_bar, u_bar) = 0.
struct Trim {
    Vec v_bar;
    Vec u_bar;
    std::optional<Vec> lambda_bar;
    double cost_value = 0.0;
};

struct BuiltinParams {
    int dim = 1;           // n_q = m
    double damping = 0.5;  // c of the damped integrator
};

/// Registered systems: "double_integrator" (f = u) and
/// "damped_integrator" (f = u - c v). "damped_integrator(c)" sets c inline.
SystemModel builtin_system(std::string_view name, const BuiltinParams& params = {});
std::vector<std::string> builtin_system_names();

/// l(v, u) = 1/2 (v - v_ref)^T Qv (v - v_ref) + 1/2 (u - u_ref)^T Ru (u - u_ref).
StageCost quadratic_cost(const Mat& Qv, const Mat& Ru, const Vec& v_ref = {}, const Vec& u_ref = {});

/// Trapezoidal integral of l over the trajectory grid.
double trapezoid_objective(const Vec& t, const Mat& v, const Mat& u, const StageCost& cost);

/// Integrates q' = v, v' = f(v, u(t)) from (q0, v0) with RK4.
Trajectory simulate(const SystemModel& system, const std::function<Vec(double)>& control, const Vec& q0,
                    const Vec& v0, double T, int steps);

struct AdmissibilityReport {
    bool admissible = true;
    std::vector<Eigen::Index> violating_nodes;
};

AdmissibilityReport check_admissibility(const Trajectory& traj, const Box& box);

}  // namespace vturnpike
