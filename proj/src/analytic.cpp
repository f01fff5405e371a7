#include "vturnpike/analytic.hpp"

#include <cmath>
#include <sstream>

#include "vturnpike/errors.hpp"

namespace vturnpike::analytic {

void Scenario::validate() const {
    if (!std::isfinite(q0) || !std::isfinite(v0) || !std::isfinite(qT) || !std::isfinite(vT)) {
        throw ValidationError("analytic: boundary data must be finite");
    }
    if (!(T >= kMinHorizon) || !std::isfinite(T)) {
        std::ostringstream msg;
        msg << "analytic: horizon T = " << T << " is below T_min = " << kMinHorizon
            << " where the denominator 2(cosh T - 1) - T sinh T vanishes";
        throw DomainError(msg.str());
    }
}

Eigen::Matrix4d state_adjoint_matrix() {
    Eigen::Matrix4d a;
    // clang-format off
    a << 0,  1,  0,  0,
         0,  0,  0, -1,
         0,  0,  0,  0,
         0, -1, -1,  0;
    // clang-format on
    return a;
}

Eigen::Matrix4d exp_At(double t) {
    const double c = std::cosh(t);
    const double s = std::sinh(t);
    Eigen::Matrix4d e;
    // clang-format off
    e << 1,  s,  s - t, 1 - c,
         0,  c,  c - 1, -s,
         0,  0,  1,      0,
         0, -s, -s,      c;
    // clang-format on
    return e;
}

double sinh_ratio(double a, double T) {
    if (a == 0.0) return 0.0;
    return std::exp(a - T) * (std::expm1(-2.0 * a) / std::expm1(-2.0 * T));
}

double scaled_denominator(double T) {
    if (T < 0.05) {
        const double t2 = T * T;
        const double t3 = t2 * T;
        return t3 * (-1.0 / 12.0 + t2 * (1.0 / 120.0 + t2 * (-17.0 / 20160.0 + t2 * (31.0 / 362880.0))));
    }
    return 2.0 * std::tanh(0.5 * T) - T;
}

AdjointInit adjoint_initial_values(const Scenario& s) {
    s.validate();
    const double th = std::tanh(0.5 * s.T);  // (cosh T - 1) / sinh T
    AdjointInit out;
    out.lambda_q0 = ((s.qT - s.q0) - th * (s.v0 + s.vT)) / scaled_denominator(s.T);
    out.lambda_v0 = s.v0 / std::tanh(s.T) - s.vT / std::sinh(s.T) + th * out.lambda_q0;
    return out;
}

namespace {

// v(t) = -lambda_q + alpha e^{-t} + beta e^{-(T-t)} solves v'' = v + lambda_q
// with the boundary velocities; both exponentials stay bounded on [0, T].
struct ExponentialForm {
    double lambda_q;
    double alpha;
    double beta;
};

ExponentialForm exponential_form(const Scenario& s, double lambda_q) {
    const double eT = std::exp(-s.T);
    const double det = -std::expm1(-2.0 * s.T);
    const double a = s.v0 + lambda_q;
    const double b = s.vT + lambda_q;
    return {lambda_q, (a - eT * b) / det, (b - eT * a) / det};
}

}  // namespace

Solution analytic_trajectory(const Scenario& s, const Vec& grid) {
    s.validate();
    for (Eigen::Index k = 0; k < grid.size(); ++k) {
        if (!(grid(k) >= 0.0 && grid(k) <= s.T)) throw ValidationError("analytic: grid must lie within [0, T]");
        if (k > 0 && !(grid(k) > grid(k - 1))) throw ValidationError("analytic: grid must be strictly increasing");
    }

    Solution sol;
    sol.adjoint_init = adjoint_initial_values(s);
    const ExponentialForm ef = exponential_form(s, sol.adjoint_init.lambda_q0);
    const double T = s.T;
    const Eigen::Index n = grid.size();
    Trajectory& traj = sol.trajectory;
    traj.t = grid;
    traj.q.resize(n, 1);
    traj.v.resize(n, 1);
    traj.u.resize(n, 1);
    Mat lq(n, 1);
    Mat lv(n, 1);

    VelocityDecomposition& dec = sol.decomposition;
    dec.zero_velocity.resize(n);
    dec.arc.resize(n);
    dec.coupling.resize(n);
    dec.factor_product.resize(n);
    dec.shape_factor.resize(n);

    const double d = scaled_denominator(T);
    const double th = std::tanh(0.5 * T);
    const double dq = s.qT - s.q0;
    const double vsum = s.v0 + s.vT;
    const double bracket = -th * vsum + dq;

    for (Eigen::Index k = 0; k < n; ++k) {
        const double t = grid(k);
        const double a = ef.alpha * std::exp(-t);
        const double b = ef.beta * std::exp(-(T - t));
        traj.v(k, 0) = -ef.lambda_q + a + b;
        traj.u(k, 0) = -a + b;
        lq(k, 0) = ef.lambda_q;
        lv(k, 0) = a - b;
        traj.q(k, 0) = s.q0 - ef.lambda_q * t + ef.alpha * (-std::expm1(-t)) + ef.beta * std::exp(-(T - t)) * (-std::expm1(-t));

        const double r_t = sinh_ratio(t, T);
        const double r_rest = sinh_ratio(T - t, T);
        const double shape = (r_rest - 1.0 + r_t) / d;
        dec.shape_factor(k) = shape;
        dec.zero_velocity(k) = shape * dq;
        dec.arc(k) = r_rest * s.v0 + r_t * s.vT;
        dec.coupling(k) = -th * shape * vsum;
        dec.factor_product(k) = bracket * shape;
    }
    traj.lambda_q = std::move(lq);
    traj.lambda_v = std::move(lv);

    double obj = 0.0;
    for (Eigen::Index k = 1; k < n; ++k) {
        const double l0 = 0.5 * (traj.v(k - 1, 0) * traj.v(k - 1, 0) + traj.u(k - 1, 0) * traj.u(k - 1, 0));
        const double l1 = 0.5 * (traj.v(k, 0) * traj.v(k, 0) + traj.u(k, 0) * traj.u(k, 0));
        obj += 0.5 * (grid(k) - grid(k - 1)) * (l0 + l1);
    }
    traj.objective = obj;

    const double one_minus_eT = -std::expm1(-T);
    const double one_minus_e2T = -std::expm1(-2.0 * T);
    sol.exact_objective = 0.5 * (ef.lambda_q * ef.lambda_q * T -
                                 2.0 * ef.lambda_q * (ef.alpha + ef.beta) * one_minus_eT +
                                 (ef.alpha * ef.alpha + ef.beta * ef.beta) * one_minus_e2T);
    return sol;
}

Solution analytic_trajectory(const Scenario& s, int N) {
    if (N < 1) throw ValidationError("analytic: N must be positive");
    s.validate();
    return analytic_trajectory(s, uniform_grid(0.0, s.T, N));
}

}  // namespace vturnpike::analytic
