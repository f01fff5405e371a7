#include "vturnpike/steady.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

#include "vturnpike/errors.hpp"

namespace vturnpike {

namespace {

double trim_tolerance(const Vec& v, const Vec& u) { return 1e-10 * (1.0 + v.norm() + u.norm()); }

Vec or_zero(const Vec& x, int n) { return x.size() ? x : Vec::Zero(n); }

}  // namespace

Trim find_trim(const SystemModel& system, const Vec& v_fixed, const StageCost* cost, std::optional<Vec> u_guess,
               const NewtonConfig& cfg) {
    cfg.validate();
    const int n = system.n_q();
    const int m = system.m();
    if (v_fixed.size() != n) throw ValidationError("find_trim: v_fixed has the wrong dimension");

    Vec u = u_guess ? *u_guess : Vec::Zero(m);
    if (u.size() != m) throw ValidationError("find_trim: u_guess has the wrong dimension");

    if (m == n) {
        try {
            const auto res = newton_solve([&](const Vec& x) { return system.f(v_fixed, x); },
                                          [&](const Vec& x) { return system.df_du(v_fixed, x); }, u, cfg);
            u = res.x;
        } catch (const SingularityError& e) {
            throw ConvergenceError(std::string("find_trim: df/du is singular (") + e.what() +
                                       "); try a different u_guess",
                                   system.f(v_fixed, u).norm());
        } catch (const ConvergenceError& e) {
            throw ConvergenceError(std::string("find_trim: ") + e.what() + "; try a different u_guess", e.residual(),
                                   e.history());
        }
    } else {
        // Gauss-Newton with minimum-norm steps.
        for (int it = 0; it < cfg.max_iter; ++it) {
            const Vec r = system.f(v_fixed, u);
            const Mat j = system.df_du(v_fixed, u);
            const Vec step = j.completeOrthogonalDecomposition().solve(-r);
            u += step;
            if (step.norm() <= 1e-14 * (1.0 + u.norm())) break;
        }
    }

    const Vec r = system.f(v_fixed, u);
    if (!(r.norm() <= trim_tolerance(v_fixed, u))) {
        std::ostringstream msg;
        msg << "find_trim: no input u with f(v, u) = 0 for this velocity (least-squares residual " << r.norm()
            << ")";
        if (m < n) msg << "; the system has fewer inputs than velocities and may admit no trim here";
        msg << "; try a different u_guess";
        throw ConvergenceError(msg.str(), r.norm());
    }

    Trim trim;
    trim.v_bar = v_fixed;
    trim.u_bar = u;
    trim.cost_value = cost ? cost->value(v_fixed, u) : 0.0;
    return trim;
}

Vec steady_kkt_residual(const SystemModel& system, const StageCost& cost, const Vec& v, const Vec& u,
                        const Vec& lambda) {
    const int n = system.n_q();
    const int m = system.m();
    Vec r(2 * n + m);
    r.segment(0, n) = system.f(v, u);
    r.segment(n, n) = cost.grad_v(v, u) + system.df_dv(v, u).transpose() * lambda;
    r.segment(2 * n, m) = cost.grad_u(v, u) + system.df_du(v, u).transpose() * lambda;
    return r;
}

namespace {

// Hessian of l + lambda^T f with respect to (v, u).
Mat lagrangian_hessian(const SystemModel& system, const StageCost& cost, const Vec& v, const Vec& u,
                       const Vec& lambda) {
    const int n = system.n_q();
    const int m = system.m();
    Mat w(n + m, n + m);
    w.topLeftCorner(n, n) = cost.hess_vv(v, u);
    w.topRightCorner(n, m) = cost.hess_vu(v, u);
    w.bottomLeftCorner(m, n) = cost.hess_vu(v, u).transpose();
    w.bottomRightCorner(m, m) = cost.hess_uu(v, u);
    return w + system.weighted_hessian(v, u, lambda);
}

}  // namespace

SteadyStateResult solve_velocity_steady_state(const SteadyStateProblem& problem, const NewtonConfig& cfg) {
    const SystemModel& sys = problem.system;
    const StageCost& cost = problem.cost;
    const int n = sys.n_q();
    const int m = sys.m();
    if (cost.n_q() != n || cost.m() != m) throw ValidationError("steady state: cost dimensions do not match the system");

    Vec z0(2 * n + m);
    z0 << or_zero(problem.v_guess, n), or_zero(problem.u_guess, m), or_zero(problem.lambda_guess, n);
    if (z0.size() != 2 * n + m) throw ValidationError("steady state: guess has the wrong dimension");

    const auto split = [n, m](const Vec& z) {
        return std::tuple<Vec, Vec, Vec>(z.segment(0, n), z.segment(n, m), z.segment(n + m, n));
    };
    const VectorField residual = [&](const Vec& z) {
        const auto [v, u, l] = split(z);
        return steady_kkt_residual(sys, cost, v, u, l);
    };
    const JacobianField jacobian = [&](const Vec& z) {
        const auto [v, u, l] = split(z);
        Mat j = Mat::Zero(2 * n + m, 2 * n + m);
        const Mat fv = sys.df_dv(v, u);
        const Mat fu = sys.df_du(v, u);
        j.block(0, 0, n, n) = fv;
        j.block(0, n, n, m) = fu;
        j.block(n, 0, n + m, n + m) = lagrangian_hessian(sys, cost, v, u, l);
        j.block(n, n + m, n, n) = fv.transpose();
        j.block(2 * n, n + m, m, n) = fu.transpose();
        return j;
    };

    NewtonResult res;
    try {
        res = newton_solve(residual, jacobian, z0, cfg);
    } catch (const SingularityError& e) {
        throw ConvergenceError(std::string("steady state: singular KKT matrix (") + e.what() +
                                   "); try a different initial guess",
                               residual(z0).norm());
    }

    const auto [v, u, l] = split(res.x);
    SteadyStateResult out;
    out.trim.v_bar = v;
    out.trim.u_bar = u;
    out.trim.lambda_bar = l;
    out.trim.cost_value = cost.value(v, u);
    out.kkt_residual = res.residual_norm;
    out.iterations = res.iterations;

    Mat a(n, n + m);
    a << sys.df_dv(v, u), sys.df_du(v, u);
    const Eigen::FullPivLU<Mat> lu(a);
    const Mat kernel = lu.dimensionOfKernel() > 0 ? Mat(lu.kernel()) : Mat(n + m, 0);
    if (kernel.cols() > 0) {
        const Eigen::HouseholderQR<Mat> qr(kernel);
        const Mat z = qr.householderQ() * Mat::Identity(n + m, kernel.cols());
        const Mat reduced = z.transpose() * lagrangian_hessian(sys, cost, v, u, l) * z;
        const Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (reduced + reduced.transpose()), Eigen::EigenvaluesOnly);
        out.min_reduced_eigenvalue = eig.eigenvalues().minCoeff();
    } else {
        out.min_reduced_eigenvalue = 0.0;
    }
    out.is_minimizer = out.min_reduced_eigenvalue >= -1e-8;
    if (problem.bounds) out.within_bounds = problem.bounds->contains(v, u);
    return out;
}

std::vector<Vec> default_velocity_guesses(int n_q) {
    std::vector<Vec> guesses;
    for (int k = -4; k <= 4; ++k) guesses.push_back(Vec::Constant(n_q, 2.5 * k));
    return guesses;
}

std::vector<SteadyStateResult> multistart_steady_state(const SteadyStateProblem& problem,
                                                       const std::vector<Vec>& v_guesses, const NewtonConfig& cfg,
                                                       double dedup_tol) {
    std::vector<SteadyStateResult> found;
    for (const Vec& g : v_guesses) {
        SteadyStateProblem p = problem;
        p.v_guess = g;
        p.u_guess = Vec();
        p.lambda_guess = Vec();
        SteadyStateResult r;
        try {
            r = solve_velocity_steady_state(p, cfg);
        } catch (const Error&) {
            continue;
        }
        const bool duplicate = std::any_of(found.begin(), found.end(), [&](const SteadyStateResult& other) {
            Vec a(r.trim.v_bar.size() + r.trim.u_bar.size());
            Vec b(a.size());
            a << r.trim.v_bar, r.trim.u_bar;
            b << other.trim.v_bar, other.trim.u_bar;
            return (a - b).norm() <= dedup_tol;
        });
        if (!duplicate) found.push_back(std::move(r));
    }
    std::stable_sort(found.begin(), found.end(), [](const SteadyStateResult& a, const SteadyStateResult& b) {
        return a.trim.cost_value < b.trim.cost_value;
    });
    return found;
}

}  // namespace vturnpike
