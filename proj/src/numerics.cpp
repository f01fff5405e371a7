#include "vturnpike/numerics.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "vturnpike/errors.hpp"

namespace vturnpike {

LuFactorization::LuFactorization(Mat a) : lu_(std::move(a)) {
    const Eigen::Index n = lu_.rows();
    if (n != lu_.cols()) {
        throw ValidationError("lu: matrix must be square");
    }
    perm_.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) perm_[static_cast<std::size_t>(i)] = i;

    const double scale = n > 0 ? lu_.cwiseAbs().maxCoeff() : 0.0;
    const double tiny = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * scale;

    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::Index p = k;
        lu_.col(k).tail(n - k).cwiseAbs().maxCoeff(&p);
        p += k;
        if (!(std::abs(lu_(p, k)) > tiny)) {
            std::ostringstream msg;
            msg << "lu: matrix is singular to working precision (pivot " << k << ")";
            throw SingularityError(msg.str(), static_cast<std::size_t>(k));
        }
        if (p != k) {
            lu_.row(k).swap(lu_.row(p));
            std::swap(perm_[static_cast<std::size_t>(k)], perm_[static_cast<std::size_t>(p)]);
        }
        const double pivot = lu_(k, k);
        for (Eigen::Index i = k + 1; i < n; ++i) {
            const double factor = lu_(i, k) / pivot;
            lu_(i, k) = factor;
            if (factor != 0.0) {
                lu_.row(i).tail(n - k - 1) -= factor * lu_.row(k).tail(n - k - 1);
            }
        }
    }
}

Vec LuFactorization::solve(const Vec& b) const {
    const Eigen::Index n = lu_.rows();
    if (b.size() != n) {
        throw ValidationError("lu: right-hand side has incompatible size");
    }
    Vec x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = b(perm_[static_cast<std::size_t>(i)]);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i) -= lu_.row(i).head(i).dot(x.head(i));
    }
    for (Eigen::Index i = n - 1; i >= 0; --i) {
        x(i) = (x(i) - lu_.row(i).tail(n - i - 1).dot(x.tail(n - i - 1))) / lu_(i, i);
    }
    return x;
}

Vec lu_solve(const Mat& a, const Vec& b) { return LuFactorization(a).solve(b); }

void NewtonConfig::validate() const {
    if (!(tol_residual > 0.0)) throw ValidationError("newton: tol_residual must be positive");
    if (max_iter < 1) throw ValidationError("newton: max_iter must be at least 1");
    if (!(backtrack > 0.0 && backtrack < 1.0)) throw ValidationError("newton: backtrack must lie in (0, 1)");
    if (!(armijo > 0.0 && armijo < 1.0)) throw ValidationError("newton: armijo must lie in (0, 1)");
}

NewtonResult newton_solve(const VectorField& residual, const JacobianField& jacobian, const Vec& x0,
                          const NewtonConfig& cfg) {
    cfg.validate();
    NewtonResult out;
    out.x = x0;
    Vec r = residual(out.x);
    double norm = r.norm();
    out.history.push_back(norm);

    while (!(norm <= cfg.tol_residual)) {
        if (!std::isfinite(norm)) {
            throw ConvergenceError("newton: residual became non-finite", norm, out.history);
        }
        if (out.iterations >= cfg.max_iter) {
            std::ostringstream msg;
            msg << "newton: no convergence after " << cfg.max_iter << " iterations (residual " << norm << ")";
            throw ConvergenceError(msg.str(), norm, out.history);
        }
        const Mat jac = jacobian(out.x);
        if (jac.rows() != r.size() || jac.cols() != out.x.size()) {
            throw ValidationError("newton: Jacobian has inconsistent dimensions");
        }
        const Vec step = -lu_solve(jac, r);

        // Armijo on phi = ||F||^2 / 2, whose directional derivative along a
        // Newton step is -||F||^2.
        const double phi0 = 0.5 * norm * norm;
        double alpha = 1.0;
        Vec trial;
        Vec r_trial;
        double phi = 0.0;
        for (;;) {
            trial = out.x + alpha * step;
            r_trial = residual(trial);
            phi = 0.5 * r_trial.squaredNorm();
            if (std::isfinite(phi) && phi <= (1.0 - 2.0 * cfg.armijo * alpha) * phi0) break;
            alpha *= cfg.backtrack;
            if (alpha < 1e-12) {
                // Accept a full step when already at the rounding floor.
                if (std::isfinite(phi) && phi <= phi0) break;
                throw ConvergenceError("newton: line search failed to reduce the residual", norm, out.history);
            }
        }
        out.x = std::move(trial);
        r = std::move(r_trial);
        norm = r.norm();
        ++out.iterations;
        out.history.push_back(norm);
    }
    out.residual_norm = norm;
    return out;
}

Vec rk4_step(const OdeRhs& rhs, double t, const Vec& x, double h) {
    const Vec k1 = rhs(t, x);
    const Vec k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
    const Vec k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
    const Vec k4 = rhs(t + h, x + h * k3);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vec uniform_grid(double t0, double t1, int steps) {
    if (steps < 1) throw ValidationError("uniform_grid: steps must be at least 1");
    if (!(t1 > t0)) throw ValidationError("uniform_grid: t1 must exceed t0");
    Vec t(steps + 1);
    const double h = (t1 - t0) / steps;
    for (int k = 0; k <= steps; ++k) t(k) = t0 + k * h;
    t(steps) = t1;
    return t;
}

OdeSamples rk4_integrate(const OdeRhs& rhs, const Vec& x0, double t0, double t1, int steps) {
    if (steps < 1) throw ValidationError("rk4: steps must be at least 1");
    if (!(t1 > t0)) throw ValidationError("rk4: t1 must exceed t0");

    OdeSamples out;
    out.t = uniform_grid(t0, t1, steps);
    out.x.reserve(static_cast<std::size_t>(steps) + 1);
    out.x.push_back(x0);

    const OdeRhs checked = [&rhs](double t, const Vec& x) {
        Vec dx = rhs(t, x);
        if (!dx.allFinite()) {
            std::ostringstream msg;
            msg << "rk4: non-finite right-hand side at t = " << t;
            throw DomainError(msg.str());
        }
        return dx;
    };
    for (int k = 0; k < steps; ++k) {
        const double h = out.t(k + 1) - out.t(k);
        out.x.push_back(rk4_step(checked, out.t(k), out.x.back(), h));
    }
    return out;
}

Mat central_difference_jacobian(const VectorField& fn, const Vec& x, double rel_step) {
    Vec probe = x;
    Mat jac;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = rel_step * (1.0 + std::abs(x(j)));
        probe(j) = x(j) + h;
        const Vec fp = fn(probe);
        probe(j) = x(j) - h;
        const Vec fm = fn(probe);
        probe(j) = x(j);
        if (j == 0) jac.resize(fp.size(), x.size());
        jac.col(j) = (fp - fm) / (2.0 * h);
    }
    return jac;
}

}  // namespace vturnpike
