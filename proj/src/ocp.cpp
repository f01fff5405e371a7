#include "vturnpike/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "vturnpike/errors.hpp"

namespace vturnpike {

Vec control_law(const SystemModel& system, const StageCost& cost, const Vec& v, const Vec& lambda_v,
                const Vec& u_guess) {
    const int m = system.m();
    NewtonConfig cfg;
    cfg.tol_residual = 1e-13 * (1.0 + lambda_v.norm() + cost.grad_u(v, u_guess).norm());
    cfg.max_iter = 50;
    const VectorField g = [&](const Vec& u) -> Vec {
        return cost.grad_u(v, u) + system.df_du(v, u).transpose() * lambda_v;
    };
    const JacobianField jac = [&](const Vec& u) -> Mat {
        return cost.hess_uu(v, u) + system.weighted_hessian(v, u, lambda_v).bottomRightCorner(m, m);
    };
    try {
        return newton_solve(g, jac, u_guess, cfg).x;
    } catch (const SingularityError& e) {
        throw ConvergenceError(std::string("control law: optimality condition is singular in u (") + e.what() + ")",
                               g(u_guess).norm());
    }
}

// ---------------------------------------------------------------------------
// Direct trapezoidal collocation

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct NodeEval {
    Vec f;
    Mat fv, fu;
    Vec lv, lu;
    Mat hess;  // (n+m)^2 Hessian of l
};

class Collocation {
public:
    Collocation(const OcpSpec& spec) : spec_(spec), n_(spec.system.n_q()), m_(spec.system.m()), N_(spec.N) {
        s_ = 2 * n_ + m_;
        nz_ = (N_ + 1) * s_;
        nc_ = 2 * n_ * N_ + 4 * n_;
        t_ = uniform_grid(0.0, spec.T, N_);
        h_.resize(N_);
        for (int k = 0; k < N_; ++k) h_(k) = t_(k + 1) - t_(k);
    }

    Eigen::Index size() const { return nz_ + nc_; }

    Vec initial_guess() const {
        Vec x = Vec::Zero(size());
        for (int k = 0; k <= N_; ++k) {
            const double a = t_(k) / spec_.T;
            x.segment(q_idx(k), n_) = (1.0 - a) * spec_.q0 + a * spec_.qT;
            x.segment(v_idx(k), n_) = (1.0 - a) * spec_.v0 + a * spec_.vT;
        }
        return x;
    }

    Eigen::Index q_idx(int k) const { return static_cast<Eigen::Index>(k) * s_; }
    Eigen::Index v_idx(int k) const { return static_cast<Eigen::Index>(k) * s_ + n_; }
    Eigen::Index u_idx(int k) const { return static_cast<Eigen::Index>(k) * s_ + 2 * n_; }
    Eigen::Index muq_idx(int k) const { return nz_ + static_cast<Eigen::Index>(k) * 2 * n_; }
    Eigen::Index muv_idx(int k) const { return muq_idx(k) + n_; }
    Eigen::Index bc_idx(int which) const { return nz_ + static_cast<Eigen::Index>(2 * n_) * N_ + which * n_; }

    double weight(int k) const {
        double w = 0.0;
        if (k > 0) w += 0.5 * h_(k - 1);
        if (k < N_) w += 0.5 * h_(k);
        return w;
    }

    std::vector<NodeEval> evaluate_nodes(const Vec& x) const {
        std::vector<NodeEval> out(static_cast<std::size_t>(N_) + 1);
        for (int k = 0; k <= N_; ++k) {
            const Vec v = x.segment(v_idx(k), n_);
            const Vec u = x.segment(u_idx(k), m_);
            NodeEval& e = out[static_cast<std::size_t>(k)];
            e.f = spec_.system.f(v, u);
            e.fv = spec_.system.df_dv(v, u);
            e.fu = spec_.system.df_du(v, u);
            e.lv = spec_.cost.grad_v(v, u);
            e.lu = spec_.cost.grad_u(v, u);
            e.hess.resize(n_ + m_, n_ + m_);
            e.hess.topLeftCorner(n_, n_) = spec_.cost.hess_vv(v, u);
            e.hess.topRightCorner(n_, m_) = spec_.cost.hess_vu(v, u);
            e.hess.bottomLeftCorner(m_, n_) = spec_.cost.hess_vu(v, u).transpose();
            e.hess.bottomRightCorner(m_, m_) = spec_.cost.hess_uu(v, u);
        }
        return out;
    }

    // sigma_k = h_k/2 mu^v_k + h_{k-1}/2 mu^v_{k-1}: weight of f_k in the Lagrangian.
    Vec sigma(const Vec& x, int k) const {
        Vec s = Vec::Zero(n_);
        if (k < N_) s += 0.5 * h_(k) * x.segment(muv_idx(k), n_);
        if (k > 0) s += 0.5 * h_(k - 1) * x.segment(muv_idx(k - 1), n_);
        return s;
    }

    Vec residual(const Vec& x, const std::vector<NodeEval>& ev) const {
        Vec r = Vec::Zero(size());
        for (int k = 0; k <= N_; ++k) {
            const NodeEval& e = ev[static_cast<std::size_t>(k)];
            const Vec sig = sigma(x, k);
            const double w = weight(k);
            Vec gq = Vec::Zero(n_);
            Vec gv = w * e.lv + e.fv.transpose() * sig;
            if (k < N_) {
                gq += x.segment(muq_idx(k), n_);
                gv += 0.5 * h_(k) * x.segment(muq_idx(k), n_) + x.segment(muv_idx(k), n_);
            }
            if (k > 0) {
                gq -= x.segment(muq_idx(k - 1), n_);
                gv += 0.5 * h_(k - 1) * x.segment(muq_idx(k - 1), n_) - x.segment(muv_idx(k - 1), n_);
            }
            if (k == 0) {
                gq += x.segment(bc_idx(0), n_);
                gv += x.segment(bc_idx(1), n_);
            }
            if (k == N_) {
                gq += x.segment(bc_idx(2), n_);
                gv += x.segment(bc_idx(3), n_);
            }
            r.segment(q_idx(k), n_) = gq;
            r.segment(v_idx(k), n_) = gv;
            r.segment(u_idx(k), m_) = w * e.lu + e.fu.transpose() * sig;
        }
        for (int k = 0; k < N_; ++k) {
            const NodeEval& a = ev[static_cast<std::size_t>(k)];
            const NodeEval& b = ev[static_cast<std::size_t>(k) + 1];
            r.segment(muq_idx(k), n_) = x.segment(q_idx(k), n_) - x.segment(q_idx(k + 1), n_) +
                                        0.5 * h_(k) * (x.segment(v_idx(k), n_) + x.segment(v_idx(k + 1), n_));
            r.segment(muv_idx(k), n_) =
                x.segment(v_idx(k), n_) - x.segment(v_idx(k + 1), n_) + 0.5 * h_(k) * (a.f + b.f);
        }
        r.segment(bc_idx(0), n_) = x.segment(q_idx(0), n_) - spec_.q0;
        r.segment(bc_idx(1), n_) = x.segment(v_idx(0), n_) - spec_.v0;
        r.segment(bc_idx(2), n_) = x.segment(q_idx(N_), n_) - spec_.qT;
        r.segment(bc_idx(3), n_) = x.segment(v_idx(N_), n_) - spec_.vT;
        return r;
    }

    SpMat kkt_matrix(const Vec& x, const std::vector<NodeEval>& ev) const {
        std::vector<Triplet> trip;
        trip.reserve(static_cast<std::size_t>(N_ + 1) * static_cast<std::size_t>((n_ + m_) * (n_ + m_) + 8 * n_ * (n_ + m_)));

        // Structural zeros are kept so the sparsity pattern never changes
        // between Newton iterations (the symbolic analysis is reused).
        const auto sym = [&trip](Eigen::Index row, Eigen::Index col, double val) {
            trip.emplace_back(row, col, val);
            trip.emplace_back(col, row, val);
        };

        // Hessian of the Lagrangian, block diagonal in (v_k, u_k).
        for (int k = 0; k <= N_; ++k) {
            const NodeEval& e = ev[static_cast<std::size_t>(k)];
            const Vec v = x.segment(v_idx(k), n_);
            const Vec u = x.segment(u_idx(k), m_);
            const Mat hk = weight(k) * e.hess + spec_.system.weighted_hessian(v, u, sigma(x, k));
            for (int i = 0; i < n_ + m_; ++i) {
                for (int j = 0; j < n_ + m_; ++j) {
                    trip.emplace_back(v_idx(k) + i, v_idx(k) + j, hk(i, j));
                }
            }
        }

        for (int k = 0; k < N_; ++k) {
            const NodeEval& a = ev[static_cast<std::size_t>(k)];
            const NodeEval& b = ev[static_cast<std::size_t>(k) + 1];
            const double hh = 0.5 * h_(k);
            for (int i = 0; i < n_; ++i) {
                const Eigen::Index rq = muq_idx(k) + i;
                sym(rq, q_idx(k) + i, 1.0);
                sym(rq, q_idx(k + 1) + i, -1.0);
                sym(rq, v_idx(k) + i, hh);
                sym(rq, v_idx(k + 1) + i, hh);

                const Eigen::Index rv = muv_idx(k) + i;
                for (int j = 0; j < n_; ++j) {
                    sym(rv, v_idx(k) + j, (i == j ? 1.0 : 0.0) + hh * a.fv(i, j));
                    sym(rv, v_idx(k + 1) + j, (i == j ? -1.0 : 0.0) + hh * b.fv(i, j));
                }
                for (int j = 0; j < m_; ++j) {
                    sym(rv, u_idx(k) + j, hh * a.fu(i, j));
                    sym(rv, u_idx(k + 1) + j, hh * b.fu(i, j));
                }
            }
        }
        for (int i = 0; i < n_; ++i) {
            sym(bc_idx(0) + i, q_idx(0) + i, 1.0);
            sym(bc_idx(1) + i, v_idx(0) + i, 1.0);
            sym(bc_idx(2) + i, q_idx(N_) + i, 1.0);
            sym(bc_idx(3) + i, v_idx(N_) + i, 1.0);
        }

        SpMat kkt(size(), size());
        kkt.setFromTriplets(trip.begin(), trip.end());
        return kkt;
    }

    double max_defect(const Vec& r) const {
        return r.segment(nz_, 2 * n_ * N_).cwiseAbs().maxCoeff();
    }
    double boundary_error(const Vec& r) const { return r.segment(bc_idx(0), 4 * n_).cwiseAbs().maxCoeff(); }

    Trajectory extract(const Vec& x) const {
        Trajectory tr;
        tr.t = t_;
        const Eigen::Index nodes = N_ + 1;
        tr.q.resize(nodes, n_);
        tr.v.resize(nodes, n_);
        tr.u.resize(nodes, m_);
        for (int k = 0; k <= N_; ++k) {
            tr.q.row(k) = x.segment(q_idx(k), n_).transpose();
            tr.v.row(k) = x.segment(v_idx(k), n_).transpose();
            tr.u.row(k) = x.segment(u_idx(k), m_).transpose();
        }

        // Interval multipliers sit at midpoints; average onto interior nodes
        // and extrapolate linearly to the two ends.
        Mat lq(nodes, n_);
        Mat lv(nodes, n_);
        const auto mid_q = [&](int k) { return Vec(x.segment(muq_idx(k), n_)); };
        const auto mid_v = [&](int k) { return Vec(x.segment(muv_idx(k), n_)); };
        for (int k = 1; k < N_; ++k) {
            lq.row(k) = (0.5 * (mid_q(k - 1) + mid_q(k))).transpose();
            lv.row(k) = (0.5 * (mid_v(k - 1) + mid_v(k))).transpose();
        }
        const auto extrapolate = [](const Vec& near, const Vec& far, double h_near, double h_far) {
            // Linear through midpoints at -h_near/2 and -(h_near + h_far/2), evaluated at 0.
            const double a = 0.5 * h_near;
            const double b = h_near + 0.5 * h_far;
            return Vec(near + (near - far) * (a / (b - a)));
        };
        if (N_ >= 2) {
            lq.row(0) = extrapolate(mid_q(0), mid_q(1), h_(0), h_(1)).transpose();
            lv.row(0) = extrapolate(mid_v(0), mid_v(1), h_(0), h_(1)).transpose();
            lq.row(N_) = extrapolate(mid_q(N_ - 1), mid_q(N_ - 2), h_(N_ - 1), h_(N_ - 2)).transpose();
            lv.row(N_) = extrapolate(mid_v(N_ - 1), mid_v(N_ - 2), h_(N_ - 1), h_(N_ - 2)).transpose();
        }

        // The decision controls at the two ends pair with a one-sided
        // multiplier and are only first-order accurate; recover them from the
        // optimality condition with the extrapolated adjoint instead.
        for (const int k : {0, N_}) {
            try {
                tr.u.row(k) = control_law(spec_.system, spec_.cost, tr.v.row(k).transpose(), lv.row(k).transpose(),
                                          tr.u.row(k).transpose())
                                  .transpose();
            } catch (const Error&) {
                // keep the decision value
            }
        }
        tr.lambda_q = std::move(lq);
        tr.lambda_v = std::move(lv);
        tr.objective = trapezoid_objective(tr.t, tr.v, tr.u, spec_.cost);
        return tr;
    }

private:
    const OcpSpec& spec_;
    int n_, m_, N_, s_;
    Eigen::Index nz_, nc_;
    Vec t_, h_;
};

}  // namespace

DirectSolution solve_direct(const OcpSpec& spec, const NewtonConfig& cfg) {
    spec.validate();
    cfg.validate();
    const Collocation col(spec);

    Vec x = col.initial_guess();
    auto ev = col.evaluate_nodes(x);
    Vec r = col.residual(x, ev);
    double norm = r.norm();

    DirectSolution out;
    SolveDiagnostics& diag = out.diagnostics;
    diag.residual_history.push_back(norm);

    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    bool analyzed = false;

    while (!(norm <= cfg.tol_residual) && diag.iterations < cfg.max_iter) {
        const SpMat kkt = col.kkt_matrix(x, ev);
        if (!analyzed) {
            lu.analyzePattern(kkt);
            analyzed = true;
        }
        lu.factorize(kkt);
        if (lu.info() != Eigen::Success) {
            throw SingularityError("solve_direct: KKT matrix is singular (" + lu.lastErrorMessage() +
                                       "); try a finer grid or a different initial guess",
                                   0);
        }
        Vec step = lu.solve(-r);
        // One step of iterative refinement.
        step += lu.solve(-r - kkt * step);

        const double phi0 = 0.5 * norm * norm;
        double alpha = 1.0;
        Vec trial;
        std::vector<NodeEval> ev_trial;
        Vec r_trial;
        bool accepted = false;
        while (alpha >= 1e-12) {
            trial = x + alpha * step;
            ev_trial = col.evaluate_nodes(trial);
            r_trial = col.residual(trial, ev_trial);
            const double phi = 0.5 * r_trial.squaredNorm();
            if (std::isfinite(phi) && phi <= (1.0 - 2.0 * cfg.armijo * alpha) * phi0) {
                accepted = true;
                break;
            }
            alpha *= cfg.backtrack;
        }
        ++diag.iterations;
        if (!accepted) {
            diag.message = "line search failed to reduce the KKT residual";
            break;
        }
        x = std::move(trial);
        ev = std::move(ev_trial);
        r = std::move(r_trial);
        norm = r.norm();
        diag.residual_history.push_back(norm);
    }

    diag.residual = norm;
    diag.converged = norm <= cfg.tol_residual;
    if (!diag.converged && diag.message.empty()) {
        std::ostringstream msg;
        msg << "no convergence after " << diag.iterations << " Newton iterations (KKT residual " << norm << ")";
        diag.message = msg.str();
    }
    out.max_defect = col.max_defect(r);
    out.boundary_error = col.boundary_error(r);
    out.trajectory = col.extract(x);
    return out;
}

// ---------------------------------------------------------------------------
// Indirect multiple shooting

namespace {

class Shooter {
public:
    Shooter(const OcpSpec& spec, double segment_length)
        : spec_(spec), n_(spec.system.n_q()), m_(spec.system.m()), t_(uniform_grid(0.0, spec.T, spec.N)) {
        int k = static_cast<int>(std::ceil(spec.T / segment_length - 1e-12));
        k = std::clamp(k, 1, spec.N);
        for (int j = 0; j <= k; ++j) {
            bounds_.push_back(static_cast<int>(std::lround(static_cast<double>(j) * spec.N / k)));
        }
        u_warm_ = Vec::Zero(m_);
    }

    int segments() const { return static_cast<int>(bounds_.size()) - 1; }
    int state_dim() const { return 4 * n_; }
    Eigen::Index unknowns() const { return 2 * n_ + static_cast<Eigen::Index>(segments() - 1) * 4 * n_; }

    Vec rhs(double t, const Vec& z) {
        const Vec v = z.segment(n_, n_);
        const Vec lq = z.segment(2 * n_, n_);
        const Vec lv = z.segment(3 * n_, n_);
        Vec u;
        try {
            u = control_law(spec_.system, spec_.cost, v, lv, u_warm_);
        } catch (const ConvergenceError& e) {
            std::ostringstream msg;
            msg << "solve_indirect: cannot eliminate the control at t = " << t << ": " << e.what();
            throw ConvergenceError(msg.str(), e.residual());
        }
        u_warm_ = u;
        Vec dz(4 * n_);
        dz.segment(0, n_) = v;
        dz.segment(n_, n_) = spec_.system.f(v, u);
        dz.segment(2 * n_, n_).setZero();
        dz.segment(3 * n_, n_) =
            -spec_.cost.grad_v(v, u) - lq - spec_.system.df_dv(v, u).transpose() * lv;
        return dz;
    }

    // States at every node of segment j, starting from `start`.
    std::vector<Vec> propagate(int j, const Vec& start) {
        std::vector<Vec> states{start};
        const OdeRhs f = [this](double t, const Vec& z) { return rhs(t, z); };
        for (int k = bounds_[static_cast<std::size_t>(j)]; k < bounds_[static_cast<std::size_t>(j) + 1]; ++k) {
            Vec next = rk4_step(f, t_(k), states.back(), t_(k + 1) - t_(k));
            if (!next.allFinite()) {
                std::ostringstream msg;
                msg << "solve_indirect: state-adjoint integration diverged at t = " << t_(k + 1);
                throw ConvergenceError(msg.str(), std::numeric_limits<double>::infinity());
            }
            states.push_back(std::move(next));
        }
        return states;
    }

    Vec propagate_end(int j, const Vec& start) {
        const OdeRhs f = [this](double t, const Vec& z) { return rhs(t, z); };
        Vec z = start;
        for (int k = bounds_[static_cast<std::size_t>(j)]; k < bounds_[static_cast<std::size_t>(j) + 1]; ++k) {
            z = rk4_step(f, t_(k), z, t_(k + 1) - t_(k));
        }
        return z;
    }

    Vec segment_start(const Vec& unknowns, int j) const {
        if (j == 0) {
            Vec s(4 * n_);
            s << spec_.q0, spec_.v0, unknowns.head(2 * n_);
            return s;
        }
        return unknowns.segment(2 * n_ + static_cast<Eigen::Index>(j - 1) * 4 * n_, 4 * n_);
    }

    Vec residual(const Vec& unknowns) {
        const int K = segments();
        Vec r(unknowns.size());
        for (int j = 0; j < K; ++j) {
            const Vec end = propagate_end(j, segment_start(unknowns, j));
            if (j + 1 < K) {
                r.segment(static_cast<Eigen::Index>(j) * 4 * n_, 4 * n_) = end - segment_start(unknowns, j + 1);
            } else {
                Vec target(2 * n_);
                target << spec_.qT, spec_.vT;
                r.segment(static_cast<Eigen::Index>(j) * 4 * n_, 2 * n_) = end.head(2 * n_) - target;
            }
        }
        return r;
    }

    Mat jacobian(const Vec& unknowns) {
        const int K = segments();
        const Eigen::Index dim = unknowns.size();
        Mat jac = Mat::Zero(dim, dim);
        for (int j = 0; j < K; ++j) {
            const Vec start = segment_start(unknowns, j);
            const Eigen::Index row = static_cast<Eigen::Index>(j) * 4 * n_;
            const Eigen::Index rows = (j + 1 < K) ? 4 * n_ : 2 * n_;
            // Columns of this segment's own unknowns.
            const int first = (j == 0) ? 2 * n_ : 0;
            const Eigen::Index col0 = (j == 0) ? 0 : 2 * n_ + static_cast<Eigen::Index>(j - 1) * 4 * n_;
            Vec probe = start;
            for (int i = first; i < 4 * n_; ++i) {
                const double h = 1e-6 * (1.0 + std::abs(start(i)));
                probe(i) = start(i) + h;
                const Vec fp = propagate_end(j, probe);
                probe(i) = start(i) - h;
                const Vec fm = propagate_end(j, probe);
                probe(i) = start(i);
                jac.block(row, col0 + (i - first), rows, 1) = ((fp - fm) / (2.0 * h)).head(rows);
            }
            if (j + 1 < K) {
                const Eigen::Index next_col = 2 * n_ + static_cast<Eigen::Index>(j) * 4 * n_;
                jac.block(row, next_col, 4 * n_, 4 * n_) -= Mat::Identity(4 * n_, 4 * n_);
            }
        }
        return jac;
    }

    Vec initial_unknowns(const ShootingGuess& g, const Trajectory* warm) const {
        Vec x(unknowns());
        x.head(2 * n_) << g.lambda_q0, g.lambda_v0;
        for (int j = 1; j < segments(); ++j) {
            const int k = bounds_[static_cast<std::size_t>(j)];
            Vec s(4 * n_);
            if (warm != nullptr && warm->has_adjoints()) {
                s << warm->q.row(k).transpose(), warm->v.row(k).transpose(), warm->lambda_q->row(k).transpose(),
                    warm->lambda_v->row(k).transpose();
            } else {
                const double a = t_(k) / spec_.T;
                s << (1.0 - a) * spec_.q0 + a * spec_.qT, (1.0 - a) * spec_.v0 + a * spec_.vT, g.lambda_q0,
                    g.lambda_v0;
            }
            x.segment(2 * n_ + static_cast<Eigen::Index>(j - 1) * 4 * n_, 4 * n_) = s;
        }
        return x;
    }

    Trajectory assemble(const Vec& unknowns) {
        const Eigen::Index nodes = t_.size();
        Trajectory tr;
        tr.t = t_;
        tr.q.resize(nodes, n_);
        tr.v.resize(nodes, n_);
        tr.u.resize(nodes, m_);
        Mat lq(nodes, n_);
        Mat lv(nodes, n_);
        const int K = segments();
        for (int j = 0; j < K; ++j) {
            const auto states = propagate(j, segment_start(unknowns, j));
            const int k0 = bounds_[static_cast<std::size_t>(j)];
            const int last = (j + 1 < K) ? static_cast<int>(states.size()) - 1 : static_cast<int>(states.size());
            for (int i = 0; i < last; ++i) {
                const Vec& z = states[static_cast<std::size_t>(i)];
                tr.q.row(k0 + i) = z.segment(0, n_).transpose();
                tr.v.row(k0 + i) = z.segment(n_, n_).transpose();
                lq.row(k0 + i) = z.segment(2 * n_, n_).transpose();
                lv.row(k0 + i) = z.segment(3 * n_, n_).transpose();
            }
        }
        Vec u_prev = Vec::Zero(m_);
        for (Eigen::Index k = 0; k < nodes; ++k) {
            u_prev = control_law(spec_.system, spec_.cost, tr.v.row(k).transpose(), lv.row(k).transpose(), u_prev);
            tr.u.row(k) = u_prev.transpose();
        }
        tr.lambda_q = std::move(lq);
        tr.lambda_v = std::move(lv);
        tr.objective = trapezoid_objective(tr.t, tr.v, tr.u, spec_.cost);
        return tr;
    }

private:
    const OcpSpec& spec_;
    int n_, m_;
    Vec t_;
    std::vector<int> bounds_;
    Vec u_warm_;
};

}  // namespace

IndirectSolution solve_indirect(const OcpSpec& spec, const NewtonConfig& cfg, std::optional<ShootingGuess> guess,
                                const IndirectOptions& options) {
    spec.validate();
    cfg.validate();
    if (!(options.segment_length > 0.0)) throw ValidationError("solve_indirect: segment_length must be positive");
    const int n = spec.system.n_q();

    ShootingGuess g = guess.value_or(ShootingGuess{Vec::Zero(n), Vec::Zero(n)});
    if (g.lambda_q0.size() != n || g.lambda_v0.size() != n) {
        throw ValidationError("solve_indirect: adjoint guess has the wrong dimension");
    }

    Shooter shooter(spec, options.segment_length);
    IndirectSolution out;
    out.segments = shooter.segments();

    const auto attempt = [&](const Vec& x0) {
        return newton_solve([&](const Vec& x) { return shooter.residual(x); },
                            [&](const Vec& x) { return shooter.jacobian(x); }, x0, cfg);
    };

    NewtonResult res;
    std::vector<double> history;
    try {
        res = attempt(shooter.initial_unknowns(g, nullptr));
    } catch (const Error& first) {
        if (const auto* ce = dynamic_cast<const ConvergenceError*>(&first)) history = ce->history();
        if (!options.warm_start_fallback) {
            throw ConvergenceError(std::string("solve_indirect: ") + first.what(),
                                   history.empty() ? std::numeric_limits<double>::infinity() : history.back(),
                                   history);
        }
        const DirectSolution direct = solve_direct(spec, cfg);
        const Trajectory& w = direct.trajectory;
        ShootingGuess warm{w.lambda_q->row(0).transpose(), w.lambda_v->row(0).transpose()};
        try {
            res = attempt(shooter.initial_unknowns(warm, &w));
        } catch (const ConvergenceError& second) {
            std::vector<double> all = history;
            all.insert(all.end(), second.history().begin(), second.history().end());
            throw ConvergenceError(std::string("solve_indirect: shooting failed from the default and the "
                                               "warm-started guess: ") +
                                       second.what(),
                                   second.residual(), all);
        }
        out.warm_started = true;
    }

    out.diagnostics.converged = true;
    out.diagnostics.iterations = res.iterations;
    out.diagnostics.residual = res.residual_norm;
    out.diagnostics.residual_history = history;
    out.diagnostics.residual_history.insert(out.diagnostics.residual_history.end(), res.history.begin(),
                                            res.history.end());
    out.initial_adjoint = {res.x.head(n), res.x.segment(n, n)};
    out.trajectory = shooter.assemble(res.x);

    Vec end(2 * n);
    Vec target(2 * n);
    const Eigen::Index last = out.trajectory.nodes() - 1;
    end << out.trajectory.q.row(last).transpose(), out.trajectory.v.row(last).transpose();
    target << spec.qT, spec.vT;
    out.terminal_error = (end - target).norm();
    return out;
}

// ---------------------------------------------------------------------------
// Residuals of the necessary conditions

namespace {

// First-derivative weights at x0 for nodes xs: exact for polynomials of
// degree < xs.size(). Offsets are scaled by their spread for conditioning.
std::vector<double> derivative_weights(double x0, const std::vector<double>& xs) {
    const auto n = static_cast<Eigen::Index>(xs.size());
    double scale = 0.0;
    for (double x : xs) scale = std::max(scale, std::abs(x - x0));
    Mat vander(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = (xs[static_cast<std::size_t>(i)] - x0) / scale;
        double p = 1.0;
        for (Eigen::Index r = 0; r < n; ++r) {
            vander(r, i) = p;
            p *= d;
        }
    }
    Vec rhs = Vec::Zero(n);
    rhs(1) = 1.0 / scale;
    const Vec w = vander.partialPivLu().solve(rhs);
    return {w.data(), w.data() + n};
}

}  // namespace

Mat grid_derivative(const Vec& t, const Mat& x) {
    const Eigen::Index n = t.size();
    if (x.rows() != n) throw ValidationError("grid_derivative: sample count mismatch");
    if (n < 2) return Mat::Zero(n, x.cols());
    const Eigen::Index width = std::min<Eigen::Index>(5, n);
    Mat d(n, x.cols());
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::Index lo = k - width / 2;
        lo = std::clamp<Eigen::Index>(lo, 0, n - width);
        std::vector<double> xs(static_cast<std::size_t>(width));
        for (Eigen::Index i = 0; i < width; ++i) xs[static_cast<std::size_t>(i)] = t(lo + i);
        const auto w = derivative_weights(t(k), xs);
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(x.cols());
        for (Eigen::Index i = 0; i < width; ++i) acc += w[static_cast<std::size_t>(i)] * x.row(lo + i);
        d.row(k) = acc;
    }
    return d;
}

double PmpResiduals::max_all() const { return std::max({max_lambda_q_rate, max_costate, max_stationarity}); }

PmpResiduals pmp_residuals(const Trajectory& traj, const OcpSpec& spec) {
    traj.validate();
    if (!traj.has_adjoints()) throw ValidationError("pmp_residuals: trajectory carries no adjoints");
    const int n = spec.system.n_q();
    const int m = spec.system.m();
    if (traj.q.cols() != n || traj.u.cols() != m) throw ValidationError("pmp_residuals: dimension mismatch");

    const Eigen::Index nodes = traj.nodes();
    PmpResiduals out;
    out.lambda_q_rate = grid_derivative(traj.t, *traj.lambda_q);
    const Mat lv_rate = grid_derivative(traj.t, *traj.lambda_v);
    out.costate.resize(nodes, n);
    out.stationarity.resize(nodes, m);
    for (Eigen::Index k = 0; k < nodes; ++k) {
        const Vec v = traj.v.row(k).transpose();
        const Vec u = traj.u.row(k).transpose();
        const Vec lq = traj.lambda_q->row(k).transpose();
        const Vec lv = traj.lambda_v->row(k).transpose();
        out.costate.row(k) =
            (lv_rate.row(k).transpose() + spec.cost.grad_v(v, u) + lq + spec.system.df_dv(v, u).transpose() * lv)
                .transpose();
        out.stationarity.row(k) = (spec.cost.grad_u(v, u) + spec.system.df_du(v, u).transpose() * lv).transpose();
    }

    const auto norms = [&traj](const Mat& r, double& mx, double& l2) {
        mx = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
        double acc = 0.0;
        for (Eigen::Index k = 1; k < r.rows(); ++k) {
            acc += 0.5 * (traj.t(k) - traj.t(k - 1)) * (r.row(k).squaredNorm() + r.row(k - 1).squaredNorm());
        }
        l2 = std::sqrt(acc);
    };
    norms(out.lambda_q_rate, out.max_lambda_q_rate, out.l2_lambda_q_rate);
    norms(out.costate, out.max_costate, out.l2_costate);
    norms(out.stationarity, out.max_stationarity, out.l2_stationarity);
    return out;
}

}  // namespace vturnpike
