#include "vturnpike/model.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "vturnpike/errors.hpp"

namespace vturnpike {

namespace {

void require_dim(const Vec& x, int n, const char* what) {
    if (x.size() != n) {
        std::ostringstream msg;
        msg << what << ": expected dimension " << n << ", got " << x.size();
        throw ValidationError(msg.str());
    }
}

}  // namespace

SystemModel::SystemModel(std::string name, int n_q, int m, Map f, JacobianMap df_dv, JacobianMap df_du,
                         WeightedHessianMap weighted_hessian)
    : name_(std::move(name)),
      n_q_(n_q),
      m_(m),
      f_(std::move(f)),
      df_dv_(std::move(df_dv)),
      df_du_(std::move(df_du)),
      weighted_hessian_(std::move(weighted_hessian)) {
    if (n_q_ < 1 || m_ < 1) throw ValidationError("system: n_q and m must be positive");
    if (!f_ || !df_dv_ || !df_du_) throw ValidationError("system: f and its Jacobians are required");
}

void SystemModel::check_args(const Vec& v, const Vec& u) const {
    require_dim(v, n_q_, "system velocity");
    require_dim(u, m_, "system input");
}

Vec SystemModel::f(const Vec& v, const Vec& u) const {
    check_args(v, u);
    return f_(v, u);
}

Mat SystemModel::df_dv(const Vec& v, const Vec& u) const {
    check_args(v, u);
    return df_dv_(v, u);
}

Mat SystemModel::df_du(const Vec& v, const Vec& u) const {
    check_args(v, u);
    return df_du_(v, u);
}

Mat SystemModel::weighted_hessian(const Vec& v, const Vec& u, const Vec& w) const {
    check_args(v, u);
    require_dim(w, n_q_, "system weight");
    if (weighted_hessian_) return weighted_hessian_(v, u, w);

    const int n = n_q_;
    Vec z(n + m_);
    z << v, u;
    const VectorField grad = [&](const Vec& x) {
        const Vec vv = x.head(n);
        const Vec uu = x.tail(m_);
        Vec g(n + m_);
        g << df_dv_(vv, uu).transpose() * w, df_du_(vv, uu).transpose() * w;
        return g;
    };
    const double h = std::cbrt(std::numeric_limits<double>::epsilon());
    Mat hess = central_difference_jacobian(grad, z, h);
    return 0.5 * (hess + hess.transpose());
}

StageCost::StageCost(std::string description, int n_q, int m, Callbacks callbacks)
    : description_(std::move(description)), n_q_(n_q), m_(m), cb_(std::move(callbacks)) {
    if (!cb_.value || !cb_.grad_v || !cb_.grad_u || !cb_.hess_vv || !cb_.hess_uu || !cb_.hess_vu) {
        throw ValidationError("cost: value, gradients and Hessians are required");
    }
}

StageCost StageCost::scaled(double factor) const {
    Callbacks cb = cb_;
    auto base = cb_;
    cb.value = [base, factor](const Vec& v, const Vec& u) { return factor * base.value(v, u); };
    cb.grad_v = [base, factor](const Vec& v, const Vec& u) -> Vec { return factor * base.grad_v(v, u); };
    cb.grad_u = [base, factor](const Vec& v, const Vec& u) -> Vec { return factor * base.grad_u(v, u); };
    cb.hess_vv = [base, factor](const Vec& v, const Vec& u) -> Mat { return factor * base.hess_vv(v, u); };
    cb.hess_uu = [base, factor](const Vec& v, const Vec& u) -> Mat { return factor * base.hess_uu(v, u); };
    cb.hess_vu = [base, factor](const Vec& v, const Vec& u) -> Mat { return factor * base.hess_vu(v, u); };
    std::ostringstream desc;
    desc << factor << " * (" << description_ << ")";
    return StageCost(desc.str(), n_q_, m_, std::move(cb));
}

bool Box::contains(const Vec& v, const Vec& u) const {
    const auto inside = [](const Vec& x, const Vec& lo, const Vec& hi) {
        if (lo.size() == x.size() && (x.array() < lo.array()).any()) return false;
        if (hi.size() == x.size() && (x.array() > hi.array()).any()) return false;
        return true;
    };
    return inside(v, v_lo, v_hi) && inside(u, u_lo, u_hi);
}

void OcpSpec::validate() const {
    if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("ocp: horizon T must be positive and finite");
    if (N < 2) throw ValidationError("ocp: grid size N must be at least 2");
    const int n = system.n_q();
    require_dim(q0, n, "ocp q0");
    require_dim(v0, n, "ocp v0");
    require_dim(qT, n, "ocp qT");
    require_dim(vT, n, "ocp vT");
    if (cost.n_q() != n || cost.m() != system.m()) {
        throw ValidationError("ocp: cost dimensions do not match the system");
    }
}

void Trajectory::validate() const {
    const Eigen::Index n = t.size();
    if (n == 0) throw ValidationError("trajectory: empty time grid");
    if (q.rows() != n || v.rows() != n || u.rows() != n) {
        throw ValidationError("trajectory: sample arrays must share the grid length");
    }
    for (Eigen::Index k = 1; k < n; ++k) {
        if (!(t(k) > t(k - 1))) throw ValidationError("trajectory: time grid must be strictly increasing");
    }
    if (lambda_q && lambda_q->rows() != n) throw ValidationError("trajectory: lambda_q length mismatch");
    if (lambda_v && lambda_v->rows() != n) throw ValidationError("trajectory: lambda_v length mismatch");
}

std::vector<std::string> builtin_system_names() { return {"double_integrator", "damped_integrator"}; }

SystemModel builtin_system(std::string_view name, const BuiltinParams& params) {
    if (params.dim < 1) throw ValidationError("builtin system: dim must be positive");
    const int n = params.dim;

    if (name == "double_integrator") {
        return SystemModel(
            "double_integrator", n, n, [](const Vec&, const Vec& u) -> Vec { return u; },
            [n](const Vec&, const Vec&) -> Mat { return Mat::Zero(n, n); },
            [n](const Vec&, const Vec&) -> Mat { return Mat::Identity(n, n); },
            [n](const Vec&, const Vec&, const Vec&) -> Mat { return Mat::Zero(2 * n, 2 * n); });
    }

    double c = params.damping;
    std::string_view base = name;
    if (const auto open = name.find('('); open != std::string_view::npos && name.back() == ')') {
        base = name.substr(0, open);
        const std::string arg(name.substr(open + 1, name.size() - open - 2));
        try {
            std::size_t used = 0;
            c = std::stod(arg, &used);
            if (used != arg.size()) throw std::invalid_argument(arg);
        } catch (const std::exception&) {
            throw ValidationError("builtin system: cannot parse damping coefficient '" + arg + "'");
        }
    }
    if (base == "damped_integrator") {
        std::ostringstream label;
        label << "damped_integrator(" << c << ")";
        return SystemModel(
            label.str(), n, n, [c](const Vec& v, const Vec& u) -> Vec { return u - c * v; },
            [n, c](const Vec&, const Vec&) -> Mat { return -c * Mat::Identity(n, n); },
            [n](const Vec&, const Vec&) -> Mat { return Mat::Identity(n, n); },
            [n](const Vec&, const Vec&, const Vec&) -> Mat { return Mat::Zero(2 * n, 2 * n); });
    }

    std::ostringstream msg;
    msg << "unknown system '" << name << "'; available:";
    for (const auto& s : builtin_system_names()) msg << ' ' << s;
    throw LookupError(msg.str());
}

StageCost quadratic_cost(const Mat& Qv, const Mat& Ru, const Vec& v_ref, const Vec& u_ref) {
    if (Qv.rows() != Qv.cols() || Ru.rows() != Ru.cols()) {
        throw ValidationError("quadratic cost: weight matrices must be square");
    }
    const auto symmetric = [](const Mat& a) {
        return (a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + a.cwiseAbs().maxCoeff());
    };
    if (!symmetric(Qv)) throw ValidationError("quadratic cost: Qv is not symmetric");
    if (!symmetric(Ru)) throw ValidationError("quadratic cost: Ru is not symmetric");

    const Eigen::SelfAdjointEigenSolver<Mat> eq(Qv, Eigen::EigenvaluesOnly);
    const Eigen::SelfAdjointEigenSolver<Mat> er(Ru, Eigen::EigenvaluesOnly);
    if (eq.eigenvalues().minCoeff() < -1e-12) throw ValidationError("quadratic cost: Qv is not positive semidefinite");
    if (!(er.eigenvalues().minCoeff() > 0.0)) throw ValidationError("quadratic cost: Ru is not positive definite");

    const int n = static_cast<int>(Qv.rows());
    const int m = static_cast<int>(Ru.rows());
    const Vec vr = v_ref.size() ? v_ref : Vec::Zero(n);
    const Vec ur = u_ref.size() ? u_ref : Vec::Zero(m);
    require_dim(vr, n, "quadratic cost v_ref");
    require_dim(ur, m, "quadratic cost u_ref");

    StageCost::Callbacks cb;
    cb.value = [Qv, Ru, vr, ur](const Vec& v, const Vec& u) {
        const Vec dv = v - vr;
        const Vec du = u - ur;
        return 0.5 * dv.dot(Qv * dv) + 0.5 * du.dot(Ru * du);
    };
    cb.grad_v = [Qv, vr](const Vec& v, const Vec&) -> Vec { return Qv * (v - vr); };
    cb.grad_u = [Ru, ur](const Vec&, const Vec& u) -> Vec { return Ru * (u - ur); };
    cb.hess_vv = [Qv](const Vec&, const Vec&) -> Mat { return Qv; };
    cb.hess_uu = [Ru](const Vec&, const Vec&) -> Mat { return Ru; };
    cb.hess_vu = [n, m](const Vec&, const Vec&) -> Mat { return Mat::Zero(n, m); };
    return StageCost("quadratic", n, m, std::move(cb));
}

double trapezoid_objective(const Vec& t, const Mat& v, const Mat& u, const StageCost& cost) {
    double total = 0.0;
    double prev = 0.0;
    for (Eigen::Index k = 0; k < t.size(); ++k) {
        const double l = cost.value(v.row(k).transpose(), u.row(k).transpose());
        if (k > 0) total += 0.5 * (t(k) - t(k - 1)) * (prev + l);
        prev = l;
    }
    return total;
}

Trajectory simulate(const SystemModel& system, const std::function<Vec(double)>& control, const Vec& q0,
                    const Vec& v0, double T, int steps) {
    const int n = system.n_q();
    require_dim(q0, n, "simulate q0");
    require_dim(v0, n, "simulate v0");
    Vec x0(2 * n);
    x0 << q0, v0;
    const OdeRhs rhs = [&](double t, const Vec& x) {
        Vec dx(2 * n);
        dx << x.tail(n), system.f(x.tail(n), control(t));
        return dx;
    };
    const OdeSamples samples = rk4_integrate(rhs, x0, 0.0, T, steps);

    Trajectory traj;
    traj.t = samples.t;
    const Eigen::Index nodes = samples.t.size();
    traj.q.resize(nodes, n);
    traj.v.resize(nodes, n);
    traj.u.resize(nodes, system.m());
    for (Eigen::Index k = 0; k < nodes; ++k) {
        const Vec& x = samples.x[static_cast<std::size_t>(k)];
        traj.q.row(k) = x.head(n).transpose();
        traj.v.row(k) = x.tail(n).transpose();
        traj.u.row(k) = control(samples.t(k)).transpose();
    }
    return traj;
}

AdmissibilityReport check_admissibility(const Trajectory& traj, const Box& box) {
    AdmissibilityReport report;
    for (Eigen::Index k = 0; k < traj.nodes(); ++k) {
        if (!box.contains(traj.v.row(k).transpose(), traj.u.row(k).transpose())) {
            report.admissible = false;
            report.violating_nodes.push_back(k);
        }
    }
    return report;
}

}  // namespace vturnpike
