#include "vturnpike/turnpike.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "vturnpike/errors.hpp"
#include "vturnpike/steady.hpp"

namespace vturnpike {

Vec trim_deviation(const Trajectory& traj, const Trim& trim) {
    traj.validate();
    if (trim.v_bar.size() != traj.v.cols() || trim.u_bar.size() != traj.u.cols()) {
        throw ValidationError("trim dimensions do not match the trajectory");
    }
    Vec d(traj.nodes());
    for (Eigen::Index k = 0; k < traj.nodes(); ++k) {
        const double dv = (traj.v.row(k).transpose() - trim.v_bar).squaredNorm();
        const double du = (traj.u.row(k).transpose() - trim.u_bar).squaredNorm();
        d(k) = std::sqrt(dv + du);
    }
    return d;
}

namespace {

double measure_above(const Vec& t, const Vec& d, double eps) {
    double total = 0.0;
    for (Eigen::Index k = 0; k + 1 < t.size(); ++k) {
        const double h = t(k + 1) - t(k);
        const bool a = d(k) > eps;
        const bool b = d(k + 1) > eps;
        if (a && b) {
            total += h;
        } else if (a != b) {
            const double above = a ? d(k) : d(k + 1);
            total += h * (above - eps) / std::abs(d(k + 1) - d(k));
        }
    }
    return total;
}

}  // namespace

double theta_measure(const Trajectory& traj, const Trim& trim, double eps) {
    if (!(eps >= 0.0)) throw ValidationError("theta_measure: eps must be non-negative");
    return measure_above(traj.t, trim_deviation(traj, trim), eps);
}

Trim common_trim(const std::vector<Trim>& trims, double tol) {
    if (trims.empty()) throw ValidationError("common_trim: no trims given");
    for (const Trim& t : trims) {
        if (t.v_bar.size() != trims[0].v_bar.size() || t.u_bar.size() != trims[0].u_bar.size() ||
            (t.v_bar - trims[0].v_bar).norm() + (t.u_bar - trims[0].u_bar).norm() > tol) {
            throw ValidationError("turnpike: trajectories of one sweep must share the same trim");
        }
    }
    return trims[0];
}

TurnpikeReport turnpike_report(const std::vector<Trajectory>& sweep, const Trim& trim,
                               const TurnpikeOptions& options) {
    if (sweep.empty()) throw ValidationError("turnpike_report: empty sweep");
    if (!(options.nu_bar >= 0.0)) throw ValidationError("turnpike_report: nu_bar must be non-negative");
    for (double e : options.eps_grid) {
        if (!(e >= 0.0)) throw ValidationError("turnpike_report: eps values must be non-negative");
    }

    TurnpikeReport rep;
    rep.trim = trim;
    rep.nu_bar = options.nu_bar;
    rep.delta_exact = options.delta_exact;
    rep.epsilons = options.eps_grid;
    std::sort(rep.epsilons.begin(), rep.epsilons.end());

    for (const Trajectory& traj : sweep) {
        const Vec d = trim_deviation(traj, trim);
        TurnpikeEntry e;
        e.T = traj.horizon();
        for (double eps : rep.epsilons) e.measures.push_back(measure_above(traj.t, d, eps));
        e.exact_measure = measure_above(traj.t, d, options.delta_exact);

        const double lo = traj.t(0) + options.nu_bar;
        const double hi = traj.t(traj.nodes() - 1) - options.nu_bar;
        e.interior_empty = !(hi > lo);
        if (!e.interior_empty) {
            for (Eigen::Index k = 0; k < traj.nodes(); ++k) {
                if (traj.t(k) < lo || traj.t(k) > hi) continue;
                e.max_interior_deviation = std::max(e.max_interior_deviation, d(k));
                if (traj.has_adjoints()) {
                    Vec dl = traj.lambda_v->row(k).transpose();
                    if (trim.lambda_bar && trim.lambda_bar->size() == dl.size()) dl -= *trim.lambda_bar;
                    e.max_interior_adjoint = std::max(e.max_interior_adjoint, dl.norm());
                }
            }
            e.T_times_max_deviation = e.T * e.max_interior_deviation;
            e.T_times_max_adjoint = e.T * e.max_interior_adjoint;
        }
        rep.entries.push_back(std::move(e));
    }
    std::stable_sort(rep.entries.begin(), rep.entries.end(),
                     [](const TurnpikeEntry& a, const TurnpikeEntry& b) { return a.T < b.T; });

    rep.verdict = true;
    for (std::size_t i = 0; i < rep.epsilons.size(); ++i) {
        double nu = 0.0;
        std::optional<std::pair<double, double>> first;
        std::optional<std::pair<double, double>> last;
        for (const TurnpikeEntry& e : rep.entries) {
            const double mu = e.measures[i];
            nu = std::max(nu, mu);
            if (mu >= 0.95 * e.T) continue;
            if (!first) first = {e.T, mu};
            last = {e.T, mu};
        }
        bool bounded = true;
        if (first && last && last->first > first->first) {
            bounded = (last->second - first->second) / (last->first - first->first) <= options.growth_rate;
        }
        rep.nu_of_eps.push_back(nu);
        rep.bounded.push_back(bounded);
        rep.verdict = rep.verdict && bounded;
    }
    validate_measure_table(rep);
    return rep;
}

void validate_measure_table(const TurnpikeReport& report) {
    for (std::size_t i = 1; i < report.epsilons.size(); ++i) {
        if (report.epsilons[i] < report.epsilons[i - 1]) {
            throw ValidationError("measure table: eps grid must be ascending");
        }
    }
    for (const TurnpikeEntry& e : report.entries) {
        if (e.measures.size() != report.epsilons.size()) {
            throw ValidationError("measure table: row length does not match the eps grid");
        }
        for (std::size_t i = 0; i < e.measures.size(); ++i) {
            if (!(e.measures[i] >= 0.0) || e.measures[i] > e.T * (1.0 + 1e-12)) {
                std::ostringstream msg;
                msg << "measure table: measure " << e.measures[i] << " at T = " << e.T << " lies outside [0, T]";
                throw ValidationError(msg.str());
            }
            if (i > 0 && e.measures[i] > e.measures[i - 1]) {
                std::ostringstream msg;
                msg << "measure table: measure increases in eps at T = " << e.T << " (eps " << report.epsilons[i - 1]
                    << " -> " << report.epsilons[i] << ")";
                throw ValidationError(msg.str());
            }
        }
    }
}

StorageSpec StorageSpec::quadratic(Mat P, Vec center) {
    if (P.rows() != P.cols()) throw ValidationError("storage: P must be square");
    if (center.size() != P.rows()) throw ValidationError("storage: center dimension must match P");
    if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + P.cwiseAbs().maxCoeff())) {
        throw ValidationError("storage: P must be symmetric");
    }
    StorageSpec s;
    s.kind = Kind::Quadratic;
    s.P = std::move(P);
    s.center = std::move(center);
    return s;
}

double StorageSpec::evaluate(const Vec& q, const Vec& v) const {
    if (kind == Kind::Zero) return 0.0;
    Vec x(q.size() + v.size());
    x << q, v;
    if (x.size() != P.rows()) throw ValidationError("storage: state dimension does not match P");
    const Vec dx = x - center;
    return 0.5 * dx.dot(P * dx);
}

std::string StorageSpec::describe() const {
    if (kind == Kind::Zero) return "zero";
    std::ostringstream s;
    s << "quadratic(dim=" << P.rows() << ")";
    return s.str();
}

namespace {

struct PrefixData {
    Vec t;
    Vec storage;   // S at nodes
    Vec supply;    // cumulative int w
    Vec penalty;   // cumulative int d^2
};

PrefixData prefix_data(const Trajectory& traj, const Trim& trim, const StageCost& cost, const StorageSpec& storage,
                       std::vector<double>& interval_supply) {
    const Eigen::Index n = traj.nodes();
    const double l_bar = cost.value(trim.v_bar, trim.u_bar);
    const Vec d = trim_deviation(traj, trim);
    PrefixData p;
    p.t = traj.t;
    p.storage.resize(n);
    p.supply.resize(n);
    p.penalty.resize(n);
    Vec w(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        w(k) = cost.value(traj.v.row(k).transpose(), traj.u.row(k).transpose()) - l_bar;
        p.storage(k) = storage.evaluate(traj.q.row(k).transpose(), traj.v.row(k).transpose());
        if (p.storage(k) < -1e-12) {
            std::ostringstream msg;
            msg << "invalid storage: S = " << p.storage(k) << " < 0 at t = " << traj.t(k);
            throw ValidationError(msg.str());
        }
    }
    p.supply(0) = 0.0;
    p.penalty(0) = 0.0;
    interval_supply.clear();
    for (Eigen::Index k = 1; k < n; ++k) {
        const double h = traj.t(k) - traj.t(k - 1);
        const double ws = 0.5 * h * (w(k - 1) + w(k));
        interval_supply.push_back(ws);
        p.supply(k) = p.supply(k - 1) + ws;
        p.penalty(k) = p.penalty(k - 1) + 0.5 * h * (d(k - 1) * d(k - 1) + d(k) * d(k));
    }
    return p;
}

// max over i < j of Q_j - Q_i with Q = S - supply + a penalty.
double worst_margin(const PrefixData& p, double a) {
    double worst = -std::numeric_limits<double>::infinity();
    double run_min = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < p.t.size(); ++k) {
        const double q = p.storage(k) - p.supply(k) + a * p.penalty(k);
        if (k > 0) worst = std::max(worst, q - run_min);
        run_min = std::min(run_min, q);
    }
    return worst;
}

}  // namespace

DissipativityReport check_dissipativity(const std::vector<Trajectory>& trajectories, const Trim& trim,
                                        const StageCost& cost, const StorageSpec& storage,
                                        const DissipativityOptions& options) {
    if (trajectories.empty()) throw ValidationError("check_dissipativity: no trajectories");
    if (storage.kind == StorageSpec::Kind::Quadratic) {
        const Eigen::SelfAdjointEigenSolver<Mat> eig(storage.P, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < -1e-12) {
            throw ValidationError("invalid storage: P is not positive semidefinite, so S takes negative values");
        }
    }
    if (options.alpha_a && !(*options.alpha_a >= 0.0)) {
        throw ValidationError("check_dissipativity: alpha_a must be non-negative");
    }

    DissipativityReport rep;
    rep.storage = storage.describe();
    rep.reach_time_in = options.reach_time_in;
    rep.reach_time_out = options.reach_time_out;

    std::vector<PrefixData> data;
    for (const Trajectory& traj : trajectories) {
        std::vector<double> intervals;
        data.push_back(prefix_data(traj, trim, cost, storage, intervals));
        rep.supply_integrals.push_back(std::move(intervals));
        const PrefixData& p = data.back();
        rep.s_hat = std::max(rep.s_hat, p.storage.maxCoeff());
        rep.cost_bound = std::max(rep.cost_bound, p.supply(p.supply.size() - 1));
    }

    const double tol = options.tolerance;
    const auto feasible = [&](double a) {
        return std::all_of(data.begin(), data.end(), [&](const PrefixData& p) { return worst_margin(p, a) <= tol; });
    };
    if (options.alpha_a) {
        rep.alpha_a = *options.alpha_a;
    } else {
        rep.alpha_fitted = true;
        if (feasible(10.0)) {
            rep.alpha_a = 10.0;
        } else if (!feasible(0.0)) {
            rep.alpha_a = 0.0;
        } else {
            double lo = 0.0;
            double hi = 10.0;
            for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
                const double mid = 0.5 * (lo + hi);
                (feasible(mid) ? lo : hi) = mid;
            }
            rep.alpha_a = lo;
        }
    }

    rep.worst_margin = -std::numeric_limits<double>::infinity();
    rep.worst_strict_margin = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < data.size(); ++r) {
        const PrefixData& p = data[r];
        rep.worst_margin = std::max(rep.worst_margin, worst_margin(p, 0.0));
        rep.worst_strict_margin = std::max(rep.worst_strict_margin, worst_margin(p, rep.alpha_a));
        const Eigen::Index n = p.t.size();
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double plain = (p.storage(j) - p.storage(i)) - (p.supply(j) - p.supply(i));
                const double strict = plain + rep.alpha_a * (p.penalty(j) - p.penalty(i));
                if (plain > tol) {
                    ++rep.violation_count;
                    if (rep.violations.size() < options.max_listed) {
                        rep.violations.push_back({r, p.t(i), p.t(j), plain, false});
                    }
                }
                if (strict > tol) {
                    ++rep.strict_violation_count;
                    if (rep.violations.size() < options.max_listed) {
                        rep.violations.push_back({r, p.t(i), p.t(j), strict, true});
                    }
                }
            }
        }
    }
    rep.dissipative = rep.violation_count == 0;
    rep.strict = rep.alpha_a > 0.0 && rep.strict_violation_count == 0;
    return rep;
}

std::vector<OccupationBoundRow> occupation_bound(const DissipativityReport& report, const std::vector<double>& eps_grid,
                                  const std::vector<Trajectory>& sweep, const Trim* trim) {
    if (!report.strict || !(report.alpha_a > 0.0)) {
        throw DomainError("occupation_bound: no strict dissipativity certificate (alpha_a > 0) is available");
    }
    if (!std::isfinite(report.cost_bound)) throw DomainError("occupation_bound: performance bound is not finite");
    if (!sweep.empty() && trim == nullptr) throw ValidationError("occupation_bound: cross-check needs the trim");

    std::vector<OccupationBoundRow> rows;
    for (double eps : eps_grid) {
        if (!(eps >= 0.0)) throw ValidationError("occupation_bound: eps must be non-negative");
        OccupationBoundRow row;
        row.eps = eps;
        const double alpha = report.alpha_a * eps * eps;
        row.bound = alpha > 0.0 ? (2.0 * report.s_hat + report.cost_bound) / alpha
                                : std::numeric_limits<double>::infinity();
        for (const Trajectory& traj : sweep) row.max_measure = std::max(row.max_measure, theta_measure(traj, *trim, eps));
        row.holds = row.max_measure <= row.bound;
        rows.push_back(row);
    }
    return rows;
}

AdjointIntervalReport adjoint_intervals(const Trajectory& traj, const SystemModel& system, const StageCost& cost,
                                        double tol_const, double tol_zero) {
    traj.validate();
    if (!traj.has_adjoints()) throw ValidationError("adjoint_intervals: trajectory carries no adjoints");
    if (!(tol_const >= 0.0) || !(tol_zero >= 0.0)) throw ValidationError("adjoint_intervals: tolerances must be >= 0");

    AdjointIntervalReport rep;
    rep.tol_const = tol_const;
    rep.tol_zero = tol_zero;
    const Mat& lq = *traj.lambda_q;
    const Mat& lv = *traj.lambda_v;
    const Eigen::Index n = traj.nodes();
    rep.max_abs_lambda_q = lq.size() ? lq.cwiseAbs().maxCoeff() : 0.0;

    const auto qualifies = [&](Eigen::Index k) { return lq.row(k).cwiseAbs().maxCoeff() <= tol_zero; };

    Eigen::Index i = 0;
    while (i < n) {
        if (!qualifies(i)) {
            ++i;
            continue;
        }
        Eigen::RowVectorXd lo = lv.row(i);
        Eigen::RowVectorXd hi = lv.row(i);
        Eigen::Index j = i;
        while (j + 1 < n && qualifies(j + 1)) {
            const Eigen::RowVectorXd nlo = lo.cwiseMin(lv.row(j + 1));
            const Eigen::RowVectorXd nhi = hi.cwiseMax(lv.row(j + 1));
            if ((nhi - nlo).maxCoeff() > tol_const) break;
            lo = nlo;
            hi = nhi;
            ++j;
        }
        if (j > i) {
            AdjointInterval iv;
            iv.t1 = traj.t(i);
            iv.t2 = traj.t(j);
            for (Eigen::Index k = i; k <= j; ++k) {
                const Vec r = steady_kkt_residual(system, cost, traj.v.row(k).transpose(), traj.u.row(k).transpose(),
                                                  lv.row(k).transpose());
                iv.max_kkt_residual = std::max(iv.max_kkt_residual, r.cwiseAbs().maxCoeff());
            }
            iv.kkt_verified = iv.max_kkt_residual <= 10.0 * tol_const;
            rep.intervals.push_back(iv);
        }
        i = j + 1;
    }
    return rep;
}

}  // namespace vturnpike
