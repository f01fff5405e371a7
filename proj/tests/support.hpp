#pragma once

#include <cmath>
#include <random>
#include <string>

#include "vturnpike/analytic.hpp"
#include "vturnpike/exprlang.hpp"
#include "vturnpike/model.hpp"
#include "vturnpike/ocp.hpp"

namespace testing {

using vturnpike::Mat;
using vturnpike::Vec;

/// Double integrator with l = 1/2 (v^2 + u^2) and the boundary data used
/// throughout the suite: q0 = 0, v0 = 3, qT = 5, vT = 6.
inline vturnpike::OcpSpec reference_spec(double T, int N, double shift = 0.0) {
    return vturnpike::OcpSpec{vturnpike::builtin_system("double_integrator"),
                              vturnpike::quadratic_cost(Mat::Identity(1, 1), Mat::Identity(1, 1)),
                              T,
                              Vec::Constant(1, 0.0 + shift),
                              Vec::Constant(1, 3.0),
                              Vec::Constant(1, 5.0 + shift),
                              Vec::Constant(1, 6.0),
                              N,
                              std::nullopt};
}

inline vturnpike::analytic::Scenario reference_scenario(double T) { return {0.0, 3.0, 5.0, 6.0, T}; }

/// v' = u - c v with l = 1/2 ((v - 2)^2 + u^2).
inline vturnpike::StageCost tracking_cost() {
    return vturnpike::quadratic_cost(Mat::Identity(1, 1), Mat::Identity(1, 1), Vec::Constant(1, 2.0), Vec());
}

/// sup over nodes of |a - b| in the v and u columns.
inline double vu_distance(const vturnpike::Trajectory& a, const vturnpike::Trajectory& b) {
    return std::max((a.v - b.v).cwiseAbs().maxCoeff(), (a.u - b.u).cwiseAbs().maxCoeff());
}

/// Random smooth expression in v[0..n-1], u[0..m-1]. Divisions and powers
/// are built so the result stays finite for moderate arguments.
class ExpressionGenerator {
public:
    ExpressionGenerator(unsigned seed, int n, int m) : rng_(seed), n_(n), m_(m) {}

    std::string operator()(int depth = 4) { return node(depth); }

private:
    int pick(int k) { return std::uniform_int_distribution<int>(0, k - 1)(rng_); }

    std::string number() {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", std::uniform_real_distribution<double>(0.1, 2.0)(rng_));
        return buf;
    }

    std::string leaf() {
        switch (pick(3)) {
            case 0: return "v[" + std::to_string(pick(n_)) + "]";
            case 1: return "u[" + std::to_string(pick(m_)) + "]";
            default: return number();
        }
    }

    std::string node(int depth) {
        if (depth == 0) return leaf();
        const std::string a = node(depth - 1);
        switch (pick(10)) {
            case 0: return "(" + a + " + " + node(depth - 1) + ")";
            case 1: return "(" + a + " - " + node(depth - 1) + ")";
            case 2: return "(" + a + " * " + node(depth - 1) + ")";
            case 3: return "(" + a + " / (2 + sin(" + node(depth - 1) + ")))";
            case 4: return "(1 + (" + a + ")^2)^" + number();
            case 5: return "sin(" + a + ")";
            case 6: return "cos(" + a + ")";
            case 7: return "tanh(" + a + ")";
            case 8: return "exp(0.3*sin(" + a + "))";
            default: return "-" + a;
        }
    }

    std::mt19937 rng_;
    int n_, m_;
};

/// Fourth-order central difference (Richardson on steps h and h/2).
template <class F>
double richardson_derivative(const F& f, double x, double h) {
    const auto d = [&](double s) { return (f(x + s) - f(x - s)) / (2.0 * s); };
    return (4.0 * d(0.5 * h) - d(h)) / 3.0;
}

}  // namespace testing
