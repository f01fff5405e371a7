#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace vturnpike {

/// Forward-mode dual number carrying a dense gradient with respect to all
/// declared variables. A gradient of size zero means "constant".
struct Dual {
    double value = 0.0;
    Eigen::VectorXd grad;

    Dual() = default;
    Dual(double v) : value(v) {}  // NOLINT(google-explicit-constructor)
    Dual(double v, Eigen::VectorXd g) : value(v), grad(std::move(g)) {}

    static Dual variable(double v, Eigen::Index index, Eigen::Index count) {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(count);
        g(index) = 1.0;
        return {v, std::move(g)};
    }

    bool is_constant() const { return grad.size() == 0 || (grad.array() == 0.0).all(); }
};

namespace detail {

// a*ga + b*gb where either gradient may be absent.
inline Eigen::VectorXd combine(double a, const Eigen::VectorXd& ga, double b, const Eigen::VectorXd& gb) {
    if (ga.size() == 0 && gb.size() == 0) return {};
    if (ga.size() == 0) return b * gb;
    if (gb.size() == 0) return a * ga;
    return a * ga + b * gb;
}

inline Eigen::VectorXd scale(double a, const Eigen::VectorXd& g) {
    if (g.size() == 0) return {};
    return a * g;
}

}  // namespace detail

inline Dual operator+(const Dual& x, const Dual& y) {
    return {x.value + y.value, detail::combine(1.0, x.grad, 1.0, y.grad)};
}
inline Dual operator-(const Dual& x, const Dual& y) {
    return {x.value - y.value, detail::combine(1.0, x.grad, -1.0, y.grad)};
}
inline Dual operator-(const Dual& x) { return {-x.value, detail::scale(-1.0, x.grad)}; }
inline Dual operator*(const Dual& x, const Dual& y) {
    return {x.value * y.value, detail::combine(y.value, x.grad, x.value, y.grad)};
}
// Caller is responsible for rejecting y.value == 0.
inline Dual operator/(const Dual& x, const Dual& y) {
    const double q = x.value / y.value;
    return {q, detail::combine(1.0 / y.value, x.grad, -q / y.value, y.grad)};
}

inline Dual sin(const Dual& x) { return {std::sin(x.value), detail::scale(std::cos(x.value), x.grad)}; }
inline Dual cos(const Dual& x) { return {std::cos(x.value), detail::scale(-std::sin(x.value), x.grad)}; }
inline Dual exp(const Dual& x) {
    const double e = std::exp(x.value);
    return {e, detail::scale(e, x.grad)};
}
inline Dual sinh(const Dual& x) { return {std::sinh(x.value), detail::scale(std::cosh(x.value), x.grad)}; }
inline Dual cosh(const Dual& x) { return {std::cosh(x.value), detail::scale(std::sinh(x.value), x.grad)}; }
inline Dual tanh(const Dual& x) {
    const double t = std::tanh(x.value);
    return {t, detail::scale(1.0 - t * t, x.grad)};
}
inline Dual abs(const Dual& x) {
    const double s = x.value > 0.0 ? 1.0 : (x.value < 0.0 ? -1.0 : 0.0);
    return {std::abs(x.value), detail::scale(s, x.grad)};
}

/// x^y. With a constant exponent the power rule is used, so x may be
/// negative or zero; otherwise x must be positive.
inline Dual pow(const Dual& x, const Dual& y) {
    const double p = std::pow(x.value, y.value);
    if (y.is_constant()) {
        const double d = y.value == 0.0 ? 0.0 : y.value * std::pow(x.value, y.value - 1.0);
        return {p, detail::scale(d, x.grad)};
    }
    return {p, detail::combine(y.value * std::pow(x.value, y.value - 1.0), x.grad, p * std::log(x.value), y.grad)};
}

}  // namespace vturnpike
