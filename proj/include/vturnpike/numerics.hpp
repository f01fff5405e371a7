#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace vturnpike {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Dense LU factorization with partial pivoting.
///
/// A pivot whose magnitude falls below `n * eps * max|A_ij|` is treated as
/// zero and reported through SingularityError (with the pivot column).
class LuFactorization {
public:
    explicit LuFactorization(Mat a);

    Vec solve(const Vec& b) const;
    Eigen::Index size() const { return lu_.rows(); }

private:
    Mat lu_;
    std::vector<Eigen::Index> perm_;
};

Vec lu_solve(const Mat& a, const Vec& b);

struct NewtonConfig {
    double tol_residual = 1e-10;
    int max_iter = 100;
    double backtrack = 0.5;
    double armijo = 1e-4;

    void validate() const;
};

struct NewtonResult {
    Vec x;
    int iterations = 0;
    double residual_norm = 0.0;
    std::vector<double> history;  // ||F(x_k)|| for k = 0..iterations
};

using VectorField = std::function<Vec(const Vec&)>;
using JacobianField = std::function<Mat(const Vec&)>;

/// Damped Newton iteration with Armijo backtracking on ||F||^2.
///
/// Throws ConvergenceError when max_iter is exhausted or the line search
/// stalls, SingularityError when the Jacobian cannot be factored.
NewtonResult newton_solve(const VectorField& residual, const JacobianField& jacobian, const Vec& x0,
                          const NewtonConfig& cfg = {});

using OdeRhs = std::function<Vec(double, const Vec&)>;

struct OdeSamples {
    Vec t;                 // steps + 1 uniform nodes
    std::vector<Vec> x;    // state at each node
};

/// One classical Runge-Kutta step of size h from (t, x).
Vec rk4_step(const OdeRhs& rhs, double t, const Vec& x, double h);

/// Fixed-step classical RK4 on [t0, t1]. Non-finite right-hand sides abort
/// the integration with a DomainError carrying the offending time.
OdeSamples rk4_integrate(const OdeRhs& rhs, const Vec& x0, double t0, double t1, int steps);

/// Central-difference Jacobian, step h_j = rel_step * (1 + |x_j|).
Mat central_difference_jacobian(const VectorField& fn, const Vec& x, double rel_step = 1e-6);

/// Nodes t_0 < ... < t_steps evenly spaced on [t0, t1], endpoints exact.
Vec uniform_grid(double t0, double t1, int steps);

}  // namespace vturnpike
