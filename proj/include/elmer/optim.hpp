#pragma once

#include <Eigen/Dense>

#include <functional>

namespace elmer {

// Returns f(x); writes the gradient when the pointer is non-null.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct BfgsOptions {
    double step_tol = 1e-8;       // sup-norm of the accepted step
    double objective_tol = 1e-10; // absolute change of f between iterations
    double grad_tol = 1e-9;       // sup-norm of the gradient, relative to 1 + |f|
    int max_iter = 200;
    // Values at or above this are infeasible; the line search backs off them.
    double infeasible_value = 1e10;
};

struct BfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd gradient;
    int iterations = 0;
    bool converged = false;
};

// BFGS with Armijo backtracking on the inverse-Hessian form. inv_hessian0 may
// be empty, in which case a scaled identity is used.
BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, Eigen::MatrixXd inv_hessian0,
                         const BfgsOptions& opts = {});

}  // namespace elmer
