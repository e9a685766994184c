#include "elmer/optim.hpp"

#include <cmath>

namespace elmer {

BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, Eigen::MatrixXd inv_hessian0,
                         const BfgsOptions& opts) {
    const auto dim = x0.size();
    BfgsResult res;
    res.x = std::move(x0);
    res.gradient = Eigen::VectorXd::Zero(dim);
    res.value = f(res.x, &res.gradient);
    if (!(res.value < opts.infeasible_value)) return res;

    const auto identity = [&] {
        const double scale = 1.0 / std::max(1.0, res.gradient.lpNorm<Eigen::Infinity>());
        return Eigen::MatrixXd(scale * Eigen::MatrixXd::Identity(dim, dim));
    };
    bool fresh = inv_hessian0.size() != dim * dim;
    Eigen::MatrixXd H = fresh ? identity() : std::move(inv_hessian0);

    Eigen::VectorXd x_new(dim), g_new(dim);
    for (res.iterations = 0; res.iterations < opts.max_iter; ++res.iterations) {
        if (res.gradient.lpNorm<Eigen::Infinity>() <= opts.grad_tol * (1.0 + std::fabs(res.value))) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd d = -H * res.gradient;
        double slope = res.gradient.dot(d);
        if (!(slope < 0.0)) {
            H = identity();
            fresh = true;
            d = -H * res.gradient;
            slope = res.gradient.dot(d);
        }

        double t = 1.0;
        double f_new = 0.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = res.x + t * d;
            f_new = f(x_new, &g_new);
            if (f_new < opts.infeasible_value && f_new <= res.value + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            if (!fresh) {
                H = identity();
                fresh = true;
                continue;
            }
            // Predicted decrease below rounding: we are at the optimum to working precision.
            res.converged = -slope <= 1e-10 * (1.0 + std::fabs(res.value));
            break;
        }

        const Eigen::VectorXd s = x_new - res.x;
        const Eigen::VectorXd y = g_new - res.gradient;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::VectorXd Hy = H * y;
            // (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ, expanded.
            H += (rho * rho * y.dot(Hy) + rho) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
            fresh = false;
        }
        const double decrease = res.value - f_new;
        res.x = x_new;
        res.value = f_new;
        res.gradient = g_new;
        if (s.lpNorm<Eigen::Infinity>() < opts.step_tol || decrease < opts.objective_tol) {
            ++res.iterations;
            res.converged = true;
            break;
        }
    }
    return res;
}

}  // namespace elmer
