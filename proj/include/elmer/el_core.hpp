#pragma once

#include "elmer/auxiliary.hpp"
#include "elmer/config.hpp"
#include "elmer/covariance.hpp"
#include "elmer/dataset.hpp"
#include "elmer/moments.hpp"
#include "elmer/optim.hpp"

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <vector>

namespace elmer {

// −2 log R assigned when zero is outside the convex hull of the g_i.
inline constexpr double kHullPenalty = 1e10;

struct InnerOptions {
    double tol = 1e-10;
    int max_iter = 100;
    // ‖λ‖ · max|g| beyond this is treated as divergence (hull failure).
    double divergence = 1e8;
};

struct LagrangeSolution {
    Eigen::VectorXd lambda;
    Eigen::VectorXd weights;  // π_i = 1 / (n (1 + λᵀg_i))
    double neg2logR = 0.0;
    bool converged = false;
    int inner_iterations = 0;
    bool hull_failure = false;
};

// Damped Newton on the concave dual Σ log★(1 + λᵀg_i), log★ continued
// quadratically below 1/n. `start` warm-starts λ.
LagrangeSolution solve_lambda(const RowMatrix& g, const InnerOptions& opts = {},
                              const Eigen::VectorXd* start = nullptr);

// −2 log R(β) over a fixed set of affine estimating functions. Keeps the last
// multiplier as a warm start, so one instance must not be shared across threads.
class ElObjective {
public:
    ElObjective(std::shared_ptr<const LinearMoments> moments, InnerOptions opts = {});

    LagrangeSolution solve(const Eigen::VectorXd& beta);
    double value(const Eigen::VectorXd& beta);
    // Envelope gradient 2 Σ −B_iᵀλ / (1 + λᵀg_i); zero gradient on hull failure.
    double value_and_gradient(const Eigen::VectorXd& beta, Eigen::VectorXd* grad);
    // Exact Hessian of −2 log R(β) through the implicit multiplier.
    Eigen::MatrixXd hessian(const Eigen::VectorXd& beta);

    const LinearMoments& moments() const { return *moments_; }
    std::shared_ptr<const LinearMoments> moments_ptr() const { return moments_; }

private:
    std::shared_ptr<const LinearMoments> moments_;
    InnerOptions opts_;
    RowMatrix g_;
    Eigen::VectorXd warm_;
};

InnerOptions inner_options(const FitConfig& config);
BfgsOptions outer_options(const FitConfig& config);

// Minimizes −2 log R over the coordinates not listed in `fixed`; fixed
// coordinates keep their value from `start`. BFGS is seeded with the inverse
// of the exact Hessian at the start point when it is positive definite.
BfgsResult minimize_el(ElObjective& objective, const Eigen::VectorXd& start, const FitConfig& config,
                       const std::vector<int>& fixed = {});

// −2 log R(β) for the reduced basis under the given working covariance.
double neg2_log_R(const LongitudinalDataset& ds, const Eigen::VectorXd& beta, const AuxiliaryBasis& basis,
                  const WorkingCovariance& sigma, const InnerOptions& opts = {});

// (Lᵀ M⁻¹ L)⁻¹ with L = Σ ∂g_i/∂βᵀ / n and M = Σ g_i g_iᵀ / n at beta: the
// covariance of √n(β̂ − β₀).
Eigen::MatrixXd el_asymptotic_covariance(const LinearMoments& moments, const Eigen::VectorXd& beta);

struct ELFit {
    Eigen::VectorXd beta_hat;
    Eigen::VectorXd lambda_hat;
    AuxiliaryBasis basis;
    WorkingCovariance working_cov;
    double neg2logR_at_hat = 0.0;
    int outer_iterations = 0;
    Eigen::MatrixXd asymptotic_cov;  // √n scale
    bool converged = false;
    double gradient_norm = 0.0;
    int n = 0;
    std::vector<std::string> warnings;
    std::shared_ptr<const LinearMoments> moments;  // g* at the final Σ̂ and basis
    FitConfig config;

    int p() const { return static_cast<int>(beta_hat.size()); }
    int q() const { return moments ? moments->q : 0; }
    Eigen::MatrixXd coef_covariance() const { return asymptotic_cov / n; }
    Eigen::VectorXd standard_errors() const { return coef_covariance().diagonal().cwiseSqrt(); }
};

// Maximum empirical likelihood estimate: Lin start under working independence,
// then alternate Σ̂ re-estimation, basis reduction and BFGS on −2 log R.
ELFit fit_mele(const LongitudinalDataset& ds, const FitConfig& config = {});

// Shared tail of fit_mele and the naive EL baseline: minimize over fixed
// moments and fill in multiplier, objective and covariance.
void finish_el_fit(ELFit& fit, const Eigen::VectorXd& start);

}  // namespace elmer
