#pragma once

#include "elmer/config.hpp"
#include "elmer/covariance.hpp"
#include "elmer/dataset.hpp"
#include "elmer/el_core.hpp"

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace elmer {

enum class Method { proposed, lin, gee_naive, el_naive };

// CLI spelling: proposed, lin, gee-naive, el-naive.
std::string_view to_string(Method m);
Method parse_method(std::string_view name);

struct BaselineFit {
    Method method = Method::lin;
    Eigen::VectorXd beta_hat;
    Eigen::MatrixXd covariance;  // Var(β̂), already divided by n
    WorkingCovariance working_cov;
    bool converged = false;
    int iterations = 0;
    int n = 0;

    Eigen::VectorXd standard_errors() const { return covariance.diagonal().cwiseSqrt(); }
};

// One solve of Σ_i Σ_{k1≠k2} W(k1)ᵀΣ⁻¹W(k2) β = (K−1) Σ_i Σ_k W(k)ᵀΣ⁻¹Y.
Eigen::VectorXd lin_solve(const LongitudinalDataset& ds, const WorkingCovariance& sigma);
// A⁻¹ B A⁻ᵀ for the cross-replicate equation at beta.
Eigen::MatrixXd lin_sandwich(const LongitudinalDataset& ds, const WorkingCovariance& sigma,
                             const Eigen::VectorXd& beta);

// GEE on the replicate averages W̄_i.
Eigen::VectorXd naive_gee_solve(const LongitudinalDataset& ds, const WorkingCovariance& sigma);
Eigen::MatrixXd naive_gee_sandwich(const LongitudinalDataset& ds, const WorkingCovariance& sigma,
                                   const Eigen::VectorXd& beta);

// Both alternate Σ̂ re-estimation with the linear solve until the sup-norm
// change of β drops below config.outer_tol.
BaselineFit fit_lin(const LongitudinalDataset& ds, const FitConfig& config = {});
BaselineFit fit_naive_gee(const LongitudinalDataset& ds, const FitConfig& config = {});

// EL with the q = p naive functions, Σ̂ taken from the naive GEE fit.
ELFit fit_naive_el_full(const LongitudinalDataset& ds, const FitConfig& config = {});
BaselineFit fit_naive_el(const LongitudinalDataset& ds, const FitConfig& config = {});

struct EfficiencyReport {
    Eigen::MatrixXd difference;  // Cov_LIN − Cov_EL
    Eigen::VectorXd eigenvalues; // ascending
    Eigen::MatrixXd eigenvectors;
    double min_eigenvalue = 0.0;
    double tolerance = 0.0;      // −1e-8 · trace(Cov_LIN)
    bool psd = false;
};

EfficiencyReport compare_efficiency(const Eigen::MatrixXd& cov_lin, const Eigen::MatrixXd& cov_el);
EfficiencyReport compare_efficiency(const ELFit& fit_el, const BaselineFit& fit_lin);

}  // namespace elmer
