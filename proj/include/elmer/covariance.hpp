#pragma once

#include "elmer/dataset.hpp"

#include <Eigen/Dense>

#include <map>
#include <string>
#include <string_view>

namespace elmer {

enum class CovStructure { independence, exchangeable, ar1 };

std::string_view to_string(CovStructure s);
CovStructure parse_cov_structure(std::string_view name);

// Working covariance Σ_i = sigma2 · R(rho), R depending only on the visit count.
struct WorkingCovariance {
    CovStructure structure = CovStructure::independence;
    double sigma2 = 1.0;
    double rho = 0.0;

    // Open interval of admissible rho for visit counts up to max_visits.
    static std::pair<double, double> rho_bounds(CovStructure s, int max_visits);
    WorkingCovariance scaled(double factor) const { return {structure, sigma2 * factor, rho}; }
};

struct MaterializedCovariance {
    Eigen::MatrixXd matrix;
    Eigen::MatrixXd inverse;
};

MaterializedCovariance materialize(const WorkingCovariance& sigma, int m);

// Inverses keyed by visit count, shared by every subject with that m.
class CovarianceCache {
public:
    CovarianceCache(const WorkingCovariance& sigma, const LongitudinalDataset& ds);
    const Eigen::MatrixXd& inverse(int m) const { return by_visits_.at(m).inverse; }
    const Eigen::MatrixXd& matrix(int m) const { return by_visits_.at(m).matrix; }
    const WorkingCovariance& params() const { return params_; }

private:
    WorkingCovariance params_;
    std::map<int, MaterializedCovariance> by_visits_;
};

// Moment estimator on residuals Y_ij − W̄_ijᵀβ built from averaged surrogates.
WorkingCovariance estimate_working_covariance(const LongitudinalDataset& ds, const Eigen::VectorXd& beta,
                                              CovStructure structure);

struct EigenBounds {
    double min_eigenvalue = 0.0;
    double max_eigenvalue = 0.0;
};

// Extreme eigenvalues of Σ_i over every visit count present in the dataset.
EigenBounds eigen_bounds(const WorkingCovariance& sigma, const LongitudinalDataset& ds);

}  // namespace elmer
