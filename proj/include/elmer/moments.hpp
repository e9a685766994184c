#pragma once

#include "elmer/auxiliary.hpp"
#include "elmer/covariance.hpp"
#include "elmer/dataset.hpp"

#include <Eigen/Dense>

namespace elmer {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Estimating functions that are affine in beta, g_i(β) = a_i − B_i β, stored
// for all subjects at once. Row i of `offsets` is a_i; rows i·q … i·q+q−1 of
// `slopes` form B_i. The Jacobian of g_i is −B_i.
struct LinearMoments {
    int n = 0;
    int q = 0;
    int p = 0;
    RowMatrix offsets;       // n × q
    Eigen::MatrixXd slopes;  // (n·q) × p

    auto slope(int i) const { return slopes.middleRows(static_cast<Eigen::Index>(i) * q, q); }
};

// Reduced cross-replicate functions for the given basis and working covariance.
LinearMoments build_moments(const LongitudinalDataset& ds, const AuxiliaryBasis& basis,
                            const WorkingCovariance& sigma);
// Tag list version used by the basis reduction itself.
LinearMoments build_moments(const LongitudinalDataset& ds, const std::vector<ElementTag>& tags,
                            const CovarianceCache& cache);

// Naive functions W̄_iᵀ Σ_i⁻¹ (Y_i − W̄_i β) on averaged surrogates, q = p.
LinearMoments build_naive_moments(const LongitudinalDataset& ds, const WorkingCovariance& sigma);

}  // namespace elmer
