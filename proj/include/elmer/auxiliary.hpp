#pragma once

#include "elmer/covariance.hpp"
#include "elmer/dataset.hpp"

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace elmer {

enum class CoordKind { exact, errorprone };

// One scalar element of the stacked cross-replicate vector: row `coord` of
// W_i(k1)ᵀ Σ_i⁻¹ (Y_i − W_i(k2) β). Indices are 0-based.
struct ElementTag {
    int k1 = 0;
    int k2 = 0;
    int coord = 0;
    CoordKind kind = CoordKind::exact;

    friend bool operator==(const ElementTag&, const ElementTag&) = default;
};

// "(k1,k2,j)" with 1-based indices.
std::string to_string(const ElementTag& tag);

// Replicate pairs in stacking order: (1,2),(2,1),(1,3),(3,1),…,(K−1,K),(K,K−1).
std::vector<std::pair<int, int>> replicate_pairs(int K);

// Every element of the full vector, length K(K−1)p, in stacking order.
std::vector<ElementTag> full_tags(const LongitudinalDataset& ds);

struct AuxiliaryBasis {
    std::vector<ElementTag> retained;
    std::vector<ElementTag> dropped_duplicates;
    std::vector<ElementTag> dropped_dependent;
    double gram_condition = 0.0;

    int q() const { return static_cast<int>(retained.size()); }
    bool same_elements(const AuxiliaryBasis& other) const { return retained == other.retained; }
};

// Full stacked vector for subject i.
Eigen::VectorXd build_full_aux(const LongitudinalDataset& ds, int i, const Eigen::VectorXd& beta,
                               const Eigen::MatrixXd& sigma_inv);

// Structural duplicate removal followed by numeric dependence removal on the
// sample second-moment matrix at beta. Elements are visited in stacking order
// and an element is kept only if its residual pivot, after projecting out the
// elements already kept, exceeds rank_tol on the correlation scale.
AuxiliaryBasis reduce_basis(const LongitudinalDataset& ds, const Eigen::VectorXd& beta,
                            const WorkingCovariance& sigma, double rank_tol = 1e-8);

// Only the structural step; exposed for audit and testing.
std::vector<ElementTag> structural_unique_tags(const LongitudinalDataset& ds, std::vector<ElementTag>* duplicates = nullptr);

Eigen::VectorXd eval_reduced(const LongitudinalDataset& ds, int i, const Eigen::VectorXd& beta,
                             const AuxiliaryBasis& basis, const Eigen::MatrixXd& sigma_inv);

// q × p; constant in beta.
Eigen::MatrixXd jacobian_reduced(const LongitudinalDataset& ds, int i, const Eigen::VectorXd& beta,
                                 const AuxiliaryBasis& basis, const Eigen::MatrixXd& sigma_inv);

}  // namespace elmer
