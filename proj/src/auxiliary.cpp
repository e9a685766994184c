#include "elmer/auxiliary.hpp"

#include "elmer/error.hpp"
#include "elmer/kernels.hpp"
#include "elmer/moments.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace elmer {

std::string to_string(const ElementTag& tag) {
    std::ostringstream os;
    os << '(' << tag.k1 + 1 << ',' << tag.k2 + 1 << ',' << tag.coord + 1 << ')';
    return os.str();
}

std::vector<std::pair<int, int>> replicate_pairs(int K) {
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < K; ++a)
        for (int b = a + 1; b < K; ++b) {
            pairs.emplace_back(a, b);
            pairs.emplace_back(b, a);
        }
    return pairs;
}

std::vector<ElementTag> full_tags(const LongitudinalDataset& ds) {
    std::vector<ElementTag> tags;
    for (auto [k1, k2] : replicate_pairs(ds.K()))
        for (int j = 0; j < ds.p(); ++j)
            tags.push_back({k1, k2, j, ds.is_errorprone_coef(j) ? CoordKind::errorprone : CoordKind::exact});
    return tags;
}

namespace {

void check_inputs(const LongitudinalDataset& ds, int i, const Eigen::VectorXd& beta, const Eigen::MatrixXd& sigma_inv) {
    if (i < 0 || i >= ds.n()) throw DimensionError("subject index out of range");
    const int m = ds.subject(i).visits();
    if (beta.size() != ds.p())
        throw DimensionError("beta has length " + std::to_string(beta.size()) + ", expected " + std::to_string(ds.p()));
    if (sigma_inv.rows() != m || sigma_inv.cols() != m)
        throw DimensionError("sigma_inv is not " + std::to_string(m) + " x " + std::to_string(m));
}

Eigen::Index full_position(const ElementTag& tag, const LongitudinalDataset& ds) {
    const int K = ds.K();
    if (tag.k1 < 0 || tag.k1 >= K || tag.k2 < 0 || tag.k2 >= K || tag.k1 == tag.k2 || tag.coord < 0 ||
        tag.coord >= ds.p())
        throw DimensionError("element tag " + to_string(tag) + " out of range");
    const int a = std::min(tag.k1, tag.k2);
    const int b = std::max(tag.k1, tag.k2);
    // Pairs (a,b) with a < b are enumerated row by row; each contributes two blocks.
    const int before = a * K - a * (a + 1) / 2 + (b - a - 1);
    const int block = 2 * before + (tag.k1 < tag.k2 ? 0 : 1);
    return static_cast<Eigen::Index>(block) * ds.p() + tag.coord;
}

}  // namespace

Eigen::VectorXd build_full_aux(const LongitudinalDataset& ds, int i, const Eigen::VectorXd& beta,
                               const Eigen::MatrixXd& sigma_inv) {
    check_inputs(ds, i, beta, sigma_inv);
    const auto pairs = replicate_pairs(ds.K());
    const int p = ds.p();
    Eigen::VectorXd out(static_cast<Eigen::Index>(pairs.size()) * p);
    const auto& y = ds.subject(i).y;
    for (std::size_t b = 0; b < pairs.size(); ++b) {
        const auto [k1, k2] = pairs[b];
        out.segment(static_cast<Eigen::Index>(b) * p, p) =
            ds.design(i, k1).transpose() * sigma_inv * (y - ds.design(i, k2) * beta);
    }
    return out;
}

std::vector<ElementTag> structural_unique_tags(const LongitudinalDataset& ds, std::vector<ElementTag>* duplicates) {
    // An exact coordinate's row does not depend on k1, so (k1,k2,j) and
    // (k1',k2,j) coincide; the first one in stacking order has the smallest k1.
    std::vector<ElementTag> kept;
    std::map<std::pair<int, int>, bool> seen;  // (k2, coord)
    for (const auto& tag : full_tags(ds)) {
        if (tag.kind == CoordKind::exact) {
            auto [it, inserted] = seen.try_emplace({tag.k2, tag.coord}, true);
            if (!inserted) {
                if (duplicates) duplicates->push_back(tag);
                continue;
            }
        }
        kept.push_back(tag);
    }
    return kept;
}

AuxiliaryBasis reduce_basis(const LongitudinalDataset& ds, const Eigen::VectorXd& beta,
                            const WorkingCovariance& sigma, double rank_tol) {
    if (beta.size() != ds.p()) throw DimensionError("reduce_basis: beta has wrong length");
    if (ds.n() < 2) throw SampleSizeError("reduce_basis: at least two subjects are required");
    AuxiliaryBasis basis;
    const auto candidates = structural_unique_tags(ds, &basis.dropped_duplicates);
    const int qc = static_cast<int>(candidates.size());
    if (ds.n() < qc)
        throw SampleSizeError("reduce_basis: " + std::to_string(ds.n()) + " subjects cannot support a " +
                              std::to_string(qc) + "-element second-moment matrix");

    const CovarianceCache cache(sigma, ds);
    const LinearMoments moments = build_moments(ds, candidates, cache);
    RowMatrix g;
    kernels::evaluate(moments, beta, g);
    const Eigen::MatrixXd gram = kernels::gram(g);
    const Eigen::VectorXd diag = gram.diagonal();
    const double max_diag = diag.maxCoeff();

    // Incremental Cholesky of the correlation-scaled Gram over kept elements.
    std::vector<int> kept;
    Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(qc, qc);
    for (int c = 0; c < qc; ++c) {
        const double dc = diag(c);
        if (!(dc > 1e-24 * max_diag)) {
            basis.dropped_dependent.push_back(candidates[static_cast<std::size_t>(c)]);
            continue;
        }
        const int r = static_cast<int>(kept.size());
        Eigen::VectorXd v(r);
        for (int a = 0; a < r; ++a) {
            const int ka = kept[static_cast<std::size_t>(a)];
            double s = gram(ka, c) / std::sqrt(diag(ka) * dc);
            for (int b = 0; b < a; ++b) s -= chol(a, b) * v(b);
            v(a) = s / chol(a, a);
        }
        const double resid = 1.0 - v.squaredNorm();
        if (resid > rank_tol) {
            chol.row(r).head(r) = v.transpose();
            chol(r, r) = std::sqrt(resid);
            kept.push_back(c);
        } else {
            basis.dropped_dependent.push_back(candidates[static_cast<std::size_t>(c)]);
        }
    }
    for (int c : kept) basis.retained.push_back(candidates[static_cast<std::size_t>(c)]);

    if (basis.q() < ds.p())
        throw IdentifiabilityError("reduce_basis: only " + std::to_string(basis.q()) +
                                   " independent estimating functions for " + std::to_string(ds.p()) + " coefficients");

    Eigen::MatrixXd retained_gram(basis.q(), basis.q());
    for (int a = 0; a < basis.q(); ++a)
        for (int b = 0; b < basis.q(); ++b)
            retained_gram(a, b) = gram(kept[static_cast<std::size_t>(a)], kept[static_cast<std::size_t>(b)]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(retained_gram, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    basis.gram_condition = lo > 0.0 ? es.eigenvalues().maxCoeff() / lo : std::numeric_limits<double>::infinity();
    return basis;
}

Eigen::VectorXd eval_reduced(const LongitudinalDataset& ds, int i, const Eigen::VectorXd& beta,
                             const AuxiliaryBasis& basis, const Eigen::MatrixXd& sigma_inv) {
    const Eigen::VectorXd full = build_full_aux(ds, i, beta, sigma_inv);
    Eigen::VectorXd out(basis.q());
    for (int r = 0; r < basis.q(); ++r) out(r) = full(full_position(basis.retained[static_cast<std::size_t>(r)], ds));
    return out;
}

Eigen::MatrixXd jacobian_reduced(const LongitudinalDataset& ds, int i, const Eigen::VectorXd& beta,
                                 const AuxiliaryBasis& basis, const Eigen::MatrixXd& sigma_inv) {
    check_inputs(ds, i, beta, sigma_inv);
    Eigen::MatrixXd out(basis.q(), ds.p());
    for (int r = 0; r < basis.q(); ++r) {
        const auto& tag = basis.retained[static_cast<std::size_t>(r)];
        full_position(tag, ds);  // range check
        out.row(r) = -(ds.design(i, tag.k1).transpose() * sigma_inv * ds.design(i, tag.k2)).row(tag.coord);
    }
    return out;
}

}  // namespace elmer
