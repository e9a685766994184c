#include "elmer/moments.hpp"

#include "elmer/error.hpp"

namespace elmer {

LinearMoments build_moments(const LongitudinalDataset& ds, const std::vector<ElementTag>& tags,
                            const CovarianceCache& cache) {
    LinearMoments out;
    out.n = ds.n();
    out.q = static_cast<int>(tags.size());
    out.p = ds.p();
    out.offsets.resize(out.n, out.q);
    out.slopes.resize(static_cast<Eigen::Index>(out.n) * out.q, out.p);
    const int K = ds.K();
    for (const auto& t : tags)
        if (t.k1 < 0 || t.k1 >= K || t.k2 < 0 || t.k2 >= K || t.coord < 0 || t.coord >= ds.p())
            throw DimensionError("element tag " + to_string(t) + " out of range");

#pragma omp parallel for schedule(static) if (out.n > 64)
    for (int i = 0; i < out.n; ++i) {
        const auto& s = ds.subject(i);
        const Eigen::MatrixXd& sinv = cache.inverse(s.visits());
        // weighted[k] = W_i(k)ᵀ Σ_i⁻¹
        std::vector<Eigen::MatrixXd> weighted(static_cast<std::size_t>(K));
        std::vector<Eigen::VectorXd> rhs(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) {
            weighted[static_cast<std::size_t>(k)] = ds.design(i, k).transpose() * sinv;
            rhs[static_cast<std::size_t>(k)] = weighted[static_cast<std::size_t>(k)] * s.y;
        }
        std::vector<Eigen::MatrixXd> cross(static_cast<std::size_t>(K * K));
        for (int r = 0; r < out.q; ++r) {
            const auto& t = tags[static_cast<std::size_t>(r)];
            auto& c = cross[static_cast<std::size_t>(t.k1 * K + t.k2)];
            if (c.size() == 0) c = weighted[static_cast<std::size_t>(t.k1)] * ds.design(i, t.k2);
            out.offsets(i, r) = rhs[static_cast<std::size_t>(t.k1)](t.coord);
            out.slopes.row(static_cast<Eigen::Index>(i) * out.q + r) = c.row(t.coord);
        }
    }
    return out;
}

LinearMoments build_moments(const LongitudinalDataset& ds, const AuxiliaryBasis& basis,
                            const WorkingCovariance& sigma) {
    return build_moments(ds, basis.retained, CovarianceCache(sigma, ds));
}

LinearMoments build_naive_moments(const LongitudinalDataset& ds, const WorkingCovariance& sigma) {
    const CovarianceCache cache(sigma, ds);
    LinearMoments out;
    out.n = ds.n();
    out.q = ds.p();
    out.p = ds.p();
    out.offsets.resize(out.n, out.q);
    out.slopes.resize(static_cast<Eigen::Index>(out.n) * out.q, out.p);
#pragma omp parallel for schedule(static) if (out.n > 64)
    for (int i = 0; i < out.n; ++i) {
        const auto& s = ds.subject(i);
        const Eigen::MatrixXd weighted = ds.mean_design(i).transpose() * cache.inverse(s.visits());
        out.offsets.row(i) = (weighted * s.y).transpose();
        out.slopes.middleRows(static_cast<Eigen::Index>(i) * out.q, out.q) = weighted * ds.mean_design(i);
    }
    return out;
}

}  // namespace elmer
