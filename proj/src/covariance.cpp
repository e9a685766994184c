#include "elmer/covariance.hpp"

#include "elmer/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace elmer {

namespace {
constexpr double kRhoMargin = 1e-6;
}

std::string_view to_string(CovStructure s) {
    switch (s) {
        case CovStructure::independence: return "independence";
        case CovStructure::exchangeable: return "exchangeable";
        case CovStructure::ar1: return "ar1";
    }
    return "unknown";
}

CovStructure parse_cov_structure(std::string_view name) {
    if (name == "independence") return CovStructure::independence;
    if (name == "exchangeable") return CovStructure::exchangeable;
    if (name == "ar1") return CovStructure::ar1;
    throw ValidationError("unknown working covariance '" + std::string(name) +
                          "' (expected independence, exchangeable or ar1)");
}

std::pair<double, double> WorkingCovariance::rho_bounds(CovStructure s, int max_visits) {
    switch (s) {
        case CovStructure::exchangeable:
            if (max_visits <= 1) return {-std::numeric_limits<double>::infinity(), 1.0};
            return {-1.0 / (max_visits - 1), 1.0};
        case CovStructure::ar1: return {-1.0, 1.0};
        case CovStructure::independence: break;
    }
    return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
}

MaterializedCovariance materialize(const WorkingCovariance& sigma, int m) {
    if (m < 1) throw DimensionError("materialize: visit count must be positive");
    if (!(sigma.sigma2 > 0.0) || !std::isfinite(sigma.sigma2))
        throw NumericalError("working covariance: sigma2 must be positive and finite");
    MaterializedCovariance out;
    out.matrix = Eigen::MatrixXd::Identity(m, m);
    if (sigma.structure != CovStructure::independence && m > 1) {
        const auto [lo, hi] = WorkingCovariance::rho_bounds(sigma.structure, m);
        if (!(sigma.rho > lo && sigma.rho < hi))
            throw NumericalError("working covariance: rho = " + std::to_string(sigma.rho) +
                                 " is outside the positive-definite region for m = " + std::to_string(m));
        for (int j = 0; j < m; ++j)
            for (int l = 0; l < m; ++l)
                if (j != l)
                    out.matrix(j, l) = sigma.structure == CovStructure::exchangeable
                                           ? sigma.rho
                                           : std::pow(sigma.rho, std::abs(j - l));
    }
    out.matrix *= sigma.sigma2;
    Eigen::LLT<Eigen::MatrixXd> llt(out.matrix);
    if (llt.info() != Eigen::Success) throw NumericalError("working covariance is not positive definite");
    out.inverse = llt.solve(Eigen::MatrixXd::Identity(m, m));
    out.inverse = 0.5 * (out.inverse + out.inverse.transpose()).eval();
    return out;
}

CovarianceCache::CovarianceCache(const WorkingCovariance& sigma, const LongitudinalDataset& ds) : params_(sigma) {
    for (const auto& s : ds.subjects()) {
        const int m = s.visits();
        if (!by_visits_.count(m)) by_visits_.emplace(m, materialize(sigma, m));
    }
}

WorkingCovariance estimate_working_covariance(const LongitudinalDataset& ds, const Eigen::VectorXd& beta,
                                              CovStructure structure) {
    if (beta.size() != ds.p()) throw DimensionError("estimate_working_covariance: beta has wrong length");
    const int N = ds.total_obs();
    if (N <= ds.p())
        throw ValidationError("working covariance: " + std::to_string(N) + " observations leave no degrees of freedom for " +
                              std::to_string(ds.p()) + " coefficients");
    if (structure != CovStructure::independence && ds.max_visits() < 2)
        throw ValidationError("working covariance: every subject has one visit; use independence");

    double ss = 0.0, cross = 0.0;
    long pairs = 0;
    for (int i = 0; i < ds.n(); ++i) {
        const Eigen::VectorXd r = ds.subject(i).y - ds.mean_design(i) * beta;
        ss += r.squaredNorm();
        const auto m = r.size();
        if (structure == CovStructure::exchangeable) {
            const double s = r.sum();
            cross += 0.5 * (s * s - r.squaredNorm());
            pairs += m * (m - 1) / 2;
        } else if (structure == CovStructure::ar1) {
            for (Eigen::Index j = 0; j + 1 < m; ++j) cross += r(j) * r(j + 1);
            pairs += m - 1;
        }
    }
    WorkingCovariance out;
    out.structure = structure;
    out.sigma2 = ss / (N - ds.p());
    if (!(out.sigma2 > 0.0)) throw NumericalError("working covariance: residual variance is zero");
    if (structure == CovStructure::independence) return out;

    // Cross-products standardized by the residual second moment, so identical
    // residuals give rho = 1 before clamping.
    const double second_moment = ss / N;
    double rho = (cross / static_cast<double>(pairs)) / second_moment;
    const auto [lo, hi] = WorkingCovariance::rho_bounds(structure, ds.max_visits());
    rho = std::clamp(rho, lo + kRhoMargin, hi - kRhoMargin);
    out.rho = rho;
    return out;
}

EigenBounds eigen_bounds(const WorkingCovariance& sigma, const LongitudinalDataset& ds) {
    EigenBounds b{std::numeric_limits<double>::infinity(), 0.0};
    std::vector<int> seen;
    for (const auto& s : ds.subjects()) {
        const int m = s.visits();
        if (std::find(seen.begin(), seen.end(), m) != seen.end()) continue;
        seen.push_back(m);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(materialize(sigma, m).matrix, Eigen::EigenvaluesOnly);
        b.min_eigenvalue = std::min(b.min_eigenvalue, es.eigenvalues().minCoeff());
        b.max_eigenvalue = std::max(b.max_eigenvalue, es.eigenvalues().maxCoeff());
    }
    return b;
}

}  // namespace elmer
