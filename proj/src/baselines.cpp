#include "elmer/baselines.hpp"

#include "elmer/error.hpp"
#include "elmer/moments.hpp"

#include <cmath>

namespace elmer {

std::string_view to_string(Method m) {
    switch (m) {
        case Method::proposed: return "proposed";
        case Method::lin: return "lin";
        case Method::gee_naive: return "gee-naive";
        case Method::el_naive: return "el-naive";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    if (name == "proposed") return Method::proposed;
    if (name == "lin") return Method::lin;
    if (name == "gee-naive" || name == "gee_naive") return Method::gee_naive;
    if (name == "el-naive" || name == "el_naive") return Method::el_naive;
    throw ValidationError("method: unknown value '" + std::string(name) + "' (expected proposed, lin, gee-naive, el-naive)");
}

namespace {

struct Normal {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
};

// Σ_{k1≠k2} W(k1)ᵀ Σ⁻¹ W(k2) = SᵀΣ⁻¹S − Σ_k W(k)ᵀΣ⁻¹W(k) with S = Σ_k W(k).
Eigen::MatrixXd lin_slope(const LongitudinalDataset& ds, int i, const Eigen::MatrixXd& vinv) {
    Eigen::MatrixXd S = ds.design(i, 0);
    Eigen::MatrixXd diag = ds.design(i, 0).transpose() * vinv * ds.design(i, 0);
    for (int k = 1; k < ds.K(); ++k) {
        S += ds.design(i, k);
        diag.noalias() += ds.design(i, k).transpose() * vinv * ds.design(i, k);
    }
    return S.transpose() * vinv * S - diag;
}

Eigen::VectorXd lin_offset(const LongitudinalDataset& ds, int i, const Eigen::MatrixXd& vinv) {
    Eigen::MatrixXd S = ds.design(i, 0);
    for (int k = 1; k < ds.K(); ++k) S += ds.design(i, k);
    return (ds.K() - 1) * (S.transpose() * (vinv * ds.subject(i).y));
}

Eigen::VectorXd solve_normal(const Normal& sys, const char* what) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sys.A);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible())
        throw IdentifiabilityError(std::string(what) + ": singular system (collinear covariates or surrogates)");
    return lu.solve(sys.b);
}

Eigen::MatrixXd sandwich(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) throw IdentifiabilityError("sandwich covariance: singular derivative matrix");
    const Eigen::MatrixXd Ainv = lu.inverse();
    Eigen::MatrixXd V = Ainv * B * Ainv.transpose();
    return 0.5 * (V + V.transpose());
}

void require_replicates(const LongitudinalDataset& ds) {
    if (ds.K() < 2) throw ValidationError("Lin estimator: at least two replicates are required");
}

template <class Solve>
BaselineFit alternate(const LongitudinalDataset& ds, const FitConfig& config, Method method, Solve solve) {
    config.validate();
    BaselineFit fit;
    fit.method = method;
    fit.n = ds.n();
    WorkingCovariance sigma{CovStructure::independence, 1.0, 0.0};
    Eigen::VectorXd beta = solve(sigma);
    for (fit.iterations = 1; fit.iterations <= config.max_outer; ++fit.iterations) {
        sigma = estimate_working_covariance(ds, beta, config.working_cov);
        Eigen::VectorXd next = solve(sigma);
        const double step = (next - beta).lpNorm<Eigen::Infinity>();
        beta = std::move(next);
        if (step < config.outer_tol) {
            fit.converged = true;
            break;
        }
    }
    fit.iterations = std::min(fit.iterations, config.max_outer);
    fit.beta_hat = beta;
    fit.working_cov = sigma;
    return fit;
}

}  // namespace

Eigen::VectorXd lin_solve(const LongitudinalDataset& ds, const WorkingCovariance& sigma) {
    require_replicates(ds);
    const CovarianceCache cache(sigma, ds);
    Normal sys{Eigen::MatrixXd::Zero(ds.p(), ds.p()), Eigen::VectorXd::Zero(ds.p())};
    for (int i = 0; i < ds.n(); ++i) {
        const auto& vinv = cache.inverse(ds.subject(i).visits());
        sys.A += lin_slope(ds, i, vinv);
        sys.b += lin_offset(ds, i, vinv);
    }
    return solve_normal(sys, "Lin estimator");
}

Eigen::MatrixXd lin_sandwich(const LongitudinalDataset& ds, const WorkingCovariance& sigma,
                             const Eigen::VectorXd& beta) {
    require_replicates(ds);
    const CovarianceCache cache(sigma, ds);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(ds.p(), ds.p());
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(ds.p(), ds.p());
    for (int i = 0; i < ds.n(); ++i) {
        const auto& vinv = cache.inverse(ds.subject(i).visits());
        const Eigen::MatrixXd slope = lin_slope(ds, i, vinv);
        const Eigen::VectorXd u = lin_offset(ds, i, vinv) - slope * beta;
        A += slope;
        B.noalias() += u * u.transpose();
    }
    return sandwich(A, B);
}

Eigen::VectorXd naive_gee_solve(const LongitudinalDataset& ds, const WorkingCovariance& sigma) {
    const CovarianceCache cache(sigma, ds);
    Normal sys{Eigen::MatrixXd::Zero(ds.p(), ds.p()), Eigen::VectorXd::Zero(ds.p())};
    for (int i = 0; i < ds.n(); ++i) {
        const auto& X = ds.mean_design(i);
        const Eigen::MatrixXd XtV = X.transpose() * cache.inverse(ds.subject(i).visits());
        sys.A.noalias() += XtV * X;
        sys.b.noalias() += XtV * ds.subject(i).y;
    }
    return solve_normal(sys, "naive GEE");
}

Eigen::MatrixXd naive_gee_sandwich(const LongitudinalDataset& ds, const WorkingCovariance& sigma,
                                   const Eigen::VectorXd& beta) {
    const CovarianceCache cache(sigma, ds);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(ds.p(), ds.p());
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(ds.p(), ds.p());
    for (int i = 0; i < ds.n(); ++i) {
        const auto& X = ds.mean_design(i);
        const Eigen::MatrixXd XtV = X.transpose() * cache.inverse(ds.subject(i).visits());
        const Eigen::VectorXd u = XtV * (ds.subject(i).y - X * beta);
        A.noalias() += XtV * X;
        B.noalias() += u * u.transpose();
    }
    return sandwich(A, B);
}

BaselineFit fit_lin(const LongitudinalDataset& ds, const FitConfig& config) {
    auto fit = alternate(ds, config, Method::lin, [&](const WorkingCovariance& s) { return lin_solve(ds, s); });
    fit.covariance = lin_sandwich(ds, fit.working_cov, fit.beta_hat);
    return fit;
}

BaselineFit fit_naive_gee(const LongitudinalDataset& ds, const FitConfig& config) {
    auto fit = alternate(ds, config, Method::gee_naive,
                         [&](const WorkingCovariance& s) { return naive_gee_solve(ds, s); });
    fit.covariance = naive_gee_sandwich(ds, fit.working_cov, fit.beta_hat);
    return fit;
}

ELFit fit_naive_el_full(const LongitudinalDataset& ds, const FitConfig& config) {
    const BaselineFit gee = fit_naive_gee(ds, config);
    ELFit fit;
    fit.config = config;
    fit.working_cov = gee.working_cov;
    fit.moments = std::make_shared<LinearMoments>(build_naive_moments(ds, gee.working_cov));
    finish_el_fit(fit, gee.beta_hat);
    fit.outer_iterations = gee.iterations;
    fit.converged = fit.converged && gee.converged;
    return fit;
}

BaselineFit fit_naive_el(const LongitudinalDataset& ds, const FitConfig& config) {
    const ELFit el = fit_naive_el_full(ds, config);
    BaselineFit fit;
    fit.method = Method::el_naive;
    fit.beta_hat = el.beta_hat;
    fit.covariance = el.coef_covariance();
    fit.working_cov = el.working_cov;
    fit.converged = el.converged;
    fit.iterations = el.outer_iterations;
    fit.n = el.n;
    return fit;
}

EfficiencyReport compare_efficiency(const Eigen::MatrixXd& cov_lin, const Eigen::MatrixXd& cov_el) {
    if (cov_lin.rows() != cov_el.rows() || cov_lin.cols() != cov_el.cols() || cov_lin.rows() != cov_lin.cols())
        throw DimensionError("compare_efficiency: covariance matrices differ in shape");
    EfficiencyReport r;
    r.difference = cov_lin - cov_el;
    r.difference = 0.5 * (r.difference + r.difference.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r.difference);
    r.eigenvalues = eig.eigenvalues();
    r.eigenvectors = eig.eigenvectors();
    r.min_eigenvalue = r.eigenvalues.size() ? r.eigenvalues(0) : 0.0;
    r.tolerance = -1e-8 * cov_lin.trace();
    r.psd = r.min_eigenvalue >= r.tolerance;
    return r;
}

EfficiencyReport compare_efficiency(const ELFit& fit_el, const BaselineFit& fit_lin) {
    return compare_efficiency(fit_lin.covariance, fit_el.coef_covariance());
}

}  // namespace elmer
