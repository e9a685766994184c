#include "elmer/el_core.hpp"

#include "elmer/baselines.hpp"
#include "elmer/error.hpp"
#include "elmer/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace elmer {

void FitConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string("config: ") + name + " must be positive");
    };
    positive(inner_tol, "inner_tol");
    positive(outer_tol, "outer_tol");
    positive(objective_tol, "objective_tol");
    positive(rank_tol, "rank_tol");
    positive(cov_freeze_tol, "cov_freeze_tol");
    if (max_inner < 1) throw ValidationError("config: max_inner must be positive");
    if (max_outer < 1) throw ValidationError("config: max_outer must be positive");
    if (max_bfgs < 1) throw ValidationError("config: max_bfgs must be positive");
}

namespace {

// Solves A x = b for symmetric positive semidefinite A, adding μI with μ
// growing tenfold up to 1e-2·trace when the plain factorization fails.
Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) return llt.solve(b);
    const double trace = std::max(A.trace(), std::numeric_limits<double>::min());
    const auto I = Eigen::MatrixXd::Identity(A.rows(), A.cols());
    for (double mu = 1e-12 * trace; mu <= 1e-2 * trace; mu *= 10.0) {
        llt.compute(A + mu * I);
        if (llt.info() == Eigen::Success) return llt.solve(b);
    }
    throw NumericalError("Lagrange multiplier: Hessian factorization failed after ridge escalation");
}

}  // namespace

LagrangeSolution solve_lambda(const RowMatrix& g, const InnerOptions& opts, const Eigen::VectorXd* start) {
    const auto n = g.rows();
    const auto q = g.cols();
    if (n < 2) throw ValidationError("solve_lambda: at least two rows are required");
    if (!g.allFinite()) throw NumericalError("solve_lambda: non-finite estimating function values");

    LagrangeSolution sol;
    const double eps = 1.0 / static_cast<double>(n);
    const double gmax = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
    const double gscale = std::max(1.0, gmax);
    Eigen::VectorXd lambda = (start && start->size() == q) ? *start : Eigen::VectorXd::Zero(q);

    for (sol.inner_iterations = 0; sol.inner_iterations < opts.max_iter; ++sol.inner_iterations) {
        const auto t = kernels::dual_terms(g, lambda, eps);
        if (t.gradient.lpNorm<Eigen::Infinity>() / static_cast<double>(n) <= opts.tol * gscale) {
            sol.converged = true;
            break;
        }
        const Eigen::VectorXd step = ridge_solve(t.neg_hessian, t.gradient);
        const double decrement = t.gradient.dot(step);
        if (decrement < -1e-12 * (1.0 + std::fabs(t.value)))
            throw NumericalError("solve_lambda: negative Newton decrement");

        // Near the optimum the Armijo gain drops below rounding in the dual
        // value; the slack keeps full steps from being halved into a crawl.
        const double slack = 1e-13 * (1.0 + std::fabs(t.value));
        double size = 1.0;
        bool accepted = false;
        Eigen::VectorXd trial(q);
        for (int ls = 0; ls < 50; ++ls) {
            trial = lambda + size * step;
            if (kernels::dual_value(g, trial, eps) >= t.value + 1e-4 * size * decrement - slack) {
                accepted = true;
                break;
            }
            size *= 0.5;
        }
        if (!accepted) {
            if (decrement <= 1e-14 * (1.0 + std::fabs(t.value))) sol.converged = true;
            else sol.hull_failure = true;
            break;
        }
        lambda = trial;
        if (lambda.lpNorm<Eigen::Infinity>() * gmax > opts.divergence) {
            sol.hull_failure = true;
            break;
        }
    }

    sol.lambda = lambda;
    if (!sol.hull_failure) {
        const Eigen::VectorXd z = Eigen::VectorXd::Ones(n) + g * lambda;
        // A genuine EL solution has every π_i ≤ 1, i.e. z_i ≥ 1/n.
        if (z.minCoeff() < eps * (1.0 - 1e-9)) {
            sol.hull_failure = true;
        } else {
            sol.neg2logR = 2.0 * z.array().log().sum();
            sol.weights = (z * static_cast<double>(n)).cwiseInverse();
        }
    }
    if (sol.hull_failure) {
        sol.converged = false;
        sol.neg2logR = kHullPenalty;
        sol.weights = Eigen::VectorXd::Constant(n, eps);
    }
    return sol;
}

ElObjective::ElObjective(std::shared_ptr<const LinearMoments> moments, InnerOptions opts)
    : moments_(std::move(moments)), opts_(opts) {
    if (!moments_) throw ValidationError("ElObjective: no moments");
}

LagrangeSolution ElObjective::solve(const Eigen::VectorXd& beta) {
    if (beta.size() != moments_->p) throw DimensionError("ElObjective: beta has wrong length");
    kernels::evaluate(*moments_, beta, g_);
    const bool warm = warm_.size() == moments_->q;
    auto sol = solve_lambda(g_, opts_, warm ? &warm_ : nullptr);
    if (sol.hull_failure && warm) sol = solve_lambda(g_, opts_, nullptr);
    if (!sol.hull_failure) warm_ = sol.lambda;
    return sol;
}

double ElObjective::value(const Eigen::VectorXd& beta) { return solve(beta).neg2logR; }

double ElObjective::value_and_gradient(const Eigen::VectorXd& beta, Eigen::VectorXd* grad) {
    const auto sol = solve(beta);
    if (grad) {
        if (sol.hull_failure) *grad = Eigen::VectorXd::Zero(moments_->p);
        else *grad = 2.0 * kernels::envelope_gradient(*moments_, g_, sol.lambda);
    }
    return sol.neg2logR;
}

Eigen::MatrixXd ElObjective::hessian(const Eigen::VectorXd& beta) {
    const auto sol = solve(beta);
    if (sol.hull_failure) return {};
    const auto t = kernels::envelope_terms(*moments_, g_, sol.lambda);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(t.lambda_lambda);
    if (ldlt.info() != Eigen::Success) return {};
    Eigen::MatrixXd h = -2.0 * t.beta_beta + 2.0 * t.lambda_beta.transpose() * ldlt.solve(t.lambda_beta);
    return 0.5 * (h + h.transpose());
}

InnerOptions inner_options(const FitConfig& config) {
    InnerOptions o;
    o.tol = config.inner_tol;
    o.max_iter = config.max_inner;
    return o;
}

BfgsOptions outer_options(const FitConfig& config) {
    BfgsOptions o;
    o.step_tol = config.outer_tol;
    o.objective_tol = config.objective_tol;
    o.max_iter = config.max_bfgs;
    o.infeasible_value = kHullPenalty;
    return o;
}

BfgsResult minimize_el(ElObjective& objective, const Eigen::VectorXd& start, const FitConfig& config,
                       const std::vector<int>& fixed) {
    const int p = static_cast<int>(start.size());
    std::vector<int> free;
    for (int j = 0; j < p; ++j)
        if (std::find(fixed.begin(), fixed.end(), j) == fixed.end()) free.push_back(j);
    const auto nf = static_cast<Eigen::Index>(free.size());

    auto expand = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd beta = start;
        for (Eigen::Index a = 0; a < nf; ++a) beta(free[static_cast<std::size_t>(a)]) = x(a);
        return beta;
    };
    if (nf == 0) {
        BfgsResult r;
        r.x = Eigen::VectorXd(0);
        r.value = objective.value(start);
        r.gradient = Eigen::VectorXd(0);
        r.converged = r.value < kHullPenalty;
        r.x = start;
        return r;
    }

    Eigen::VectorXd x0(nf);
    for (Eigen::Index a = 0; a < nf; ++a) x0(a) = start(free[static_cast<std::size_t>(a)]);
    Eigen::MatrixXd h0;
    if (const Eigen::MatrixXd full = objective.hessian(start); full.size()) {
        Eigen::MatrixXd sub(nf, nf);
        for (Eigen::Index a = 0; a < nf; ++a)
            for (Eigen::Index b = 0; b < nf; ++b)
                sub(a, b) = full(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
        Eigen::LLT<Eigen::MatrixXd> llt(sub);
        if (llt.info() == Eigen::Success) h0 = llt.solve(Eigen::MatrixXd::Identity(nf, nf));
    }

    const Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
        Eigen::VectorXd full_grad;
        const double v = objective.value_and_gradient(expand(x), grad ? &full_grad : nullptr);
        if (grad) {
            grad->resize(nf);
            for (Eigen::Index a = 0; a < nf; ++a) (*grad)(a) = full_grad(free[static_cast<std::size_t>(a)]);
        }
        return v;
    };
    auto res = minimize_bfgs(f, x0, h0, outer_options(config));
    res.x = expand(res.x);
    return res;
}

double neg2_log_R(const LongitudinalDataset& ds, const Eigen::VectorXd& beta, const AuxiliaryBasis& basis,
                  const WorkingCovariance& sigma, const InnerOptions& opts) {
    ElObjective obj(std::make_shared<LinearMoments>(build_moments(ds, basis, sigma)), opts);
    return obj.value(beta);
}

Eigen::MatrixXd el_asymptotic_covariance(const LinearMoments& moments, const Eigen::VectorXd& beta) {
    RowMatrix g;
    kernels::evaluate(moments, beta, g);
    const double n = moments.n;
    const Eigen::MatrixXd L = -kernels::slope_sum(moments) / n;
    const Eigen::MatrixXd M = kernels::gram(g) / n;
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) throw NumericalError("asymptotic covariance: sample second-moment matrix is singular");
    const Eigen::MatrixXd info = L.transpose() * llt.solve(L);
    Eigen::LLT<Eigen::MatrixXd> info_llt(info);
    if (info_llt.info() != Eigen::Success) throw NumericalError("asymptotic covariance: information matrix is singular");
    Eigen::MatrixXd cov = info_llt.solve(Eigen::MatrixXd::Identity(L.cols(), L.cols()));
    return 0.5 * (cov + cov.transpose());
}

void finish_el_fit(ELFit& fit, const Eigen::VectorXd& start) {
    ElObjective obj(fit.moments, inner_options(fit.config));
    const auto res = minimize_el(obj, start, fit.config);
    if (!(res.value < kHullPenalty))
        throw HullFailureError("empirical likelihood is infeasible at the starting value: zero lies outside the convex "
                               "hull of the estimating functions; try a smaller model or more subjects");
    fit.beta_hat = res.x;
    fit.neg2logR_at_hat = res.value;
    fit.gradient_norm = res.gradient.lpNorm<Eigen::Infinity>();
    fit.converged = res.converged;
    fit.lambda_hat = obj.solve(fit.beta_hat).lambda;
    fit.n = fit.moments->n;
    fit.asymptotic_cov = el_asymptotic_covariance(*fit.moments, fit.beta_hat);
}

namespace {

double covariance_change(const WorkingCovariance& a, const WorkingCovariance& b) {
    return std::max(std::fabs(a.sigma2 - b.sigma2) / b.sigma2, std::fabs(a.rho - b.rho));
}

// One run of the alternating loop from beta0; false on infeasibility at the start.
bool alternate(const LongitudinalDataset& ds, const FitConfig& config, const Eigen::VectorXd& beta0, ELFit& fit) {
    Eigen::VectorXd beta = beta0;
    double prev_obj = std::numeric_limits<double>::quiet_NaN();
    bool have_prev = false;
    for (int k = 0; k < config.max_outer; ++k) {
        WorkingCovariance sigma = estimate_working_covariance(ds, beta, config.working_cov);
        if (have_prev && covariance_change(sigma, fit.working_cov) < config.cov_freeze_tol) {
            sigma = fit.working_cov;
        } else {
            AuxiliaryBasis basis = reduce_basis(ds, beta, sigma, config.rank_tol);
            if (have_prev && !basis.same_elements(fit.basis))
                fit.warnings.push_back("outer iteration " + std::to_string(k + 1) + ": retained basis changed (q " +
                                       std::to_string(fit.basis.q()) + " -> " + std::to_string(basis.q()) + ")");
            fit.basis = std::move(basis);
            fit.moments = std::make_shared<LinearMoments>(build_moments(ds, fit.basis, sigma));
            fit.working_cov = sigma;
        }
        if (k == 0) {
            ElObjective probe(fit.moments, inner_options(config));
            if (!(probe.value(beta) < kHullPenalty)) return false;
        }
        try {
            finish_el_fit(fit, beta);
        } catch (const HullFailureError&) {
            return false;
        }
        fit.outer_iterations = k + 1;
        const double step = (fit.beta_hat - beta).lpNorm<Eigen::Infinity>();
        const double change = std::fabs(fit.neg2logR_at_hat - prev_obj);
        beta = fit.beta_hat;
        if (step < config.outer_tol || change < config.objective_tol) return true;
        prev_obj = fit.neg2logR_at_hat;
        have_prev = true;
    }
    fit.converged = false;
    fit.warnings.push_back("outer loop reached " + std::to_string(config.max_outer) + " iterations without converging");
    return true;
}

}  // namespace

ELFit fit_mele(const LongitudinalDataset& ds, const FitConfig& config) {
    config.validate();
    ELFit fit;
    fit.config = config;
    const WorkingCovariance independence{CovStructure::independence, 1.0, 0.0};
    if (alternate(ds, config, lin_solve(ds, independence), fit)) return fit;

    ELFit retry;
    retry.config = config;
    retry.warnings.push_back("infeasible at the working-independence Lin start; restarted from the exchangeable Lin fit");
    FitConfig exch = config;
    exch.working_cov = CovStructure::exchangeable;
    if (alternate(ds, config, fit_lin(ds, exch).beta_hat, retry)) return retry;
    throw HullFailureError("empirical likelihood is infeasible at both Lin starting values: zero lies outside the convex "
                           "hull of the estimating functions; try a smaller model or more subjects");
}

}  // namespace elmer
