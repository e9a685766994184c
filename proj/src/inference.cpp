#include "elmer/inference.hpp"

#include "elmer/error.hpp"
#include "elmer/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace elmer {

std::string_view to_string(TestKind k) {
    switch (k) {
        case TestKind::full_el: return "full_el";
        case TestKind::lr_full: return "lr_full";
        case TestKind::lr_profile: return "lr_profile";
    }
    return "?";
}

std::string_view to_string(CiMethod m) { return m == CiMethod::profile_el ? "profile_el" : "wald"; }

TestResult make_test(double statistic, int df, TestKind kind) {
    TestResult t;
    t.kind = kind;
    t.df = df;
    t.statistic = std::max(0.0, statistic);
    if (statistic >= kHullPenalty) {
        t.statistic = kHullPenalty;
        t.hull_failure = true;
        t.p_value = 0.0;
    } else {
        t.p_value = stats::chi2_upper_tail(t.statistic, df);
    }
    return t;
}

namespace {

void check_point(const ELFit& fit, const Eigen::VectorXd& beta0) {
    if (!fit.moments) throw ValidationError("inference: fit has no estimating functions");
    if (beta0.size() != fit.p()) throw DimensionError("inference: beta0 has wrong length");
}

// Repeated W2 evaluations for one fit, sharing the multiplier warm start.
class Profiler {
public:
    explicit Profiler(const ELFit& fit)
        : fit_(fit), objective_(fit.moments, inner_options(fit.config)) {}

    TestResult test(const std::vector<int>& subset, const Eigen::VectorXd& values) {
        const int p = fit_.p();
        const auto r = static_cast<int>(subset.size());
        Eigen::VectorXd start = fit_.beta_hat;
        Eigen::VectorXd shift(r);
        for (int a = 0; a < r; ++a) {
            start(subset[a]) = values(a);
            shift(a) = values(a) - fit_.beta_hat(subset[a]);
        }
        if (r == p) return make_test(objective_.value(start) - fit_.neg2logR_at_hat, r, TestKind::lr_profile);

        // Conditional mean of the free block under the asymptotic normal law
        // as the starting value.
        std::vector<int> free;
        for (int j = 0; j < p; ++j)
            if (std::find(subset.begin(), subset.end(), j) == subset.end()) free.push_back(j);
        Eigen::VectorXd guess = start;
        if (fit_.asymptotic_cov.rows() == p) {
            Eigen::MatrixXd Css(r, r), Cfs(static_cast<Eigen::Index>(free.size()), r);
            for (int a = 0; a < r; ++a) {
                for (int b = 0; b < r; ++b) Css(a, b) = fit_.asymptotic_cov(subset[a], subset[b]);
                for (std::size_t f = 0; f < free.size(); ++f)
                    Cfs(static_cast<Eigen::Index>(f), a) = fit_.asymptotic_cov(free[f], subset[a]);
            }
            Eigen::LLT<Eigen::MatrixXd> llt(Css);
            if (llt.info() == Eigen::Success) {
                const Eigen::VectorXd adj = Cfs * llt.solve(shift);
                for (std::size_t f = 0; f < free.size(); ++f) guess(free[f]) += adj(static_cast<Eigen::Index>(f));
            }
        }
        if (!(objective_.value(guess) < kHullPenalty)) guess = start;

        const auto res = minimize_el(objective_, guess, fit_.config, subset);
        auto t = make_test(res.value - fit_.neg2logR_at_hat, r, TestKind::lr_profile);
        t.converged = res.converged;
        return t;
    }

private:
    const ELFit& fit_;
    ElObjective objective_;
};

}  // namespace

TestPair test_at(const ELFit& fit, const Eigen::VectorXd& beta0) {
    check_point(fit, beta0);
    ElObjective objective(fit.moments, inner_options(fit.config));
    const double v = objective.value(beta0);
    TestPair out;
    out.full_el = make_test(v, fit.q(), TestKind::full_el);
    out.lr_full = make_test(v >= kHullPenalty ? v : v - fit.neg2logR_at_hat, fit.p(), TestKind::lr_full);
    return out;
}

TestResult profile_test(const ELFit& fit, const std::vector<int>& subset, const Eigen::VectorXd& values) {
    if (!fit.moments) throw ValidationError("inference: fit has no estimating functions");
    if (subset.empty()) throw ValidationError("profile_test: subset is empty");
    if (static_cast<Eigen::Index>(subset.size()) != values.size())
        throw DimensionError("profile_test: subset and values differ in length");
    std::vector<int> sorted = subset;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ValidationError("profile_test: repeated coordinate in subset");
    if (sorted.front() < 0 || sorted.back() >= fit.p())
        throw DimensionError("profile_test: coordinate out of range");
    Profiler prof(fit);
    return prof.test(subset, values);
}

bool in_region_full(const ELFit& fit, const Eigen::VectorXd& beta0, double level) {
    return test_at(fit, beta0).full_el.statistic <= stats::chi2_quantile(level, fit.q());
}

bool in_region_lr(const ELFit& fit, const Eigen::VectorXd& beta0, double level) {
    return test_at(fit, beta0).lr_full.statistic <= stats::chi2_quantile(level, fit.p());
}

ConfidenceInterval ci_wald(const Eigen::VectorXd& beta, const Eigen::MatrixXd& cov, int coord, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
    if (coord < 0 || coord >= beta.size()) throw DimensionError("confidence interval: coordinate out of range");
    ConfidenceInterval ci;
    ci.coord = coord;
    ci.level = level;
    ci.method = CiMethod::wald;
    ci.estimate = beta(coord);
    const double half = stats::normal_quantile(0.5 + level / 2.0) * std::sqrt(std::max(0.0, cov(coord, coord)));
    ci.lower = ci.estimate - half;
    ci.upper = ci.estimate + half;
    return ci;
}

ConfidenceInterval ci_profile(const ELFit& fit, int coord, double level) {
    if (!fit.moments) throw ValidationError("inference: fit has no estimating functions");
    ConfidenceInterval ci = ci_wald(fit.beta_hat, fit.coef_covariance(), coord, level);
    ci.method = CiMethod::profile_el;
    const double crit = stats::chi2_quantile(level, 1);
    const double est = ci.estimate;
    const double tol = 1e-6 * (1.0 + std::fabs(est));
    Profiler prof(fit);
    Eigen::VectorXd value(1);
    // Inside the region when negative; penalty values are outside.
    auto excess = [&](double b) {
        value(0) = b;
        return prof.test({coord}, value).statistic - crit;
    };

    auto endpoint = [&](double wald_end, bool& unbounded) {
        double inside = est;
        double outside = wald_end;
        if (!(std::fabs(outside - est) > tol)) outside = est + (wald_end >= est ? tol : -tol);
        int expansions = 0;
        while (excess(outside) < 0.0) {
            if (expansions == 20) {
                unbounded = true;
                return wald_end >= est ? std::numeric_limits<double>::infinity()
                                       : -std::numeric_limits<double>::infinity();
            }
            inside = outside;
            outside = est + 2.0 * (outside - est);
            ++expansions;
        }
        while (std::fabs(outside - inside) > tol) {
            const double mid = 0.5 * (inside + outside);
            if (excess(mid) < 0.0) inside = mid;
            else outside = mid;
        }
        return 0.5 * (inside + outside);
    };
    ci.lower = endpoint(ci.lower, ci.lower_unbounded);
    ci.upper = endpoint(ci.upper, ci.upper_unbounded);
    return ci;
}

Eigen::MatrixXd asymptotic_covariance(const ELFit& fit) {
    if (!fit.moments) throw ValidationError("inference: fit has no estimating functions");
    return el_asymptotic_covariance(*fit.moments, fit.beta_hat);
}

}  // namespace elmer
