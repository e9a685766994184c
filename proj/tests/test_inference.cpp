#include "elmer/error.hpp"
#include "elmer/inference.hpp"
#include "elmer/simulation.hpp"
#include "elmer/stats.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace elmer;

namespace {

const ELFit& c2_fit() {
    static const ELFit fit = fit_mele(generate_dataset(preset_scenario("C2", 300), 2024));
    return fit;
}

}  // namespace

TEST_SUITE("inference") {

TEST_CASE("chi-square reference values") {
    // scipy.stats.chi2 / norm
    CHECK(stats::chi2_upper_tail(5.0, 3) == doctest::Approx(0.1717971442967335).epsilon(1e-12));
    CHECK(stats::chi2_quantile(0.95, 1) == doctest::Approx(3.841458820694124).epsilon(1e-12));
    CHECK(stats::chi2_quantile(0.9, 6) == doctest::Approx(10.644640675668422).epsilon(1e-12));
    CHECK(stats::normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(stats::chi2_upper_tail(0.0, 4) == 1.0);
}

TEST_CASE("test results") {
    const auto t = make_test(-1e-12, 2, TestKind::lr_full);
    CHECK(t.statistic == 0.0);
    CHECK(t.p_value == 1.0);
    const auto h = make_test(kHullPenalty, 6, TestKind::full_el);
    CHECK(h.hull_failure);
    CHECK(h.p_value == 0.0);
    CHECK(h.rejects(0.05));
    const auto m = make_test(5.0, 3, TestKind::full_el);
    CHECK(m.p_value == doctest::Approx(0.1717971442967335));
    CHECK_FALSE(m.rejects(0.05));
}

TEST_CASE("statistics at the estimate") {
    const auto& fit = c2_fit();
    REQUIRE(fit.converged);
    const auto pair = test_at(fit, fit.beta_hat);
    CHECK(pair.full_el.df == fit.q());
    CHECK(pair.lr_full.df == fit.p());
    CHECK(pair.full_el.statistic == doctest::Approx(fit.neg2logR_at_hat).epsilon(1e-9));
    CHECK(pair.lr_full.statistic < 1e-8);
    const auto w2 = profile_test(fit, {1}, fit.beta_hat.segment(1, 1));
    CHECK(w2.statistic < 1e-8);
    CHECK(w2.df == 1);
    CHECK(w2.kind == TestKind::lr_profile);
}

TEST_CASE("profile, full likelihood ratio and -2 log R are ordered") {
    const auto& fit = c2_fit();
    elmer::rng::Stream s(3);
    for (int rep = 0; rep < 5; ++rep) {
        Eigen::VectorXd beta0 = fit.beta_hat;
        for (int j = 0; j < 3; ++j) beta0(j) += 0.05 * s.normal();
        const auto pair = test_at(fit, beta0);
        for (int j = 0; j < 3; ++j) {
            const auto w2 = profile_test(fit, {j}, beta0.segment(j, 1));
            CHECK(w2.converged);
            CHECK(w2.statistic <= pair.lr_full.statistic + 1e-7);
        }
        const auto w2pair = profile_test(fit, {0, 2}, Eigen::Vector2d(beta0(0), beta0(2)));
        CHECK(w2pair.df == 2);
        CHECK(w2pair.statistic <= pair.lr_full.statistic + 1e-7);
        CHECK(pair.lr_full.statistic <= pair.full_el.statistic + 1e-9);
        // constraining every coordinate is the full ratio
        const auto all = profile_test(fit, {0, 1, 2}, beta0);
        CHECK(all.statistic == doctest::Approx(pair.lr_full.statistic).epsilon(1e-8));
        CHECK(all.df == 3);

        CHECK(in_region_lr(fit, beta0, 0.95) == !pair.lr_full.rejects(0.05));
        CHECK(in_region_full(fit, beta0, 0.95) == !pair.full_el.rejects(0.05));
    }
}

TEST_CASE("profile test input validation") {
    const auto& fit = c2_fit();
    CHECK_THROWS_AS(profile_test(fit, {}, Eigen::VectorXd()), ValidationError);
    CHECK_THROWS_AS(profile_test(fit, {1, 1}, Eigen::Vector2d(1, 1)), ValidationError);
    CHECK_THROWS_AS(profile_test(fit, {3}, Eigen::VectorXd::Ones(1)), DimensionError);
    CHECK_THROWS_AS(profile_test(fit, {0}, Eigen::Vector2d(1, 1)), DimensionError);
    CHECK_THROWS_AS(test_at(fit, Eigen::VectorXd::Ones(2)), DimensionError);
    CHECK_THROWS_AS(ci_profile(fit, 0, 1.5), ValidationError);
    CHECK_THROWS_AS(ci_profile(fit, 5, 0.95), DimensionError);
}

TEST_CASE("profile intervals invert the chi-square(1) cutoff") {
    const auto& fit = c2_fit();
    for (int j = 0; j < 3; ++j) {
        const auto ci = ci_profile(fit, j, 0.95);
        CHECK(ci.method == CiMethod::profile_el);
        CHECK_FALSE(ci.lower_unbounded);
        CHECK_FALSE(ci.upper_unbounded);
        CHECK(ci.covers(fit.beta_hat(j)));
        const double crit = 3.841458820694124;
        CHECK(profile_test(fit, {j}, Eigen::VectorXd::Constant(1, ci.lower)).statistic == doctest::Approx(crit).epsilon(1e-4));
        CHECK(profile_test(fit, {j}, Eigen::VectorXd::Constant(1, ci.upper)).statistic == doctest::Approx(crit).epsilon(1e-4));

        const auto narrow = ci_profile(fit, j, 0.90);
        const auto wide = ci_profile(fit, j, 0.99);
        CHECK(wide.lower < ci.lower);
        CHECK(ci.lower < narrow.lower);
        CHECK(narrow.upper < ci.upper);
        CHECK(ci.upper < wide.upper);

        // same order of length as the Wald interval
        const auto wald = ci_wald(fit.beta_hat, fit.coef_covariance(), j, 0.95);
        CHECK(ci.length() / wald.length() > 0.7);
        CHECK(ci.length() / wald.length() < 1.3);
    }
}

TEST_CASE("Wald interval arithmetic") {
    Eigen::Vector2d beta(1.0, -2.0);
    Eigen::Matrix2d cov;
    cov << 0.04, 0.01, 0.01, 0.09;
    const auto ci = ci_wald(beta, cov, 1, 0.95);
    CHECK(ci.lower == doctest::Approx(-2.0 - 1.959963984540054 * 0.3));
    CHECK(ci.upper == doctest::Approx(-2.0 + 1.959963984540054 * 0.3));
    CHECK(ci.estimate == -2.0);
    CHECK(ci.method == CiMethod::wald);
}

TEST_CASE("asymptotic covariance equals the GLS sandwich without measurement error") {
    const auto ds = test_support::random_dataset(150, 2, 4, 61, {0.0, 0.0}, 1, 1, true);
    const auto fit = fit_mele(ds);
    REQUIRE(fit.converged);
    REQUIRE(fit.q() == fit.p());
    const CovarianceCache cache(fit.working_cov, ds);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3, 3), B = Eigen::MatrixXd::Zero(3, 3);
    for (int i = 0; i < ds.n(); ++i) {
        const auto& X = ds.design(i, 0);
        const auto& V = cache.inverse(ds.subject(i).visits());
        const Eigen::VectorXd s = X.transpose() * V * (ds.subject(i).y - X * fit.beta_hat);
        A += X.transpose() * V * X;
        B += s * s.transpose();
    }
    A /= ds.n();
    B /= ds.n();
    const Eigen::MatrixXd Ainv = A.inverse();
    const Eigen::MatrixXd sandwich = Ainv * B * Ainv;
    CHECK(test_support::rel_error(fit.asymptotic_cov, sandwich) < 1e-6);
    CHECK(test_support::rel_error(asymptotic_covariance(fit), fit.asymptotic_cov) < 1e-10);
    CHECK(test_support::rel_error(fit.coef_covariance() * ds.n(), sandwich) < 1e-6);
}

}  // TEST_SUITE
