#include "elmer/baselines.hpp"
#include "elmer/el_core.hpp"
#include "elmer/error.hpp"
#include "elmer/simulation.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <memory>

using namespace elmer;

namespace {

RowMatrix centered_cloud(int n, int q, std::uint64_t seed, double shift = 0.0) {
    elmer::rng::Stream s(seed);
    RowMatrix g(n, q);
    for (int i = 0; i < n; ++i)
        for (int r = 0; r < q; ++r) g(i, r) = s.normal();
    for (int r = 0; r < q; ++r) g.col(r).array() -= g.col(r).mean() - shift;
    return g;
}

std::shared_ptr<const LinearMoments> moments_for(const LongitudinalDataset& ds, const WorkingCovariance& w,
                                                 const Eigen::VectorXd& beta) {
    return std::make_shared<const LinearMoments>(build_moments(ds, reduce_basis(ds, beta, w), w));
}

}  // namespace

TEST_SUITE("el_core") {

TEST_CASE("three-point example against a bracketed root") {
    RowMatrix g(3, 1);
    g << -1.0, 0.5, 0.8;
    const auto sol = solve_lambda(g);
    REQUIRE(sol.converged);
    CHECK_FALSE(sol.hull_failure);

    // Σ g_i / (1 + λ g_i) is decreasing on (−1/0.8, 1)
    auto score = [&](double l) { return -1.0 / (1.0 - l) + 0.5 / (1.0 + 0.5 * l) + 0.8 / (1.0 + 0.8 * l); };
    double lo = -1.25 + 1e-12, hi = 1.0 - 1e-12;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (score(mid) > 0.0 ? lo : hi) = mid;
    }
    const double lambda = 0.5 * (lo + hi);
    const double expected = 2.0 * (std::log(1.0 - lambda) + std::log(1.0 + 0.5 * lambda) + std::log(1.0 + 0.8 * lambda));
    CHECK(sol.lambda(0) == doctest::Approx(lambda).epsilon(1e-9));
    CHECK(sol.neg2logR == doctest::Approx(expected).epsilon(1e-9));
    CHECK(sol.neg2logR == doctest::Approx(test_support::primal_neg2logR(g)).epsilon(1e-8));
}

TEST_CASE("symmetric cloud gives uniform weights") {
    RowMatrix g(4, 2);
    g << -1.0, 2.0, 1.0, -2.0, 3.0, 0.5, -3.0, -0.5;
    const auto sol = solve_lambda(g);
    CHECK(sol.neg2logR == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(sol.lambda.norm() < 1e-12);
    for (int i = 0; i < 4; ++i) CHECK(sol.weights(i) == doctest::Approx(0.25));
}

TEST_CASE("zero outside the hull is reported, not thrown") {
    RowMatrix g(4, 1);
    g << 0.3, 1.0, 2.0, 0.7;
    const auto sol = solve_lambda(g);
    CHECK(sol.hull_failure);
    CHECK(sol.neg2logR == kHullPenalty);
    CHECK(sol.weights.sum() == doctest::Approx(1.0));

    RowMatrix plane(5, 2);
    plane << 1, 1, 2, -1, 0.5, 3, 1.5, 0, 4, -2;  // first coordinate always positive
    CHECK(solve_lambda(plane).hull_failure);
}

TEST_CASE("dual solution matches the primal optimum") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const int n = 4 + static_cast<int>(seed % 9);
        const int q = 1 + static_cast<int>(seed % 2);
        const RowMatrix g = centered_cloud(n, q, 500 + seed, 0.15);
        const double primal = test_support::primal_neg2logR(g);
        const auto sol = solve_lambda(g);
        if (std::isnan(primal)) {
            CHECK(sol.hull_failure);
            continue;
        }
        REQUIRE(sol.converged);
        CHECK(sol.neg2logR == doctest::Approx(primal).epsilon(1e-6));
    }
}

TEST_CASE("weights sum to one and balance the estimating functions") {
    const RowMatrix g = centered_cloud(60, 4, 9, 0.1);
    const auto sol = solve_lambda(g);
    REQUIRE(sol.converged);
    CHECK(sol.weights.minCoeff() > 0.0);
    CHECK(sol.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((g.transpose() * sol.weights).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(sol.neg2logR == doctest::Approx(-2.0 * (60.0 * sol.weights.array()).log().sum()).epsilon(1e-10));
    // a warm start at the answer needs no further steps of note
    const auto again = solve_lambda(g, {}, &sol.lambda);
    CHECK(again.inner_iterations <= 1);
    CHECK(again.neg2logR == doctest::Approx(sol.neg2logR).epsilon(1e-12));
}

TEST_CASE("envelope gradient and exact Hessian against finite differences") {
    const auto sc = preset_scenario("C2", 200);
    const auto ds = generate_dataset(sc, 31);
    const WorkingCovariance w{CovStructure::exchangeable, 1.0, 0.5};
    // tight inner tolerance so that differencing sees the exact multiplier
    ElObjective obj(moments_for(ds, w, sc.beta_true), InnerOptions{1e-14, 100, 1e8});
    for (double shift : {0.0, 0.03, -0.05}) {
        const Eigen::VectorXd beta = sc.beta_true + Eigen::VectorXd::Constant(3, shift);
        Eigen::VectorXd grad;
        obj.value_and_gradient(beta, &grad);
        Eigen::MatrixXd fd(1, 3);
        for (int j = 0; j < 3; ++j) {
            const double h = 1e-6;
            Eigen::VectorXd a = beta, b = beta;
            a(j) += h;
            b(j) -= h;
            fd(0, j) = (obj.value(a) - obj.value(b)) / (2 * h);
        }
        CHECK(test_support::rel_error(grad.transpose(), fd) < 1e-5);

        const auto H = obj.hessian(beta);
        const auto fdh = test_support::numeric_jacobian(
            [&](const Eigen::VectorXd& b) {
                Eigen::VectorXd gr;
                obj.value_and_gradient(b, &gr);
                return gr;
            },
            beta);
        CHECK(test_support::rel_error(H, fdh) < 1e-5);
    }
}

TEST_CASE("error-free duplicated surrogates reduce to GLS") {
    auto base = test_support::random_dataset(120, 2, 4, 41, {0.0, 0.0});
    const auto fit = fit_mele(base);
    REQUIRE(fit.converged);
    CHECK(fit.q() == fit.p());
    CHECK(fit.neg2logR_at_hat == doctest::Approx(0.0).epsilon(1e-8));

    const CovarianceCache cache(fit.working_cov, base);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3, 3);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(3);
    for (int i = 0; i < base.n(); ++i) {
        const auto& X = base.design(i, 0);
        const auto& V = cache.inverse(base.subject(i).visits());
        A += X.transpose() * V * X;
        b += X.transpose() * V * base.subject(i).y;
    }
    const Eigen::VectorXd gls = A.ldlt().solve(b);
    CHECK((fit.beta_hat - gls).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("fit on a simulated design") {
    const auto sc = preset_scenario("C1", 400);
    const auto ds = generate_dataset(sc, 8);
    const auto fit = fit_mele(ds);
    REQUIRE(fit.converged);
    CHECK(fit.q() == 6);
    CHECK(fit.n == 400);
    CHECK(fit.gradient_norm < 1e-4);
    CHECK(fit.neg2logR_at_hat >= 0.0);
    CHECK((fit.beta_hat - sc.beta_true).cwiseAbs().maxCoeff() < 0.2);
    CHECK((fit.asymptotic_cov - fit.asymptotic_cov.transpose()).norm() < 1e-10 * fit.asymptotic_cov.norm());
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(fit.asymptotic_cov).eigenvalues().minCoeff() > 0.0);
    CHECK(fit.working_cov.structure == CovStructure::exchangeable);

    // the returned point minimizes the objective for the final basis and Σ̂
    ElObjective obj(fit.moments);
    const double at = obj.value(fit.beta_hat);
    CHECK(at == doctest::Approx(fit.neg2logR_at_hat).epsilon(1e-9));
    for (int j = 0; j < 3; ++j)
        for (double d : {-1e-3, 1e-3}) {
            Eigen::VectorXd b = fit.beta_hat;
            b(j) += d;
            CHECK(obj.value(b) >= at - 1e-10);
        }
}

TEST_CASE("response scaling carries through to the estimate") {
    const auto ds = generate_dataset(preset_scenario("C2", 300), 12);
    auto subjects = ds.subjects();
    for (auto& s : subjects) s.y *= 3.0;
    const LongitudinalDataset scaled(subjects, ds.layout());
    const auto a = fit_mele(ds);
    const auto b = fit_mele(scaled);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    CHECK((b.beta_hat - 3.0 * a.beta_hat).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(b.neg2logR_at_hat == doctest::Approx(a.neg2logR_at_hat).epsilon(1e-5));
    CHECK(test_support::rel_error(b.asymptotic_cov, 9.0 * a.asymptotic_cov) < 1e-4);
}

TEST_CASE("multiplying the working covariance by a constant leaves -2 log R unchanged") {
    const auto sc = preset_scenario("C3", 150);
    const auto ds = generate_dataset(sc, 5);
    const WorkingCovariance w{CovStructure::exchangeable, 0.9, 0.4};
    const auto basis = reduce_basis(ds, sc.beta_true, w);
    for (double shift : {0.0, 0.02, -0.04}) {
        const Eigen::VectorXd beta = sc.beta_true + Eigen::VectorXd::Constant(3, shift);
        CHECK(neg2_log_R(ds, beta, basis, w.scaled(2.0)) == doctest::Approx(neg2_log_R(ds, beta, basis, w)).epsilon(1e-9));
    }
}

TEST_CASE("minimizer with fixed coordinates") {
    const auto sc = preset_scenario("C1", 250);
    const auto ds = generate_dataset(sc, 19);
    const WorkingCovariance w{CovStructure::exchangeable, 1.0, 0.5};
    ElObjective obj(moments_for(ds, w, sc.beta_true));
    FitConfig cfg;
    const auto full = minimize_el(obj, sc.beta_true, cfg);
    REQUIRE(full.converged);
    Eigen::VectorXd start = sc.beta_true;
    start(1) = 1.05;
    const auto part = minimize_el(obj, start, cfg, {1});
    REQUIRE(part.converged);
    CHECK(part.x(1) == 1.05);
    CHECK(part.value >= full.value - 1e-10);
    // probing the free coordinates does not improve on the constrained optimum
    for (int j : {0, 2})
        for (double d : {-1e-3, 1e-3}) {
            Eigen::VectorXd b = part.x;
            b(j) += d;
            CHECK(obj.value(b) >= part.value - 1e-10);
        }
}

TEST_CASE("configuration validation") {
    FitConfig c;
    CHECK_NOTHROW(c.validate());
    c.inner_tol = 0.0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = FitConfig{};
    c.max_outer = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = FitConfig{};
    c.rank_tol = -1.0;
    CHECK_THROWS_AS(fit_mele(test_support::random_dataset(50, 2, 3, 1), c), ValidationError);
}

}  // TEST_SUITE
