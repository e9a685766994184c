#include "elmer/covariance.hpp"
#include "elmer/error.hpp"
#include "elmer/simulation.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace elmer;

TEST_SUITE("covariance") {

TEST_CASE("materialized matrices") {
    const auto id = materialize({CovStructure::exchangeable, 1.0, 0.0}, 3);
    CHECK((id.matrix - Eigen::MatrixXd::Identity(3, 3)).norm() == 0.0);

    const auto ex = materialize({CovStructure::exchangeable, 0.8, 0.6}, 2);
    CHECK(ex.matrix(0, 0) == doctest::Approx(0.8));
    CHECK(ex.matrix(0, 1) == doctest::Approx(0.48));
    CHECK(ex.matrix(1, 0) == doctest::Approx(0.48));
    CHECK(ex.matrix(1, 1) == doctest::Approx(0.8));

    const auto ar = materialize({CovStructure::ar1, 2.0, 0.5}, 3);
    CHECK(ar.matrix(0, 1) == doctest::Approx(1.0));
    CHECK(ar.matrix(0, 2) == doctest::Approx(0.5));
    CHECK(ar.matrix(1, 2) == doctest::Approx(1.0));

    const auto ind = materialize({CovStructure::independence, 1.7, 0.9}, 4);
    CHECK((ind.matrix - 1.7 * Eigen::MatrixXd::Identity(4, 4)).norm() == 0.0);

    for (const auto& w : {WorkingCovariance{CovStructure::exchangeable, 0.8, 0.6},
                          WorkingCovariance{CovStructure::exchangeable, 1.3, -0.15},
                          WorkingCovariance{CovStructure::ar1, 0.5, -0.7}}) {
        for (int m = 1; m <= 7; ++m) {
            const auto mc = materialize(w, m);
            CHECK((mc.matrix * mc.inverse - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("parameters outside the positive-definite region are rejected") {
    CHECK_THROWS_AS(materialize({CovStructure::exchangeable, 1.0, -0.5}, 4), NumericalError);
    CHECK_THROWS_AS(materialize({CovStructure::exchangeable, 1.0, 1.0}, 2), NumericalError);
    CHECK_THROWS_AS(materialize({CovStructure::ar1, 1.0, -1.0}, 2), NumericalError);
    CHECK_THROWS_AS(materialize({CovStructure::exchangeable, 0.0, 0.1}, 2), NumericalError);
    CHECK_THROWS_AS(parse_cov_structure("unstructured"), ValidationError);
}

TEST_CASE("eigenvalue diagnostic matches the exchangeable closed form") {
    const auto ds = test_support::random_dataset(8, 2, 5, 1, {}, 1, 1, true);
    const WorkingCovariance w{CovStructure::exchangeable, 2.0, 0.3};
    const auto b = eigen_bounds(w, ds);
    // eigenvalues σ²(1 − ρ) and σ²(1 + (m − 1)ρ) over m = 1..5
    CHECK(b.min_eigenvalue == doctest::Approx(2.0 * 0.7));
    CHECK(b.max_eigenvalue == doctest::Approx(2.0 * (1.0 + 4 * 0.3)));
    CHECK(b.min_eigenvalue > 0.0);
}

TEST_CASE("moment estimator by direct pair enumeration") {
    const auto ds = test_support::random_dataset(30, 2, 4, 17, {}, 1, 1, true);
    Eigen::VectorXd beta(3);
    beta << 0.9, 0.7, 1.1;
    double ss = 0.0, ex_cross = 0.0, ar_cross = 0.0;
    int ex_pairs = 0, ar_pairs = 0;
    for (int i = 0; i < ds.n(); ++i) {
        const auto& s = ds.subject(i);
        std::vector<double> r;
        for (int j = 0; j < s.visits(); ++j) {
            const double wbar = 0.5 * (s.w_reps[0](j, 0) + s.w_reps[1](j, 0));
            r.push_back(s.y(j) - beta(0) - beta(1) * wbar - beta(2) * s.x_exact(j, 1));
        }
        for (std::size_t j = 0; j < r.size(); ++j) {
            ss += r[j] * r[j];
            for (std::size_t l = j + 1; l < r.size(); ++l) {
                ex_cross += r[j] * r[l];
                ++ex_pairs;
            }
            if (j + 1 < r.size()) {
                ar_cross += r[j] * r[j + 1];
                ++ar_pairs;
            }
        }
    }
    const int N = ds.total_obs();
    const auto ind = estimate_working_covariance(ds, beta, CovStructure::independence);
    CHECK(ind.sigma2 == doctest::Approx(ss / (N - 3)).epsilon(1e-12));
    const auto ex = estimate_working_covariance(ds, beta, CovStructure::exchangeable);
    CHECK(ex.sigma2 == doctest::Approx(ss / (N - 3)).epsilon(1e-12));
    CHECK(ex.rho == doctest::Approx((ex_cross / ex_pairs) / (ss / N)).epsilon(1e-12));
    const auto ar = estimate_working_covariance(ds, beta, CovStructure::ar1);
    CHECK(ar.rho == doctest::Approx((ar_cross / ar_pairs) / (ss / N)).epsilon(1e-12));
}

TEST_CASE("equal residuals push rho to the upper clamp") {
    std::vector<SubjectRecord> subjects;
    for (int i = 0; i < 2; ++i) {
        SubjectRecord s;
        s.subject_id = std::to_string(i);
        s.visit_index = {1, 2, 3};
        s.y = Eigen::VectorXd::Constant(3, 5.0);
        s.x_exact = Eigen::MatrixXd::Ones(3, 1);
        s.w_reps = {Eigen::MatrixXd::Zero(3, 1), Eigen::MatrixXd::Zero(3, 1)};
        subjects.push_back(s);
    }
    ColumnLayout l;
    l.errorprone_names = {"w"};
    LongitudinalDataset ds(subjects, l);
    const auto ex = estimate_working_covariance(ds, Eigen::VectorXd::Zero(2), CovStructure::exchangeable);
    CHECK(ex.rho == doctest::Approx(1.0 - 1e-6).epsilon(1e-12));
    CHECK_NOTHROW(materialize(ex, 3));
}

TEST_CASE("degenerate inputs") {
    const auto tiny = test_support::random_dataset(1, 2, 3, 3);
    CHECK_THROWS_AS(estimate_working_covariance(tiny, Eigen::VectorXd::Zero(3), CovStructure::independence),
                    ValidationError);
    const auto single = test_support::random_dataset(10, 2, 1, 3);
    CHECK_THROWS_AS(estimate_working_covariance(single, Eigen::VectorXd::Zero(3), CovStructure::exchangeable),
                    ValidationError);
    CHECK_NOTHROW(estimate_working_covariance(single, Eigen::VectorXd::Zero(3), CovStructure::independence));
}

TEST_CASE("averaged-surrogate residual variance on simulated data") {
    // Y − W̄β₀ = ε − β₁ξ̄ with Var(ξ̄) = 0.36 / 2, so the residual variance is
    // 0.8 + 0.18 and the visit-to-visit covariance stays 0.48.
    const auto sc = preset_scenario("C1", 500);
    double s2 = 0.0, rho = 0.0;
    const int reps = 200;
    for (int r = 0; r < reps; ++r) {
        const auto ds = generate_dataset(sc, 1000 + r);
        const auto w = estimate_working_covariance(ds, sc.beta_true, CovStructure::exchangeable);
        s2 += w.sigma2 / reps;
        rho += w.rho / reps;
    }
    CHECK(s2 == doctest::Approx(0.98).epsilon(0.01));
    CHECK(rho == doctest::Approx(0.48 / 0.98).epsilon(0.02));
}

}  // TEST_SUITE
