#pragma once

#include "elmer/dataset.hpp"
#include "elmer/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace test_support {

// Intercept, p_err error-prone and p_exact_extra exact covariates, all
// standard normal; replicate errors are normal with sd err_sd[k]. Visit counts
// cycle through 1..m_max when ragged is set.
inline elmer::LongitudinalDataset random_dataset(int n, int K, int m_max, std::uint64_t seed,
                                                 std::vector<double> err_sd = {}, int p_err = 1,
                                                 int p_exact_extra = 1, bool ragged = false) {
    if (err_sd.empty()) err_sd.assign(static_cast<std::size_t>(K), 0.6);
    elmer::rng::Stream s(seed);
    elmer::ColumnLayout layout;
    for (int e = 0; e < p_err; ++e) layout.errorprone_names.push_back("w" + std::to_string(e + 1));
    for (int l = 0; l < p_exact_extra; ++l) layout.exact_names.push_back("x" + std::to_string(l + 1));
    std::vector<elmer::SubjectRecord> subjects;
    for (int i = 0; i < n; ++i) {
        const int m = ragged ? 1 + i % m_max : m_max;
        elmer::SubjectRecord r;
        r.subject_id = "s" + std::to_string(i);
        for (int j = 0; j < m; ++j) r.visit_index.push_back(j);
        r.x_exact = Eigen::MatrixXd::Ones(m, 1 + p_exact_extra);
        Eigen::MatrixXd x(m, p_err);
        for (int j = 0; j < m; ++j)
            for (int e = 0; e < p_err; ++e) x(j, e) = s.normal();
        for (int j = 0; j < m; ++j)
            for (int l = 0; l < p_exact_extra; ++l) r.x_exact(j, 1 + l) = s.normal();
        const double u = 0.7 * s.normal();
        r.y.resize(m);
        for (int j = 0; j < m; ++j) r.y(j) = 1.0 + x.row(j).sum() + r.x_exact.row(j).tail(p_exact_extra).sum() + u + 0.6 * s.normal();
        for (int k = 0; k < K; ++k) {
            Eigen::MatrixXd w = x;
            for (int j = 0; j < m; ++j)
                for (int e = 0; e < p_err; ++e) w(j, e) += err_sd[static_cast<std::size_t>(k)] * s.normal();
            r.w_reps.push_back(w);
        }
        subjects.push_back(std::move(r));
    }
    return elmer::LongitudinalDataset(std::move(subjects), layout);
}

// Central differences of f at x with step 1e-6 (1 + |x_j|).
inline Eigen::MatrixXd numeric_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& x) {
    const Eigen::VectorXd f0 = f(x);
    Eigen::MatrixXd J(f0.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = 1e-6 * (1.0 + std::abs(x(j)));
        Eigen::VectorXd a = x, b = x;
        a(j) += h;
        b(j) -= h;
        J.col(j) = (f(a) - f(b)) / (2.0 * h);
    }
    return J;
}

// −2 log R by infeasible-start Newton on the primal problem: maximize
// Σ log π_i subject to Σ π_i = 1 and Σ π_i g_i = 0. Rows of g are the g_i.
// Returns NaN if the iteration does not reach a feasible optimum.
inline double primal_neg2logR(const Eigen::MatrixXd& g, int max_iter = 200) {
    const int n = static_cast<int>(g.rows()), q = static_cast<int>(g.cols());
    Eigen::MatrixXd A(q + 1, n);
    A.row(0).setOnes();
    A.bottomRows(q) = g.transpose();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(q + 1);
    b(0) = 1.0;
    Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / n), nu = Eigen::VectorXd::Zero(q + 1);
    auto residual = [&](const Eigen::VectorXd& xx, const Eigen::VectorXd& vv) {
        Eigen::VectorXd r(n + q + 1);
        r.head(n) = -xx.cwiseInverse() + A.transpose() * vv;
        r.tail(q + 1) = A * xx - b;
        return r;
    };
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd r = residual(x, nu);
        if (r.norm() < 1e-13) break;
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + q + 1, n + q + 1);
        kkt.topLeftCorner(n, n) = x.cwiseAbs2().cwiseInverse().asDiagonal();
        kkt.topRightCorner(n, q + 1) = A.transpose();
        kkt.bottomLeftCorner(q + 1, n) = A;
        Eigen::VectorXd rhs(n + q + 1);
        rhs.head(n) = x.cwiseInverse();
        rhs.tail(q + 1) = b - A * x;
        const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
        const Eigen::VectorXd dx = sol.head(n), dnu = sol.tail(q + 1) - nu;
        double t = 1.0;
        while ((x + t * dx).minCoeff() <= 0.0) t *= 0.5;
        while (residual(x + t * dx, nu + t * dnu).norm() > (1.0 - 0.01 * t) * r.norm() && t > 1e-12) t *= 0.5;
        x += t * dx;
        nu += t * dnu;
    }
    if (residual(x, nu).norm() > 1e-9) return std::numeric_limits<double>::quiet_NaN();
    return -2.0 * (x * n).array().log().sum();
}

inline double rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace test_support
