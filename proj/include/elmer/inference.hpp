#pragma once

#include "elmer/el_core.hpp"

#include <Eigen/Dense>

#include <string_view>
#include <vector>

namespace elmer {

enum class TestKind { full_el, lr_full, lr_profile };
std::string_view to_string(TestKind k);

struct TestResult {
    double statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
    TestKind kind = TestKind::full_el;
    bool hull_failure = false;  // statistic is the penalty; counts as a rejection
    bool converged = true;      // constrained re-fit converged (profile tests)

    bool rejects(double alpha) const { return p_value < alpha; }
};

struct TestPair {
    TestResult full_el;  // −2 log R(β₀), df q
    TestResult lr_full;  // W1 = −2 log R(β₀) + 2 log R(β̂), df p
};

TestResult make_test(double statistic, int df, TestKind kind);

TestPair test_at(const ELFit& fit, const Eigen::VectorXd& beta0);

// W2 for H0: β[subset] = values, minimizing over the other coordinates with
// the fit's basis and working covariance held fixed.
TestResult profile_test(const ELFit& fit, const std::vector<int>& subset, const Eigen::VectorXd& values);

// Membership of beta0 in the χ² regions built from −2 log R (q df) and W1 (p df).
bool in_region_full(const ELFit& fit, const Eigen::VectorXd& beta0, double level);
bool in_region_lr(const ELFit& fit, const Eigen::VectorXd& beta0, double level);

enum class CiMethod { profile_el, wald };
std::string_view to_string(CiMethod m);

struct ConfidenceInterval {
    int coord = 0;
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.95;
    CiMethod method = CiMethod::wald;
    bool lower_unbounded = false;
    bool upper_unbounded = false;

    double length() const { return upper - lower; }
    bool covers(double v) const { return lower <= v && v <= upper; }
};

// Inverts W2(b) = χ²_level(1): bracket outward from the Wald endpoint,
// doubling up to 20 times, then bisect to 1e-6 (1 + |β̂_j|).
ConfidenceInterval ci_profile(const ELFit& fit, int coord, double level);

// β̂_j ± z · sqrt(cov_jj), cov being Var(β̂).
ConfidenceInterval ci_wald(const Eigen::VectorXd& beta, const Eigen::MatrixXd& cov, int coord, double level);

// Plug-in (Lᵀ M⁻¹ L)⁻¹ at β̂, the covariance of √n(β̂ − β₀).
Eigen::MatrixXd asymptotic_covariance(const ELFit& fit);

}  // namespace elmer
