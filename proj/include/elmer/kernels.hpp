#pragma once

#include "elmer/moments.hpp"

#include <Eigen/Dense>

// Per-subject accumulation kernels behind every EL evaluation. Each kernel has
// an OpenMP implementation (namespace parallel) and a plain serial reference
// (namespace serial) kept for testing and benchmarking. The OpenMP versions
// reduce over fixed-size row blocks and sum the block partials in order, so
// their output does not depend on the thread count.
namespace elmer::kernels {

// Rows per reduction block in the parallel kernels.
inline constexpr int kBlockRows = 64;

// Smooth pseudo-logarithm: log z for z ≥ eps, quadratic continuation below.
struct LogStar {
    double eps;
    double value(double z) const;
    double d1(double z) const;
    double d2(double z) const;
};

// Dual objective Σ log★(1 + λᵀg_i) with its gradient and negated Hessian.
struct DualTerms {
    double value = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd neg_hessian;
    double min_z = 0.0;
};

// Pieces of the envelope derivatives of 2 Σ log(1 + λᵀg_i(β)) for affine g.
struct EnvelopeTerms {
    Eigen::VectorXd grad_beta;   // Σ −B_iᵀλ / z_i
    Eigen::MatrixXd beta_beta;   // Σ (B_iᵀλ)(B_iᵀλ)ᵀ / z_i²
    Eigen::MatrixXd lambda_beta; // Σ [−B_i / z_i + g_i (B_iᵀλ)ᵀ / z_i²]
    Eigen::MatrixXd lambda_lambda; // Σ g_i g_iᵀ / z_i²
};

namespace serial {
void evaluate(const LinearMoments& m, const Eigen::VectorXd& beta, RowMatrix& g);
DualTerms dual_terms(const RowMatrix& g, const Eigen::VectorXd& lambda, double eps);
double dual_value(const RowMatrix& g, const Eigen::VectorXd& lambda, double eps);
Eigen::MatrixXd gram(const RowMatrix& g);
Eigen::VectorXd envelope_gradient(const LinearMoments& m, const RowMatrix& g, const Eigen::VectorXd& lambda);
EnvelopeTerms envelope_terms(const LinearMoments& m, const RowMatrix& g, const Eigen::VectorXd& lambda);
Eigen::MatrixXd slope_sum(const LinearMoments& m);
}  // namespace serial

namespace parallel {
void evaluate(const LinearMoments& m, const Eigen::VectorXd& beta, RowMatrix& g);
DualTerms dual_terms(const RowMatrix& g, const Eigen::VectorXd& lambda, double eps);
double dual_value(const RowMatrix& g, const Eigen::VectorXd& lambda, double eps);
Eigen::MatrixXd gram(const RowMatrix& g);
Eigen::VectorXd envelope_gradient(const LinearMoments& m, const RowMatrix& g, const Eigen::VectorXd& lambda);
EnvelopeTerms envelope_terms(const LinearMoments& m, const RowMatrix& g, const Eigen::VectorXd& lambda);
Eigen::MatrixXd slope_sum(const LinearMoments& m);
}  // namespace parallel

// The library calls these.
using parallel::dual_terms;
using parallel::dual_value;
using parallel::envelope_gradient;
using parallel::envelope_terms;
using parallel::evaluate;
using parallel::gram;
using parallel::slope_sum;

// Caps OpenMP worker threads for kernels and replication loops (k ≥ 1).
void set_thread_count(int k);
int thread_count();

}  // namespace elmer::kernels
