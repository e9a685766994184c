#pragma once

#include "elmer/covariance.hpp"

namespace elmer {

// Tolerances and structure choices shared by every estimator.
struct FitConfig {
    CovStructure working_cov = CovStructure::exchangeable;
    double inner_tol = 1e-10;      // Lagrange multiplier: sup-norm of Σ π_i g_i
    int max_inner = 100;
    double outer_tol = 1e-8;       // sup-norm change of beta between outer iterations
    double objective_tol = 1e-10;  // change of −2 log R between outer iterations
    int max_outer = 50;
    double rank_tol = 1e-8;        // basis reduction pivot threshold
    int max_bfgs = 200;
    double cov_freeze_tol = 1e-6;  // relative change below which Σ̂ is held fixed

    void validate() const;
};

}  // namespace elmer
