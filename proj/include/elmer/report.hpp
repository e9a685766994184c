#pragma once

#include "elmer/baselines.hpp"
#include "elmer/dataset.hpp"
#include "elmer/el_core.hpp"
#include "elmer/inference.hpp"
#include "elmer/simulation.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace elmer {

// Method-independent view of a fit for printing.
struct FitSummary {
    Method method = Method::proposed;
    std::vector<std::string> names;
    Eigen::VectorXd beta;
    Eigen::VectorXd se;
    WorkingCovariance working_cov;
    bool converged = false;
    int iterations = 0;
    int n = 0;
    // EL fits only.
    int q = 0;
    double neg2logR = 0.0;
    double gradient_norm = 0.0;
    double gram_condition = 0.0;
    std::vector<std::string> retained;
    std::vector<std::string> dropped_duplicates;
    std::vector<std::string> dropped_dependent;
    std::vector<std::string> warnings;
};

FitSummary summarize(const LongitudinalDataset& ds, const ELFit& fit, Method method);
FitSummary summarize(const LongitudinalDataset& ds, const BaselineFit& fit);

nlohmann::ordered_json to_json(const FitSummary& s);
void write_text(std::ostream& out, const FitSummary& s);

nlohmann::ordered_json to_json(const std::vector<ConfidenceInterval>& cis, const std::vector<std::string>& names);
// Coef, Lower, Upper, CL columns.
void write_ci_table(std::ostream& out, const std::vector<ConfidenceInterval>& cis, const std::vector<std::string>& names);

nlohmann::ordered_json to_json(const std::vector<ReplicateSkewness>& rows, double alpha);
void write_skewness_table(std::ostream& out, const std::vector<ReplicateSkewness>& rows, double alpha);

nlohmann::ordered_json to_json(const StudyReport& report, bool percent_units);

}  // namespace elmer
