#pragma once

#include "elmer/baselines.hpp"
#include "elmer/config.hpp"
#include "elmer/dataset.hpp"
#include "elmer/inference.hpp"
#include "elmer/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace elmer {

struct ErrorDist {
    enum class Kind { normal, student_t, centered_exponential };
    Kind kind = Kind::normal;
    double param = 1.0;  // sd, degrees of freedom, or rate

    static ErrorDist normal(double sd) { return {Kind::normal, sd}; }
    static ErrorDist student_t(double df) { return {Kind::student_t, df}; }
    static ErrorDist centered_exponential(double rate) { return {Kind::centered_exponential, rate}; }

    double sample(rng::Stream& s) const;
    double variance() const;
    void validate() const;
    // normal(0.6), t(4), exp(2)
    std::string describe() const;
};

// Parses the describe() spelling.
ErrorDist parse_error_dist(std::string_view text);

// Y_ij = β0 + β1 X_ij1 + Σ β_{1+l} X_ij,1+l + ε_ij with every X standard
// normal, X_ij1 observed only through W_ij(k) = X_ij1 + ξ_ij(k), and ε_i
// multivariate normal with exchangeable correlation rho and variance sigma_e2.
struct Scenario {
    std::string name = "custom";
    int n = 500;
    int m = 6;
    Eigen::VectorXd beta_true = Eigen::VectorXd::Ones(3);
    double rho = 0.6;
    double sigma_e2 = 0.8;
    std::vector<ErrorDist> error_dists;

    int K() const { return static_cast<int>(error_dists.size()); }
    int p() const { return static_cast<int>(beta_true.size()); }
    void validate() const;
};

// C1 through C4 at the given sample size.
Scenario preset_scenario(std::string_view name, int n = 500);
bool is_preset(std::string_view name);

// Flat key = value file: name, n, m, beta (comma list), rho, sigma_e2,
// errors (comma list of distribution specs). Unknown keys are rejected.
Scenario parse_scenario(std::istream& in);
Scenario read_scenario(const std::filesystem::path& path);

LongitudinalDataset generate_dataset(const Scenario& sc, std::uint64_t seed);

struct MetricRow {
    int coord = 0;
    std::string coef;
    double truth = 0.0;
    double bias = 0.0;
    std::optional<double> sd;  // absent with a single replication
    double mse = 0.0;
    std::optional<double> cp;  // absent when no intervals were built
    std::optional<double> ml;
    int n_estimates = 0;
    int n_intervals = 0;
};

// estimates: reps × p; intervals[j] holds the intervals for coordinate j
// (may be empty).
std::vector<MetricRow> compute_metrics(const Eigen::MatrixXd& estimates,
                                       const std::vector<std::vector<ConfidenceInterval>>& intervals,
                                       const Eigen::VectorXd& truth, const std::vector<std::string>& names);

struct MethodSummary {
    Method method = Method::proposed;
    std::vector<MetricRow> rows;
    int n_success = 0;
    int n_failures = 0;
    double seconds = 0.0;  // summed fit time, not written to the CSV
};

struct StudyOptions {
    std::vector<Method> methods{Method::gee_naive, Method::el_naive, Method::lin, Method::proposed};
    int n_reps = 100;
    std::uint64_t base_seed = 1;
    double level = 0.95;
    bool intervals = true;
    std::vector<int> ci_coords;  // empty means every coefficient
    FitConfig config;
    bool parallel = true;
};

struct StudyReport {
    Scenario scenario;
    StudyOptions options;
    std::vector<MethodSummary> methods;
    std::vector<std::string> warnings;
};

// One replication of one method: estimate and the intervals requested.
struct ReplicateOutcome {
    bool ok = false;
    std::string failure;
    Eigen::VectorXd beta;
    std::vector<ConfidenceInterval> intervals;  // one per requested coordinate
    double seconds = 0.0;
};

ReplicateOutcome run_method(const LongitudinalDataset& ds, Method method, const StudyOptions& options);

StudyReport run_study(const Scenario& sc, const StudyOptions& options);

// scenario,n,method,coef,truth,bias,sd,mse,cp,ml,n_reps,n_failures
void write_study_csv(std::ostream& out, const StudyReport& report, bool percent_units = false);

}  // namespace elmer
