#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace elmer {

// Names of the columns that make up a long-format file and the order in which
// they enter the coefficient vector: intercept, error-prone, then exact.
struct ColumnLayout {
    std::string id_column = "subject";
    std::string visit_column = "visit";
    std::string response_column = "y";
    std::vector<std::string> exact_names;
    std::vector<std::string> errorprone_names;
    // Replicate k (1-based) of error-prone coordinate c lives in column
    // c + replicate_suffix_rule + k, e.g. "SBP_r2".
    std::string replicate_suffix_rule = "_r";
    bool has_intercept = true;

    std::string replicate_column(const std::string& coord, int k) const;
    void validate() const;
};

// Flat key = value text. Keys: id, visit, response, exact, errorprone,
// replicate_suffix, intercept. Lists are comma separated; '#' starts a comment.
ColumnLayout parse_layout(std::istream& in);
ColumnLayout read_layout(const std::filesystem::path& path);

struct SubjectRecord {
    std::string subject_id;
    std::vector<double> visit_index;
    Eigen::VectorXd y;
    Eigen::MatrixXd x_exact;               // m × p_exact, intercept column first
    std::vector<Eigen::MatrixXd> w_reps;   // K matrices, m × p_err

    int visits() const { return static_cast<int>(y.size()); }
};

// Immutable after construction. Validates all invariants and caches the
// per-replicate design matrices W_i(k) = [1 | W_err(k) | X_exact].
class LongitudinalDataset {
public:
    LongitudinalDataset(std::vector<SubjectRecord> subjects, ColumnLayout layout);

    int n() const { return static_cast<int>(subjects_.size()); }
    int K() const { return replicates_; }
    int p() const { return p_exact_ + p_err_; }
    int p_exact() const { return p_exact_; }
    int p_err() const { return p_err_; }
    int total_obs() const { return total_obs_; }
    int max_visits() const { return max_visits_; }

    const ColumnLayout& layout() const { return layout_; }
    const std::vector<SubjectRecord>& subjects() const { return subjects_; }
    const SubjectRecord& subject(int i) const { return subjects_[static_cast<std::size_t>(i)]; }

    // Design matrix of subject i built from replicate k (0-based).
    const Eigen::MatrixXd& design(int i, int k) const;
    // Design built from the replicate average W̄_i.
    const Eigen::MatrixXd& mean_design(int i) const { return mean_designs_[static_cast<std::size_t>(i)]; }

    std::vector<std::string> coefficient_names() const;
    bool is_errorprone_coef(int j) const;

private:
    std::vector<SubjectRecord> subjects_;
    ColumnLayout layout_;
    int replicates_ = 0;
    int p_exact_ = 0;
    int p_err_ = 0;
    int total_obs_ = 0;
    int max_visits_ = 0;
    std::vector<std::vector<Eigen::MatrixXd>> designs_;
    std::vector<Eigen::MatrixXd> mean_designs_;
};

LongitudinalDataset load_csv(std::istream& in, const ColumnLayout& layout);
LongitudinalDataset load_csv(const std::filesystem::path& path, const ColumnLayout& layout);

void write_csv(std::ostream& out, const LongitudinalDataset& ds);
void write_csv(const std::filesystem::path& path, const LongitudinalDataset& ds);

// Subtracts the grand mean of each named column. An error-prone coordinate is
// centered by the pooled mean over all replicates and visits.
LongitudinalDataset center_columns(const LongitudinalDataset& ds,
                                   const std::vector<std::string>& columns);

// W(k) minus the per-observation replicate mean, one value per (subject, visit)
// in dataset order. k is 1-based.
std::vector<double> replicate_centered_difference(const LongitudinalDataset& ds,
                                                  const std::string& coord, int k);

struct SkewnessDiagnostic {
    std::string coordinate;
    double z_statistic = 0.0;
    double p_value = 1.0;
    int n_obs = 0;
};

// D'Agostino's transformation of the sample skewness to an approximate
// standard normal deviate; two-sided p-value. Requires at least 9 values.
SkewnessDiagnostic dagostino_skewness_test(std::span<const double> values);

struct ReplicateSkewness {
    std::string coordinate;
    int replicate = 0;  // 1-based
    SkewnessDiagnostic test;
};

// Skewness test on every replicate-centered difference of every error-prone
// coordinate.
std::vector<ReplicateSkewness> skewness_table(const LongitudinalDataset& ds);

}  // namespace elmer
