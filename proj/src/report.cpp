#include "elmer/report.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace elmer {

namespace {

std::vector<std::string> tag_names(const std::vector<ElementTag>& tags) {
    std::vector<std::string> out;
    out.reserve(tags.size());
    for (const auto& t : tags) out.push_back(to_string(t));
    return out;
}

nlohmann::ordered_json cov_json(const WorkingCovariance& w) {
    return {{"structure", std::string(to_string(w.structure))}, {"sigma2", w.sigma2}, {"rho", w.rho}};
}

// JSON has no infinity; unbounded endpoints become null.
nlohmann::ordered_json finite_or_null(double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

FitSummary summarize(const LongitudinalDataset& ds, const ELFit& fit, Method method) {
    FitSummary s;
    s.method = method;
    s.names = ds.coefficient_names();
    s.beta = fit.beta_hat;
    s.se = fit.standard_errors();
    s.working_cov = fit.working_cov;
    s.converged = fit.converged;
    s.iterations = fit.outer_iterations;
    s.n = fit.n;
    s.q = fit.q();
    s.neg2logR = fit.neg2logR_at_hat;
    s.gradient_norm = fit.gradient_norm;
    s.gram_condition = fit.basis.gram_condition;
    s.retained = tag_names(fit.basis.retained);
    s.dropped_duplicates = tag_names(fit.basis.dropped_duplicates);
    s.dropped_dependent = tag_names(fit.basis.dropped_dependent);
    s.warnings = fit.warnings;
    return s;
}

FitSummary summarize(const LongitudinalDataset& ds, const BaselineFit& fit) {
    FitSummary s;
    s.method = fit.method;
    s.names = ds.coefficient_names();
    s.beta = fit.beta_hat;
    s.se = fit.standard_errors();
    s.working_cov = fit.working_cov;
    s.converged = fit.converged;
    s.iterations = fit.iterations;
    s.n = fit.n;
    return s;
}

nlohmann::ordered_json to_json(const FitSummary& s) {
    nlohmann::ordered_json j;
    j["method"] = std::string(to_string(s.method));
    j["converged"] = s.converged;
    j["iterations"] = s.iterations;
    j["n"] = s.n;
    j["working_covariance"] = cov_json(s.working_cov);
    auto& coefs = j["coefficients"] = nlohmann::ordered_json::array();
    for (Eigen::Index k = 0; k < s.beta.size(); ++k)
        coefs.push_back({{"name", s.names[static_cast<std::size_t>(k)]}, {"estimate", s.beta(k)}, {"se", s.se(k)}});
    if (s.method == Method::proposed || s.method == Method::el_naive) {
        j["q"] = s.q;
        j["neg2logR"] = s.neg2logR;
        j["gradient_norm"] = s.gradient_norm;
        if (s.method == Method::proposed)
            j["basis"] = {{"retained", s.retained},
                          {"dropped_duplicates", s.dropped_duplicates},
                          {"dropped_dependent", s.dropped_dependent},
                          {"gram_condition", s.gram_condition}};
    }
    j["warnings"] = s.warnings;
    return j;
}

void write_text(std::ostream& out, const FitSummary& s) {
    std::ostringstream os;
    os << "method: " << to_string(s.method) << "\n";
    os << "converged: " << (s.converged ? "yes" : "no") << " after " << s.iterations << " iterations\n";
    os << "subjects: " << s.n << "\n";
    os << "working covariance: " << to_string(s.working_cov.structure) << " sigma2=" << std::setprecision(6)
       << s.working_cov.sigma2 << " rho=" << s.working_cov.rho << "\n\n";
    os << std::left << std::setw(16) << "Coef" << std::right << std::setw(14) << "Estimate" << std::setw(14) << "SE" << "\n";
    os << std::fixed << std::setprecision(6);
    for (Eigen::Index k = 0; k < s.beta.size(); ++k)
        os << std::left << std::setw(16) << s.names[static_cast<std::size_t>(k)] << std::right << std::setw(14) << s.beta(k)
           << std::setw(14) << s.se(k) << "\n";
    os.unsetf(std::ios::floatfield);
    if (s.method == Method::proposed || s.method == Method::el_naive) {
        os << "\nq: " << s.q << "\n-2 log R at estimate: " << std::setprecision(6) << s.neg2logR << "\n";
        if (s.method == Method::proposed) {
            auto list = [&](const char* label, const std::vector<std::string>& v) {
                os << label << " (" << v.size() << "):";
                for (const auto& t : v) os << ' ' << t;
                os << "\n";
            };
            list("retained", s.retained);
            list("dropped duplicates", s.dropped_duplicates);
            list("dropped dependent", s.dropped_dependent);
            os << "retained Gram condition number: " << s.gram_condition << "\n";
        }
    }
    for (const auto& w : s.warnings) os << "warning: " << w << "\n";
    out << os.str();
}

nlohmann::ordered_json to_json(const std::vector<ConfidenceInterval>& cis, const std::vector<std::string>& names) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& ci : cis)
        arr.push_back({{"coef", names[static_cast<std::size_t>(ci.coord)]},
                       {"estimate", ci.estimate},
                       {"lower", finite_or_null(ci.lower)},
                       {"upper", finite_or_null(ci.upper)},
                       {"level", ci.level},
                       {"method", std::string(to_string(ci.method))},
                       {"lower_unbounded", ci.lower_unbounded},
                       {"upper_unbounded", ci.upper_unbounded}});
    return arr;
}

void write_ci_table(std::ostream& out, const std::vector<ConfidenceInterval>& cis, const std::vector<std::string>& names) {
    std::ostringstream os;
    os << std::left << std::setw(16) << "Coef" << std::right << std::setw(14) << "Lower" << std::setw(14) << "Upper"
       << std::setw(8) << "CL" << "\n";
    for (const auto& ci : cis) {
        os << std::left << std::setw(16) << names[static_cast<std::size_t>(ci.coord)] << std::right << std::fixed
           << std::setprecision(6) << std::setw(14) << ci.lower << std::setw(14) << ci.upper << std::setprecision(2)
           << std::setw(8) << ci.level << "\n";
    }
    out << os.str();
}

nlohmann::ordered_json to_json(const std::vector<ReplicateSkewness>& rows, double alpha) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : rows)
        arr.push_back({{"coordinate", r.coordinate},
                       {"replicate", r.replicate},
                       {"n_obs", r.test.n_obs},
                       {"z", r.test.z_statistic},
                       {"p_value", r.test.p_value},
                       {"asymmetric", r.test.p_value < alpha}});
    return arr;
}

void write_skewness_table(std::ostream& out, const std::vector<ReplicateSkewness>& rows, double alpha) {
    std::ostringstream os;
    os << std::left << std::setw(16) << "Coordinate" << std::right << std::setw(10) << "Replicate" << std::setw(8) << "N"
       << std::setw(12) << "Z" << std::setw(12) << "p-value" << "  Flag\n";
    for (const auto& r : rows)
        os << std::left << std::setw(16) << r.coordinate << std::right << std::setw(10) << r.replicate << std::setw(8)
           << r.test.n_obs << std::fixed << std::setprecision(4) << std::setw(12) << r.test.z_statistic << std::setw(12)
           << r.test.p_value << (r.test.p_value < alpha ? "  *" : "") << "\n";
    out << os.str();
}

nlohmann::ordered_json to_json(const StudyReport& report, bool percent_units) {
    const double scale = percent_units ? 100.0 : 1.0;
    auto opt = [&](const std::optional<double>& v) {
        return v ? nlohmann::ordered_json(*v * scale) : nlohmann::ordered_json(nullptr);
    };
    nlohmann::ordered_json j;
    j["scenario"] = report.scenario.name;
    j["n"] = report.scenario.n;
    j["reps"] = report.options.n_reps;
    j["seed"] = report.options.base_seed;
    j["percent_units"] = percent_units;
    auto& rows = j["rows"] = nlohmann::ordered_json::array();
    for (const auto& s : report.methods)
        for (const auto& r : s.rows)
            rows.push_back({{"method", std::string(to_string(s.method))},
                            {"coef", r.coef},
                            {"truth", r.truth},
                            {"bias", r.bias * scale},
                            {"sd", opt(r.sd)},
                            {"mse", r.mse * scale},
                            {"cp", opt(r.cp)},
                            {"ml", opt(r.ml)},
                            {"n_reps", s.n_success},
                            {"n_failures", s.n_failures}});
    j["warnings"] = report.warnings;
    return j;
}

}  // namespace elmer
