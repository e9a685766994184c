#include "elmer/simulation.hpp"

#include "elmer/error.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace elmer {

namespace rng {

Stream::Stream(std::uint64_t seed) {
    std::uint64_t s = seed;
    engine_.seed(splitmix64(s));
}

double Stream::uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

double Stream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * M_PI * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

double Stream::gamma(double shape) {
    if (shape < 1.0) return gamma(shape + 1.0) * std::pow(uniform(), 1.0 / shape);
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform();
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
}

double Stream::chi_square(double df) {
    if (df == std::floor(df) && df <= 100.0) {
        double s = 0.0;
        for (int k = 0; k < static_cast<int>(df); ++k) {
            const double z = normal();
            s += z * z;
        }
        return s;
    }
    return 2.0 * gamma(df / 2.0);
}

double Stream::student_t(double df) {
    const double z = normal();
    return z / std::sqrt(chi_square(df) / df);
}

double Stream::exponential(double rate) { return -std::log(uniform()) / rate; }

}  // namespace rng

double ErrorDist::sample(rng::Stream& s) const {
    switch (kind) {
        case Kind::normal: return param * s.normal();
        case Kind::student_t: return s.student_t(param);
        case Kind::centered_exponential: return s.exponential(param) - 1.0 / param;
    }
    return 0.0;
}

double ErrorDist::variance() const {
    switch (kind) {
        case Kind::normal: return param * param;
        case Kind::student_t: return param > 2.0 ? param / (param - 2.0) : std::numeric_limits<double>::infinity();
        case Kind::centered_exponential: return 1.0 / (param * param);
    }
    return 0.0;
}

void ErrorDist::validate() const {
    const bool ok = kind == Kind::normal ? param >= 0.0 : param > 0.0;
    if (!ok || !std::isfinite(param)) throw ValidationError("error distribution " + describe() + ": invalid parameter");
}

std::string ErrorDist::describe() const {
    std::ostringstream os;
    os << (kind == Kind::normal ? "normal" : kind == Kind::student_t ? "t" : "exp") << '(' << param << ')';
    return os.str();
}

ErrorDist parse_error_dist(std::string_view text) {
    const auto open = text.find('(');
    const auto close = text.rfind(')');
    if (open == std::string_view::npos || close != text.size() - 1 || close < open)
        throw ValidationError("error distribution '" + std::string(text) + "': expected name(parameter)");
    const std::string name(text.substr(0, open));
    const std::string arg(text.substr(open + 1, close - open - 1));
    double v = 0.0;
    try {
        std::size_t used = 0;
        v = std::stod(arg, &used);
        if (used != arg.size()) throw std::invalid_argument(arg);
    } catch (const std::exception&) {
        throw ValidationError("error distribution '" + std::string(text) + "': bad parameter");
    }
    ErrorDist d;
    if (name == "normal") d = ErrorDist::normal(v);
    else if (name == "t") d = ErrorDist::student_t(v);
    else if (name == "exp") d = ErrorDist::centered_exponential(v);
    else throw ValidationError("error distribution '" + std::string(text) + "': unknown family (normal, t, exp)");
    d.validate();
    return d;
}

void Scenario::validate() const {
    if (n < 2) throw ValidationError("scenario " + name + ": n must be at least 2");
    if (m < 1) throw ValidationError("scenario " + name + ": m must be at least 1");
    if (beta_true.size() < 2) throw ValidationError("scenario " + name + ": beta needs an intercept and an error-prone slope");
    if (!(sigma_e2 > 0.0)) throw ValidationError("scenario " + name + ": sigma_e2 must be positive");
    const double lo = m > 1 ? -1.0 / (m - 1) : -1.0;
    if (!(rho > lo && rho < 1.0)) throw ValidationError("scenario " + name + ": rho outside the exchangeable range");
    if (K() < 2) throw ValidationError("scenario " + name + ": at least two replicate error distributions are required");
    for (const auto& d : error_dists) d.validate();
}

bool is_preset(std::string_view name) { return name == "C1" || name == "C2" || name == "C3" || name == "C4"; }

Scenario preset_scenario(std::string_view name, int n) {
    Scenario sc;
    sc.name = std::string(name);
    sc.n = n;
    const auto base = ErrorDist::normal(0.6);
    if (name == "C1") sc.error_dists = {base, base};
    else if (name == "C2") sc.error_dists = {base, ErrorDist::student_t(4)};
    else if (name == "C3") sc.error_dists = {base, base, base};
    else if (name == "C4") sc.error_dists = {base, ErrorDist::student_t(4), ErrorDist::centered_exponential(2)};
    else throw ValidationError("scenario: unknown preset '" + std::string(name) + "' (C1, C2, C3, C4)");
    return sc;
}

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    int depth = 0;
    for (char c : s) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == ',' && depth == 0) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty()) out.push_back(trim(cur));
    return out;
}

double parse_number(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ValidationError("scenario: key '" + key + "' has non-numeric value '" + v + "'");
    }
}

int parse_int(const std::string& key, const std::string& v) {
    const double d = parse_number(key, v);
    if (d != std::floor(d)) throw ValidationError("scenario: key '" + key + "' must be an integer");
    return static_cast<int>(d);
}

}  // namespace

Scenario parse_scenario(std::istream& in) {
    Scenario sc;
    sc.error_dists.clear();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("scenario line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "name") sc.name = val;
        else if (key == "n") sc.n = parse_int(key, val);
        else if (key == "m") sc.m = parse_int(key, val);
        else if (key == "rho") sc.rho = parse_number(key, val);
        else if (key == "sigma_e2") sc.sigma_e2 = parse_number(key, val);
        else if (key == "beta") {
            const auto parts = split_list(val);
            sc.beta_true.resize(static_cast<Eigen::Index>(parts.size()));
            for (std::size_t j = 0; j < parts.size(); ++j) sc.beta_true(static_cast<Eigen::Index>(j)) = parse_number(key, parts[j]);
        } else if (key == "errors") {
            for (const auto& part : split_list(val)) sc.error_dists.push_back(parse_error_dist(part));
        } else {
            throw ValidationError("scenario line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    sc.validate();
    return sc;
}

Scenario read_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open scenario file " + path.string());
    return parse_scenario(in);
}

LongitudinalDataset generate_dataset(const Scenario& sc, std::uint64_t seed) {
    sc.validate();
    const int m = sc.m;
    const int n_extra = sc.p() - 2;
    Eigen::MatrixXd R = Eigen::MatrixXd::Constant(m, m, sc.rho);
    R.diagonal().setOnes();
    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(sc.sigma_e2 * R).matrixL();

    ColumnLayout layout;
    layout.errorprone_names = {"x1"};
    for (int l = 0; l < n_extra; ++l) layout.exact_names.push_back("x" + std::to_string(l + 2));

    rng::Stream stream(seed);
    std::vector<SubjectRecord> subjects(static_cast<std::size_t>(sc.n));
    Eigen::VectorXd x1(m), z(m);
    for (int i = 0; i < sc.n; ++i) {
        auto& s = subjects[static_cast<std::size_t>(i)];
        s.subject_id = std::to_string(i + 1);
        s.visit_index.resize(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j) s.visit_index[static_cast<std::size_t>(j)] = j + 1;
        s.x_exact.resize(m, 1 + n_extra);
        s.x_exact.col(0).setOnes();

        for (int j = 0; j < m; ++j) x1(j) = stream.normal();
        for (int l = 0; l < n_extra; ++l)
            for (int j = 0; j < m; ++j) s.x_exact(j, 1 + l) = stream.normal();
        for (int j = 0; j < m; ++j) z(j) = stream.normal();

        s.y = sc.beta_true(0) * Eigen::VectorXd::Ones(m) + sc.beta_true(1) * x1 + L * z;
        for (int l = 0; l < n_extra; ++l) s.y += sc.beta_true(2 + l) * s.x_exact.col(1 + l);

        s.w_reps.resize(static_cast<std::size_t>(sc.K()));
        for (int k = 0; k < sc.K(); ++k) {
            auto& w = s.w_reps[static_cast<std::size_t>(k)];
            w.resize(m, 1);
            for (int j = 0; j < m; ++j) w(j, 0) = x1(j) + sc.error_dists[static_cast<std::size_t>(k)].sample(stream);
        }
    }
    return LongitudinalDataset(std::move(subjects), std::move(layout));
}

std::vector<MetricRow> compute_metrics(const Eigen::MatrixXd& estimates,
                                       const std::vector<std::vector<ConfidenceInterval>>& intervals,
                                       const Eigen::VectorXd& truth, const std::vector<std::string>& names) {
    const auto reps = estimates.rows();
    const auto p = estimates.cols();
    if (reps < 1) throw NumericalError("metrics: no successful replications");
    if (truth.size() != p) throw DimensionError("metrics: truth has wrong length");
    std::vector<MetricRow> rows;
    for (Eigen::Index j = 0; j < p; ++j) {
        MetricRow row;
        row.coord = static_cast<int>(j);
        row.coef = j < static_cast<Eigen::Index>(names.size()) ? names[static_cast<std::size_t>(j)] : "b" + std::to_string(j);
        row.truth = truth(j);
        row.n_estimates = static_cast<int>(reps);
        const Eigen::ArrayXd err = estimates.col(j).array() - truth(j);
        row.bias = err.mean();
        row.mse = err.square().mean();
        if (reps > 1) {
            const Eigen::ArrayXd centered = estimates.col(j).array() - estimates.col(j).mean();
            row.sd = std::sqrt(centered.square().sum() / static_cast<double>(reps - 1));
        }
        if (j < static_cast<Eigen::Index>(intervals.size()) && !intervals[static_cast<std::size_t>(j)].empty()) {
            const auto& cis = intervals[static_cast<std::size_t>(j)];
            int covered = 0;
            double length = 0.0;
            for (const auto& ci : cis) {
                covered += ci.covers(truth(j)) ? 1 : 0;
                length += ci.length();
            }
            row.n_intervals = static_cast<int>(cis.size());
            row.cp = static_cast<double>(covered) / static_cast<double>(cis.size());
            row.ml = length / static_cast<double>(cis.size());
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

ReplicateOutcome run_method(const LongitudinalDataset& ds, Method method, const StudyOptions& options) {
    ReplicateOutcome out;
    std::vector<int> coords = options.ci_coords;
    if (coords.empty())
        for (int j = 0; j < ds.p(); ++j) coords.push_back(j);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        if (method == Method::proposed || method == Method::el_naive) {
            const ELFit fit = method == Method::proposed ? fit_mele(ds, options.config) : fit_naive_el_full(ds, options.config);
            if (!fit.converged) throw NumericalError("fit did not converge");
            out.beta = fit.beta_hat;
            if (options.intervals)
                for (int j : coords) out.intervals.push_back(ci_profile(fit, j, options.level));
        } else {
            const BaselineFit fit = method == Method::lin ? fit_lin(ds, options.config) : fit_naive_gee(ds, options.config);
            if (!fit.converged) throw NumericalError("fit did not converge");
            out.beta = fit.beta_hat;
            if (options.intervals)
                for (int j : coords) out.intervals.push_back(ci_wald(fit.beta_hat, fit.covariance, j, options.level));
        }
        out.ok = true;
    } catch (const std::exception& e) {
        out.ok = false;
        out.failure = e.what();
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

StudyReport run_study(const Scenario& sc, const StudyOptions& options) {
    sc.validate();
    options.config.validate();
    if (options.n_reps < 1) throw ValidationError("simulation: reps must be at least 1");
    if (options.methods.empty()) throw ValidationError("simulation: no methods selected");
    if (!(options.level > 0.0 && options.level < 1.0)) throw ValidationError("simulation: level must lie in (0, 1)");
    for (int j : options.ci_coords)
        if (j < 0 || j >= sc.p()) throw ValidationError("simulation: interval coordinate out of range");

    const int reps = options.n_reps;
    const auto n_methods = static_cast<int>(options.methods.size());
    std::vector<std::vector<ReplicateOutcome>> outcomes(static_cast<std::size_t>(reps),
                                                        std::vector<ReplicateOutcome>(static_cast<std::size_t>(n_methods)));

#pragma omp parallel for schedule(dynamic) if (options.parallel)
    for (int r = 0; r < reps; ++r) {
        auto& slot = outcomes[static_cast<std::size_t>(r)];
        try {
            const auto ds = generate_dataset(sc, rng::stream_seed(options.base_seed, static_cast<std::uint64_t>(r)));
            for (int k = 0; k < n_methods; ++k)
                slot[static_cast<std::size_t>(k)] = run_method(ds, options.methods[static_cast<std::size_t>(k)], options);
        } catch (const std::exception& e) {
            for (auto& o : slot) {
                o.ok = false;
                o.failure = e.what();
            }
        }
    }

    StudyReport report;
    report.scenario = sc;
    report.options = options;
    std::vector<int> coords = options.ci_coords;
    if (coords.empty())
        for (int j = 0; j < sc.p(); ++j) coords.push_back(j);
    std::vector<std::string> names{"(Intercept)", "x1"};
    for (int l = 2; l < sc.p(); ++l) names.push_back("x" + std::to_string(l));

    for (int k = 0; k < n_methods; ++k) {
        MethodSummary summary;
        summary.method = options.methods[static_cast<std::size_t>(k)];
        std::vector<int> good;
        for (int r = 0; r < reps; ++r) {
            const auto& o = outcomes[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)];
            summary.seconds += o.seconds;
            if (o.ok) good.push_back(r);
        }
        summary.n_success = static_cast<int>(good.size());
        summary.n_failures = reps - summary.n_success;
        if (good.empty())
            throw NumericalError("simulation: every replication failed for method " + std::string(to_string(summary.method)));
        Eigen::MatrixXd est(static_cast<Eigen::Index>(good.size()), sc.p());
        std::vector<std::vector<ConfidenceInterval>> cis(static_cast<std::size_t>(sc.p()));
        for (std::size_t a = 0; a < good.size(); ++a) {
            const auto& o = outcomes[static_cast<std::size_t>(good[a])][static_cast<std::size_t>(k)];
            est.row(static_cast<Eigen::Index>(a)) = o.beta.transpose();
            for (std::size_t c = 0; c < o.intervals.size(); ++c)
                cis[static_cast<std::size_t>(coords[c])].push_back(o.intervals[c]);
        }
        summary.rows = compute_metrics(est, cis, sc.beta_true, names);
        if (summary.n_failures > 0.02 * reps)
            report.warnings.push_back(std::string(to_string(summary.method)) + ": " + std::to_string(summary.n_failures) +
                                      " of " + std::to_string(reps) + " replications failed (above 2%)");
        report.methods.push_back(std::move(summary));
    }
    return report;
}

void write_study_csv(std::ostream& out, const StudyReport& report, bool percent_units) {
    const double scale = percent_units ? 100.0 : 1.0;
    std::ostringstream os;
    os << std::setprecision(10);
    auto opt = [&](const std::optional<double>& v) {
        if (v) os << *v * scale;
        else os << "NA";
    };
    os << "scenario,n,method,coef,truth,bias,sd,mse,cp,ml,n_reps,n_failures\n";
    for (const auto& s : report.methods) {
        for (const auto& row : s.rows) {
            os << report.scenario.name << ',' << report.scenario.n << ',' << to_string(s.method) << ',' << row.coef << ','
               << row.truth << ',' << row.bias * scale << ',';
            opt(row.sd);
            os << ',' << row.mse * scale << ',';
            opt(row.cp);
            os << ',';
            opt(row.ml);
            os << ',' << s.n_success << ',' << s.n_failures << '\n';
        }
    }
    out << os.str();
}

}  // namespace elmer
