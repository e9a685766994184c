#include "elmer/baselines.hpp"
#include "elmer/dataset.hpp"
#include "elmer/el_core.hpp"
#include "elmer/error.hpp"
#include "elmer/inference.hpp"
#include "elmer/kernels.hpp"
#include "elmer/report.hpp"
#include "elmer/simulation.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

namespace {

using namespace elmer;

struct Args {
    std::string config_path;
    int threads = 0;
    std::string input, layout, method = "proposed", working_cov = "exchangeable", format = "text", out;
    double inner_tol = 1e-10, outer_tol = 1e-8, objective_tol = 1e-10, rank_tol = 1e-8;
    int max_inner = 100, max_outer = 50, max_bfgs = 200;
    double level = 0.95;
    std::string coords, ci_method = "profile";
    double alpha = 0.05;
    std::string sim_format = "csv", scenario = "C1", methods = "gee-naive,el-naive,lin,proposed", ci_coords;
    int n = 500, reps = 100;
    std::uint64_t seed = 1;
    bool percent_units = false, no_ci = false;
};

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Flat key = value file; keys are long option names of the global app or the
// chosen subcommand. Values fill options not given on the command line.
void apply_config(const std::string& path, CLI::App& app, CLI::App& sub) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        CLI::Option* opt = sub.get_option_no_throw("--" + key);
        if (!opt) opt = app.get_option_no_throw("--" + key);
        if (!opt || key == "config")
            throw ValidationError("config line " + std::to_string(lineno) + ": unknown key '" + key + "' for " + sub.get_name());
        if (opt->count() > 0) continue;
        if (opt->get_expected_min() == 0) {
            if (value != "true" && value != "false")
                throw ValidationError("config key '" + key + "': expected true or false");
            if (value == "false") continue;
        }
        opt->add_result(opt->get_expected_min() == 0 ? std::string("true") : value);
        opt->run_callback();
    }
}

void echo_config(const CLI::App& app, const CLI::App& sub) {
    std::cerr << "# resolved config: " << sub.get_name() << "\n";
    for (const CLI::App* a : {&app, &sub}) {
        for (const CLI::Option* opt : a->get_options()) {
            if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
            std::string value;
            if (opt->count() > 0) {
                for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
            } else {
                value = opt->get_expected_min() == 0 ? "false" : opt->get_default_str();
            }
            std::cerr << "#   " << opt->get_lnames().front() << " = " << value << "\n";
        }
    }
}

FitConfig fit_config(const Args& a) {
    FitConfig c;
    c.working_cov = parse_cov_structure(a.working_cov);
    c.inner_tol = a.inner_tol;
    c.outer_tol = a.outer_tol;
    c.objective_tol = a.objective_tol;
    c.rank_tol = a.rank_tol;
    c.max_inner = a.max_inner;
    c.max_outer = a.max_outer;
    c.max_bfgs = a.max_bfgs;
    c.validate();
    return c;
}

void check_format(const std::string& f, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed)
        if (f == a) return;
    throw ValidationError("format: unsupported value '" + f + "'");
}

// Writes to --out when given, stdout otherwise.
void emit(const Args& a, const std::string& text) {
    if (a.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(a.out, std::ios::binary);
    if (!f) throw ValidationError("cannot write output file " + a.out);
    f << text;
}

LongitudinalDataset load(const Args& a) {
    if (a.input.empty()) throw ValidationError("input: no data file given (--input)");
    if (a.layout.empty()) throw ValidationError("layout: no layout file given (--layout)");
    return load_csv(a.input, read_layout(a.layout));
}

struct AnyFit {
    FitSummary summary;
    std::optional<ELFit> el;
    std::optional<BaselineFit> base;
};

AnyFit run_fit(const LongitudinalDataset& ds, Method method, const FitConfig& config) {
    AnyFit f;
    switch (method) {
        case Method::proposed: f.el = fit_mele(ds, config); break;
        case Method::el_naive: f.el = fit_naive_el_full(ds, config); break;
        case Method::lin: f.base = fit_lin(ds, config); break;
        case Method::gee_naive: f.base = fit_naive_gee(ds, config); break;
    }
    f.summary = f.el ? summarize(ds, *f.el, method) : summarize(ds, *f.base);
    return f;
}

int cmd_fit(const Args& a) {
    check_format(a.format, {"text", "json"});
    const auto ds = load(a);
    const auto f = run_fit(ds, parse_method(a.method), fit_config(a));
    std::ostringstream os;
    if (a.format == "json") os << to_json(f.summary).dump(2) << "\n";
    else write_text(os, f.summary);
    emit(a, os.str());
    return f.summary.converged ? 0 : 2;
}

std::vector<int> resolve_coords(const std::string& list, const std::vector<std::string>& names) {
    std::vector<int> out;
    if (list.empty()) {
        for (std::size_t j = 0; j < names.size(); ++j) out.push_back(static_cast<int>(j));
        return out;
    }
    for (const auto& item : split(list)) {
        const auto it = std::find(names.begin(), names.end(), item);
        if (it != names.end()) {
            out.push_back(static_cast<int>(it - names.begin()));
            continue;
        }
        std::size_t used = 0;
        int j = -1;
        try {
            j = std::stoi(item, &used);
        } catch (const std::exception&) {
        }
        if (used != item.size() || j < 0 || j >= static_cast<int>(names.size()))
            throw ValidationError("coords: unknown coefficient '" + item + "'");
        out.push_back(j);
    }
    return out;
}

int cmd_ci(const Args& a) {
    check_format(a.format, {"text", "json"});
    if (a.ci_method != "profile" && a.ci_method != "wald")
        throw ValidationError("method: expected profile or wald, got '" + a.ci_method + "'");
    if (!(a.level > 0.0 && a.level < 1.0)) throw ValidationError("level: must lie in (0, 1)");
    const auto ds = load(a);
    const Method estimator = parse_method(a.method);
    const auto names = ds.coefficient_names();
    const auto coords = resolve_coords(a.coords, names);
    const auto f = run_fit(ds, estimator, fit_config(a));
    if (a.ci_method == "profile" && !f.el)
        throw ValidationError("method: profile intervals need an EL estimator (proposed or el-naive)");
    std::vector<ConfidenceInterval> cis;
    for (int j : coords) {
        if (a.ci_method == "profile") cis.push_back(ci_profile(*f.el, j, a.level));
        else if (f.el) cis.push_back(ci_wald(f.el->beta_hat, f.el->coef_covariance(), j, a.level));
        else cis.push_back(ci_wald(f.base->beta_hat, f.base->covariance, j, a.level));
    }
    std::ostringstream os;
    bool flagged = !f.summary.converged;
    for (const auto& ci : cis) flagged = flagged || ci.lower_unbounded || ci.upper_unbounded;
    if (a.format == "json") {
        nlohmann::ordered_json j;
        j["fit"] = to_json(f.summary);
        j["intervals"] = to_json(cis, names);
        os << j.dump(2) << "\n";
    } else {
        write_ci_table(os, cis, names);
    }
    emit(a, os.str());
    return flagged ? 2 : 0;
}

int cmd_diagnose(const Args& a) {
    check_format(a.format, {"text", "json"});
    if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw ValidationError("alpha: must lie in (0, 1)");
    const auto ds = load(a);
    const auto rows = skewness_table(ds);
    std::ostringstream os;
    if (a.format == "json") os << to_json(rows, a.alpha).dump(2) << "\n";
    else write_skewness_table(os, rows, a.alpha);
    emit(a, os.str());
    return 0;
}

int cmd_simulate(const Args& a) {
    check_format(a.sim_format, {"csv", "json"});
    Scenario sc = is_preset(a.scenario) ? preset_scenario(a.scenario, a.n) : read_scenario(a.scenario);
    sc.n = a.n;
    StudyOptions o;
    o.methods.clear();
    for (const auto& m : split(a.methods)) o.methods.push_back(parse_method(m));
    o.n_reps = a.reps;
    o.base_seed = a.seed;
    o.level = a.level;
    o.intervals = !a.no_ci;
    o.config = fit_config(a);
    if (!a.ci_coords.empty()) {
        std::vector<std::string> names{"(Intercept)", "x1"};
        for (int l = 2; l < sc.p(); ++l) names.push_back("x" + std::to_string(l));
        o.ci_coords = resolve_coords(a.ci_coords, names);
    }
    const auto report = run_study(sc, o);
    std::ostringstream os;
    if (a.sim_format == "json") os << to_json(report, a.percent_units).dump(2) << "\n";
    else write_study_csv(os, report, a.percent_units);
    emit(a, os.str());
    for (const auto& s : report.methods)
        std::cerr << "# " << to_string(s.method) << ": " << s.n_success << " fits, " << s.n_failures << " failures, "
                  << s.seconds << " s\n";
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    return 0;
}

void add_fit_options(CLI::App* sub, Args& a, bool data) {
    if (data) {
        sub->add_option("--input", a.input, "Long-format CSV data file");
        sub->add_option("--layout", a.layout, "Column layout file (key = value)");
    }
    sub->add_option("--working-cov", a.working_cov, "independence, exchangeable or ar1");
    sub->add_option("--inner-tol", a.inner_tol, "Lagrange multiplier tolerance");
    sub->add_option("--outer-tol", a.outer_tol, "Outer step tolerance");
    sub->add_option("--objective-tol", a.objective_tol, "Outer objective-change tolerance");
    sub->add_option("--rank-tol", a.rank_tol, "Basis reduction pivot tolerance");
    sub->add_option("--max-inner", a.max_inner, "Newton iterations for the multiplier");
    sub->add_option("--max-outer", a.max_outer, "Outer iterations");
    sub->add_option("--max-bfgs", a.max_bfgs, "Quasi-Newton iterations per outer step");
}

}  // namespace

int main(int argc, char** argv) {
    Args a;
    CLI::App app{"Empirical-likelihood regression for longitudinal data with replicate measurement errors"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--config", a.config_path, "Flat key = value file; command-line flags take precedence");
    app.add_option("--threads", a.threads, "Worker threads (default: all cores)")->check(CLI::NonNegativeNumber);

    auto* fit = app.add_subcommand("fit", "Fit one estimator and report coefficients");
    add_fit_options(fit, a, true);
    fit->add_option("--method", a.method, "proposed, lin, gee-naive or el-naive");
    fit->add_option("--format", a.format, "text or json");
    fit->add_option("--out", a.out, "Output file (default: stdout)");

    auto* ci = app.add_subcommand("ci", "Confidence intervals");
    add_fit_options(ci, a, true);
    ci->add_option("--estimator", a.method, "proposed, lin, gee-naive or el-naive");
    ci->add_option("--method", a.ci_method, "profile or wald");
    ci->add_option("--level", a.level, "Confidence level");
    ci->add_option("--coords", a.coords, "Comma list of coefficient names or 0-based indices");
    ci->add_option("--format", a.format, "text or json");
    ci->add_option("--out", a.out, "Output file (default: stdout)");

    auto* diag = app.add_subcommand("diagnose", "Skewness test of replicate-centered differences");
    diag->add_option("--input", a.input, "Long-format CSV data file");
    diag->add_option("--layout", a.layout, "Column layout file (key = value)");
    diag->add_option("--alpha", a.alpha, "Significance level for the asymmetry flag");
    diag->add_option("--format", a.format, "text or json");
    diag->add_option("--out", a.out, "Output file (default: stdout)");

    auto* sim = app.add_subcommand("simulate", "Monte Carlo study");
    add_fit_options(sim, a, false);
    sim->add_option("--scenario", a.scenario, "C1, C2, C3, C4 or a scenario file");
    sim->add_option("--n", a.n, "Subjects per replication");
    sim->add_option("--reps", a.reps, "Replications");
    sim->add_option("--methods", a.methods, "Comma list of estimators");
    sim->add_option("--seed", a.seed, "Base seed; replication r uses seed xor r");
    sim->add_option("--level", a.level, "Confidence level");
    sim->add_option("--ci-coords", a.ci_coords, "Coefficients to build intervals for (default: all)");
    sim->add_flag("--no-ci", a.no_ci, "Skip confidence intervals");
    sim->add_flag("--percent,--paper-units", a.percent_units, "Multiply bias, SD, MSE, CP and ML by 100");
    sim->add_option("--format", a.sim_format, "csv or json");
    sim->add_option("--out", a.out, "Output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        if (!a.config_path.empty()) apply_config(a.config_path, app, *sub);
        kernels::set_thread_count(a.threads > 0 ? a.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
        echo_config(app, *sub);
        if (sub == fit) return cmd_fit(a);
        if (sub == ci) return cmd_ci(a);
        if (sub == diag) return cmd_diagnose(a);
        return cmd_simulate(a);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
