#include "elmer/dataset.hpp"

#include "elmer/error.hpp"
#include "elmer/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace elmer {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    std::string out(s.substr(first, last - first + 1));
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
    return out;
}

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

bool parse_double(const std::string& s, double& value) {
    if (s.empty()) return false;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (*begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    return ec == std::errc() && ptr == end;
}

bool parse_bool(const std::string& s) {
    std::string v;
    std::transform(s.begin(), s.end(), std::back_inserter(v), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError("layout: expected boolean, got '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    for (auto& item : split(s, ',')) {
        if (item.empty()) throw ValidationError("layout: empty name in list '" + s + "'");
        out.push_back(item);
    }
    return out;
}

}  // namespace

std::string ColumnLayout::replicate_column(const std::string& coord, int k) const {
    return coord + replicate_suffix_rule + std::to_string(k);
}

void ColumnLayout::validate() const {
    std::set<std::string> seen;
    auto add = [&](const std::string& name) {
        if (name.empty()) throw ValidationError("layout: empty column name");
        if (!seen.insert(name).second) throw ValidationError("layout: duplicate column name '" + name + "'");
    };
    add(id_column);
    add(visit_column);
    add(response_column);
    for (const auto& c : exact_names) add(c);
    for (const auto& c : errorprone_names) add(c);
    if (replicate_suffix_rule.empty()) throw ValidationError("layout: replicate suffix rule is empty");
    if (exact_names.empty() && errorprone_names.empty() && !has_intercept)
        throw ValidationError("layout: no covariates");
}

ColumnLayout parse_layout(std::istream& in) {
    ColumnLayout layout;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("layout line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "id") layout.id_column = value;
        else if (key == "visit") layout.visit_column = value;
        else if (key == "response") layout.response_column = value;
        else if (key == "exact") layout.exact_names = split_list(value);
        else if (key == "errorprone") layout.errorprone_names = split_list(value);
        else if (key == "replicate_suffix") layout.replicate_suffix_rule = value;
        else if (key == "intercept") layout.has_intercept = parse_bool(value);
        else throw ValidationError("layout line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    layout.validate();
    return layout;
}

ColumnLayout read_layout(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open layout file " + path.string());
    return parse_layout(in);
}

LongitudinalDataset::LongitudinalDataset(std::vector<SubjectRecord> subjects, ColumnLayout layout)
    : subjects_(std::move(subjects)), layout_(std::move(layout)) {
    layout_.validate();
    if (subjects_.empty()) throw ValidationError("dataset has no subjects");
    p_exact_ = static_cast<int>(layout_.exact_names.size()) + (layout_.has_intercept ? 1 : 0);
    p_err_ = static_cast<int>(layout_.errorprone_names.size());
    replicates_ = static_cast<int>(subjects_.front().w_reps.size());
    if (replicates_ < 2) throw ValidationError("at least two replicates are required, got " + std::to_string(replicates_));

    std::set<std::string> ids;
    for (const auto& s : subjects_) {
        const std::string who = "subject " + s.subject_id;
        if (!ids.insert(s.subject_id).second) throw ValidationError("duplicate " + who);
        const auto m = s.y.size();
        if (m < 1) throw ValidationError(who + ": no visits");
        if (static_cast<Eigen::Index>(s.visit_index.size()) != m)
            throw ValidationError(who + ": visit index count does not match response length");
        if (s.x_exact.rows() != m || s.x_exact.cols() != p_exact_)
            throw ValidationError(who + ": exact covariate matrix has wrong shape");
        if (static_cast<int>(s.w_reps.size()) != replicates_)
            throw ValidationError(who + ": expected " + std::to_string(replicates_) + " replicates, found " +
                                  std::to_string(s.w_reps.size()));
        for (const auto& w : s.w_reps)
            if (w.rows() != m || w.cols() != p_err_) throw ValidationError(who + ": replicate matrix has wrong shape");
        bool finite = s.y.allFinite() && s.x_exact.allFinite();
        for (const auto& w : s.w_reps) finite = finite && w.allFinite();
        if (!finite) throw ValidationError(who + ": non-finite value");
        total_obs_ += static_cast<int>(m);
        max_visits_ = std::max(max_visits_, static_cast<int>(m));
    }

    const int p_total = p();
    const int offset_exact = layout_.has_intercept ? 1 : 0;
    designs_.resize(subjects_.size());
    mean_designs_.resize(subjects_.size());
    for (std::size_t i = 0; i < subjects_.size(); ++i) {
        const auto& s = subjects_[i];
        const auto m = s.y.size();
        Eigen::MatrixXd base(m, p_total);
        if (layout_.has_intercept) base.col(0) = s.x_exact.col(0);
        if (p_exact_ > offset_exact)
            base.rightCols(p_exact_ - offset_exact) = s.x_exact.rightCols(p_exact_ - offset_exact);
        Eigen::MatrixXd mean_w = Eigen::MatrixXd::Zero(m, p_err_);
        designs_[i].reserve(static_cast<std::size_t>(replicates_));
        for (int k = 0; k < replicates_; ++k) {
            Eigen::MatrixXd d = base;
            d.middleCols(offset_exact, p_err_) = s.w_reps[static_cast<std::size_t>(k)];
            mean_w += s.w_reps[static_cast<std::size_t>(k)];
            designs_[i].push_back(std::move(d));
        }
        mean_w /= replicates_;
        mean_designs_[i] = base;
        mean_designs_[i].middleCols(offset_exact, p_err_) = mean_w;
    }
}

const Eigen::MatrixXd& LongitudinalDataset::design(int i, int k) const {
    return designs_[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
}

std::vector<std::string> LongitudinalDataset::coefficient_names() const {
    std::vector<std::string> names;
    if (layout_.has_intercept) names.emplace_back("(Intercept)");
    names.insert(names.end(), layout_.errorprone_names.begin(), layout_.errorprone_names.end());
    names.insert(names.end(), layout_.exact_names.begin(), layout_.exact_names.end());
    return names;
}

bool LongitudinalDataset::is_errorprone_coef(int j) const {
    const int offset = layout_.has_intercept ? 1 : 0;
    return j >= offset && j < offset + p_err_;
}

LongitudinalDataset load_csv(std::istream& in, const ColumnLayout& layout) {
    layout.validate();
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty file: header row required");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // UTF-8 BOM
    const auto header = split(line, ',');
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t c = 0; c < header.size(); ++c) col.emplace(header[c], c);

    auto require = [&](const std::string& name) {
        auto it = col.find(name);
        if (it == col.end()) throw SchemaError("missing column '" + name + "'");
        return it->second;
    };
    const auto id_col = require(layout.id_column);
    const auto visit_col = require(layout.visit_column);
    const auto y_col = require(layout.response_column);
    std::vector<std::size_t> exact_cols;
    for (const auto& name : layout.exact_names) exact_cols.push_back(require(name));

    int K = 0;
    if (!layout.errorprone_names.empty()) {
        const auto& first = layout.errorprone_names.front();
        while (col.count(layout.replicate_column(first, K + 1))) ++K;
        if (K < 2) throw SchemaError("missing column '" + layout.replicate_column(first, K + 1) + "'");
    } else {
        throw SchemaError("layout names no error-prone covariate; replicate columns are required");
    }
    // rep_cols[e][k]
    std::vector<std::vector<std::size_t>> rep_cols;
    for (const auto& name : layout.errorprone_names) {
        std::vector<std::size_t> cols;
        for (int k = 1; k <= K; ++k) cols.push_back(require(layout.replicate_column(name, k)));
        if (col.count(layout.replicate_column(name, K + 1)))
            throw SchemaError("column '" + layout.replicate_column(name, K + 1) + "' exceeds replicate count " +
                              std::to_string(K) + " of '" + layout.errorprone_names.front() + "'");
        rep_cols.push_back(std::move(cols));
    }

    struct Row {
        double visit;
        double y;
        std::vector<double> exact;
        std::vector<std::vector<double>> reps;  // [k][e]
    };
    std::vector<std::string> order;
    std::map<std::string, std::vector<Row>> rows_by_id;
    const int p_err = static_cast<int>(layout.errorprone_names.size());

    int row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (trim(line).empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() < header.size())
            throw ParseError("row " + std::to_string(row_no) + ": expected " + std::to_string(header.size()) +
                             " fields, found " + std::to_string(cells.size()));
        auto number = [&](std::size_t c) {
            double v = 0.0;
            if (!parse_double(cells[c], v) || !std::isfinite(v))
                throw ParseError("row " + std::to_string(row_no) + ": column '" + header[c] +
                                 "' is not a finite number ('" + cells[c] + "')");
            return v;
        };
        const std::string id = cells[id_col];
        if (id.empty()) throw ParseError("row " + std::to_string(row_no) + ": empty subject id");
        Row r;
        r.visit = number(visit_col);
        r.y = number(y_col);
        for (auto c : exact_cols) r.exact.push_back(number(c));
        r.reps.assign(static_cast<std::size_t>(K), std::vector<double>(static_cast<std::size_t>(p_err)));
        for (int e = 0; e < p_err; ++e) {
            for (int k = 0; k < K; ++k) {
                const auto c = rep_cols[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)];
                if (cells[c].empty())
                    throw ValidationError("subject " + id + ": replicate '" + header[c] + "' missing at visit " +
                                          cells[visit_col] + " (row " + std::to_string(row_no) + ")");
                r.reps[static_cast<std::size_t>(k)][static_cast<std::size_t>(e)] = number(c);
            }
        }
        auto [it, inserted] = rows_by_id.try_emplace(id);
        if (inserted) order.push_back(id);
        it->second.push_back(std::move(r));
    }
    if (order.empty()) throw ValidationError("file has no data rows");

    std::vector<SubjectRecord> subjects;
    subjects.reserve(order.size());
    const int p_exact = static_cast<int>(layout.exact_names.size()) + (layout.has_intercept ? 1 : 0);
    const int off = layout.has_intercept ? 1 : 0;
    for (const auto& id : order) {
        auto& rows = rows_by_id[id];
        std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.visit < b.visit; });
        for (std::size_t j = 1; j < rows.size(); ++j)
            if (rows[j].visit == rows[j - 1].visit)
                throw ValidationError("subject " + id + ": duplicate visit index " + std::to_string(rows[j].visit));
        const auto m = static_cast<Eigen::Index>(rows.size());
        SubjectRecord s;
        s.subject_id = id;
        s.y.resize(m);
        s.x_exact.resize(m, p_exact);
        s.w_reps.assign(static_cast<std::size_t>(K), Eigen::MatrixXd(m, p_err));
        for (Eigen::Index j = 0; j < m; ++j) {
            const auto& r = rows[static_cast<std::size_t>(j)];
            s.visit_index.push_back(r.visit);
            s.y(j) = r.y;
            if (layout.has_intercept) s.x_exact(j, 0) = 1.0;
            for (std::size_t c = 0; c < r.exact.size(); ++c) s.x_exact(j, off + static_cast<Eigen::Index>(c)) = r.exact[c];
            for (int k = 0; k < K; ++k)
                for (int e = 0; e < p_err; ++e)
                    s.w_reps[static_cast<std::size_t>(k)](j, e) = r.reps[static_cast<std::size_t>(k)][static_cast<std::size_t>(e)];
        }
        subjects.push_back(std::move(s));
    }
    return LongitudinalDataset(std::move(subjects), layout);
}

LongitudinalDataset load_csv(const std::filesystem::path& path, const ColumnLayout& layout) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open input file " + path.string());
    return load_csv(in, layout);
}

void write_csv(std::ostream& out, const LongitudinalDataset& ds) {
    const auto& layout = ds.layout();
    out << layout.id_column << ',' << layout.visit_column << ',' << layout.response_column;
    for (const auto& c : layout.exact_names) out << ',' << c;
    for (const auto& c : layout.errorprone_names)
        for (int k = 1; k <= ds.K(); ++k) out << ',' << layout.replicate_column(c, k);
    out << '\n';
    const int off = layout.has_intercept ? 1 : 0;
    out << std::setprecision(17);
    for (const auto& s : ds.subjects()) {
        for (int j = 0; j < s.visits(); ++j) {
            out << s.subject_id << ',' << s.visit_index[static_cast<std::size_t>(j)] << ',' << s.y(j);
            for (int c = off; c < ds.p_exact(); ++c) out << ',' << s.x_exact(j, c);
            for (int e = 0; e < ds.p_err(); ++e)
                for (int k = 0; k < ds.K(); ++k) out << ',' << s.w_reps[static_cast<std::size_t>(k)](j, e);
            out << '\n';
        }
    }
}

void write_csv(const std::filesystem::path& path, const LongitudinalDataset& ds) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open output file " + path.string());
    write_csv(out, ds);
}

LongitudinalDataset center_columns(const LongitudinalDataset& ds, const std::vector<std::string>& columns) {
    const auto& layout = ds.layout();
    const int off = layout.has_intercept ? 1 : 0;
    std::vector<SubjectRecord> subjects = ds.subjects();
    const double n_obs = ds.total_obs();
    for (const auto& name : columns) {
        auto ex = std::find(layout.exact_names.begin(), layout.exact_names.end(), name);
        auto ep = std::find(layout.errorprone_names.begin(), layout.errorprone_names.end(), name);
        if (ex != layout.exact_names.end()) {
            const int c = off + static_cast<int>(ex - layout.exact_names.begin());
            double sum = 0.0;
            for (const auto& s : subjects) sum += s.x_exact.col(c).sum();
            const double mean = sum / n_obs;
            for (auto& s : subjects) s.x_exact.col(c).array() -= mean;
        } else if (ep != layout.errorprone_names.end()) {
            const int e = static_cast<int>(ep - layout.errorprone_names.begin());
            double sum = 0.0;
            for (const auto& s : subjects)
                for (const auto& w : s.w_reps) sum += w.col(e).sum();
            const double mean = sum / (n_obs * ds.K());
            for (auto& s : subjects)
                for (auto& w : s.w_reps) w.col(e).array() -= mean;
        } else if (name == layout.response_column) {
            double sum = 0.0;
            for (const auto& s : subjects) sum += s.y.sum();
            const double mean = sum / n_obs;
            for (auto& s : subjects) s.y.array() -= mean;
        } else {
            throw ValidationError("center_columns: unknown column '" + name + "'");
        }
    }
    return LongitudinalDataset(std::move(subjects), layout);
}

std::vector<double> replicate_centered_difference(const LongitudinalDataset& ds, const std::string& coord, int k) {
    const auto& names = ds.layout().errorprone_names;
    auto it = std::find(names.begin(), names.end(), coord);
    if (it == names.end()) throw ValidationError("'" + coord + "' is not an error-prone coordinate");
    if (k < 1 || k > ds.K())
        throw ValidationError("replicate index " + std::to_string(k) + " outside 1.." + std::to_string(ds.K()));
    const auto e = static_cast<Eigen::Index>(it - names.begin());
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(ds.total_obs()));
    for (const auto& s : ds.subjects()) {
        for (int j = 0; j < s.visits(); ++j) {
            double mean = 0.0;
            for (const auto& w : s.w_reps) mean += w(j, e);
            mean /= ds.K();
            out.push_back(s.w_reps[static_cast<std::size_t>(k - 1)](j, e) - mean);
        }
    }
    return out;
}

SkewnessDiagnostic dagostino_skewness_test(std::span<const double> values) {
    const auto n_obs = values.size();
    if (n_obs < 9) throw SampleSizeError("skewness test needs at least 9 observations, got " + std::to_string(n_obs));
    const double n = static_cast<double>(n_obs);
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double m2 = 0.0, m3 = 0.0;
    for (double v : values) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    SkewnessDiagnostic out;
    out.n_obs = static_cast<int>(n_obs);
    if (m2 <= 0.0) return out;  // constant sample: no evidence of asymmetry
    const double sqrt_b1 = m3 / std::pow(m2, 1.5);
    const double y = sqrt_b1 * std::sqrt((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0)));
    const double beta2 = 3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0) /
                         ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
    const double w2 = -1.0 + std::sqrt(2.0 * (beta2 - 1.0));
    const double delta = 1.0 / std::sqrt(std::log(std::sqrt(w2)));
    const double alpha = std::sqrt(2.0 / (w2 - 1.0));
    const double t = y / alpha;
    out.z_statistic = delta * std::log(t + std::sqrt(t * t + 1.0));
    out.p_value = stats::normal_two_sided_p(out.z_statistic);
    return out;
}

std::vector<ReplicateSkewness> skewness_table(const LongitudinalDataset& ds) {
    std::vector<ReplicateSkewness> out;
    for (const auto& coord : ds.layout().errorprone_names) {
        for (int k = 1; k <= ds.K(); ++k) {
            const auto diff = replicate_centered_difference(ds, coord, k);
            ReplicateSkewness row{coord, k, dagostino_skewness_test(diff)};
            row.test.coordinate = ds.layout().replicate_column(coord, k);
            out.push_back(std::move(row));
        }
    }
    return out;
}

}  // namespace elmer
