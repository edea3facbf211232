#include "odtr/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace odtr::io {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    std::string t = s.substr(b, e - b + 1);
    if (t.size() >= 2 && t.front() == '"' && t.back() == '"') t = t.substr(1, t.size() - 2);
    return t;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') quoted = !quoted;
        if (c == ',' && !quoted) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA" || cell == "na"; }

std::optional<double> parse_number(const std::string& cell) {
    if (cell.empty()) return std::nullopt;
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end != cell.c_str() + cell.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
    return v;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

IngestResult parse_dataset_csv(std::istream& in, const CsvOptions& opts) {
    std::string line;
    if (!std::getline(in, line) || trim(line).empty()) throw DataError("CSV has no header row");
    const auto header = split_line(line);
    std::optional<std::size_t> a_col, y_col;
    std::vector<std::size_t> w_cols;
    std::set<std::string> seen;
    for (std::size_t k = 0; k < header.size(); ++k) {
        if (header[k].empty()) throw DataError("CSV header has an empty column name");
        if (!seen.insert(header[k]).second) throw DataError("CSV header repeats column " + header[k]);
        if (header[k] == "A") a_col = k;
        else if (header[k] == "Y") y_col = k;
        else w_cols.push_back(k);
    }
    if (!a_col) throw DataError("CSV header has no column named \"A\"");
    if (!y_col) throw DataError("CSV header has no column named \"Y\"");
    if (w_cols.empty()) throw DataError("CSV has no covariate columns");

    const std::size_t p = w_cols.size();
    std::vector<std::vector<std::optional<double>>> cols(p);
    std::vector<int> A;
    std::vector<double> Y;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        const std::string where = "CSV line " + std::to_string(row);
        if (cells.size() != header.size())
            throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(cells.size()));
        const auto a = parse_number(cells[*a_col]);
        if (!a || (*a != 0.0 && *a != 1.0)) throw DataError(where + ": A must be 0 or 1");
        const auto y = parse_number(cells[*y_col]);
        if (!y) throw DataError(where + ": Y is not numeric");
        A.push_back(static_cast<int>(*a));
        Y.push_back(opts.negate_y ? -*y : *y);
        for (std::size_t j = 0; j < p; ++j) {
            const auto& cell = cells[w_cols[j]];
            if (is_missing(cell)) {
                cols[j].push_back(std::nullopt);
                continue;
            }
            const auto v = parse_number(cell);
            if (!v) throw DataError(where + ": covariate " + header[w_cols[j]] + " is not numeric");
            cols[j].push_back(v);
        }
    }
    const std::size_t n = A.size();
    if (n == 0) throw DataError("CSV has no data rows");

    IngestResult out;
    std::vector<std::string> names;
    std::vector<std::vector<double>> filled;
    std::vector<std::vector<double>> indicators;
    std::vector<std::string> indicator_names;
    for (std::size_t j = 0; j < p; ++j) {
        std::vector<double> present;
        for (const auto& v : cols[j])
            if (v) present.push_back(*v);
        const std::string& name = header[w_cols[j]];
        if (present.empty()) throw DataError("covariate " + name + " has no observed values");
        std::vector<double> col(n);
        if (present.size() == n) {
            for (std::size_t i = 0; i < n; ++i) col[i] = *cols[j][i];
        } else {
            const double med = median(present);
            std::vector<double> ind(n);
            for (std::size_t i = 0; i < n; ++i) {
                col[i] = cols[j][i] ? *cols[j][i] : med;
                ind[i] = cols[j][i] ? 0.0 : 1.0;
            }
            indicators.push_back(std::move(ind));
            indicator_names.push_back(name + "_missing");
            out.notes.push_back("imputed " + std::to_string(n - present.size()) + " missing value(s) of " +
                                name + " with the median " + format_number(med));
        }
        names.push_back(name);
        filled.push_back(std::move(col));
    }
    for (std::size_t k = 0; k < indicators.size(); ++k) {
        names.push_back(indicator_names[k]);
        filled.push_back(std::move(indicators[k]));
    }

    const auto [lo, hi] = std::minmax_element(Y.begin(), Y.end());
    if (*lo < 0.0 || *hi > 1.0) {
        if (*hi > *lo) {
            out.y_offset = *lo;
            out.y_scale = *hi - *lo;
        } else {
            // Constant outcome outside [0, 1].
            out.y_offset = *lo - 0.5;
            out.y_scale = 1.0;
        }
        for (double& y : Y) y = (y - out.y_offset) / out.y_scale;
        out.notes.push_back("rescaled Y to [0, 1] with offset " + format_number(out.y_offset) +
                            " and scale " + format_number(out.y_scale));
    }

    Matrix W(n, filled.size());
    for (std::size_t j = 0; j < filled.size(); ++j)
        std::copy(filled[j].begin(), filled[j].end(), W.col(j).begin());
    out.data = Dataset::make(std::move(W), std::move(A), std::move(Y), std::move(names));
    return out;
}

IngestResult read_dataset_csv(const std::string& path, const CsvOptions& opts) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input CSV " + path);
    return parse_dataset_csv(in, opts);
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
    for (std::size_t j = 0; j < data.covariates(); ++j)
        out << (data.column_names.empty() ? "W" + std::to_string(j + 1) : data.column_names[j]) << ',';
    out << "A,Y\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t j = 0; j < data.covariates(); ++j) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", data.W(i, j));
            out << buf << ',';
        }
        out << data.A[i] << ',' << format_number(data.Y[i]) << '\n';
    }
}

// ---------------------------------------------------------------------------

namespace {

template <class T, class Parse>
std::vector<T> parse_choice(const nlohmann::json& v, const char* key, Parse parse, bool& any_all) {
    if (v.is_string() && v.get<std::string>() == "all") {
        any_all = true;
        return {};
    }
    std::vector<T> out;
    if (v.is_string()) {
        out.push_back(parse(v.get<std::string>()));
    } else if (v.is_array() && !v.empty()) {
        for (const auto& e : v) {
            if (!e.is_string()) throw InvalidConfiguration(std::string(key) + " entries must be strings");
            out.push_back(parse(e.get<std::string>()));
        }
    } else {
        throw InvalidConfiguration(std::string(key) + " must be a name, a non-empty array, or \"all\"");
    }
    return out;
}

template <class T>
T get_as(const nlohmann::json& v, const char* key) {
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InvalidConfiguration(std::string("config key ") + key + " has the wrong type");
    }
}

std::int64_t get_int(const nlohmann::json& v, const char* key) {
    if (!v.is_number_integer()) throw InvalidConfiguration(std::string("config key ") + key + " must be an integer");
    return v.get<std::int64_t>();
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidConfiguration("config must be a JSON object");
    static const std::set<std::string> known{
        "mode",   "dgp",        "n",          "reps",     "seed",  "library",        "metalearner",
        "risk",   "folds",      "input_csv",  "output_dir", "full_scale", "negate_y", "model",
        "reference_rule", "evaluation_sample", "eval_rows"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw InvalidConfiguration("unknown config key \"" + key + "\"");

    RunConfig c;
    if (j.contains("mode")) {
        const auto m = get_as<std::string>(j["mode"], "mode");
        if (m != "simulate" && m != "fit" && m != "evaluate")
            throw InvalidConfiguration("mode must be simulate, fit or evaluate");
        c.mode = m;
    }
    if (j.contains("dgp")) c.dgp = static_cast<int>(get_int(j["dgp"], "dgp"));
    if (c.dgp != 1 && c.dgp != 2) throw InvalidConfiguration("dgp must be 1 or 2");
    if (j.contains("n")) {
        const auto n = get_int(j["n"], "n");
        if (n < 2) throw InvalidConfiguration("n must be at least 2");
        c.n = static_cast<std::size_t>(n);
    }
    if (j.contains("reps")) {
        const auto r = get_int(j["reps"], "reps");
        if (r < 1) throw InvalidConfiguration("reps must be at least 1");
        c.reps = static_cast<int>(r);
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<std::int64_t>() >= 0))
            throw InvalidConfiguration("seed must be a nonnegative integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("library"))
        c.libraries = parse_choice<Library>(j["library"], "library", parse_library, c.any_all);
    if (j.contains("metalearner"))
        c.metalearners = parse_choice<Metalearner>(j["metalearner"], "metalearner", parse_metalearner, c.any_all);
    if (j.contains("risk")) c.risks = parse_choice<Risk>(j["risk"], "risk", parse_risk, c.any_all);
    if (j.contains("folds")) {
        const auto f = get_int(j["folds"], "folds");
        if (f < 2) throw InvalidConfiguration("folds must be at least 2");
        c.folds = static_cast<int>(f);
    }
    if (j.contains("input_csv")) c.input_csv = get_as<std::string>(j["input_csv"], "input_csv");
    if (j.contains("output_dir")) c.output_dir = get_as<std::string>(j["output_dir"], "output_dir");
    if (j.contains("full_scale")) c.full_scale = get_as<bool>(j["full_scale"], "full_scale");
    if (j.contains("negate_y")) c.negate_y = get_as<bool>(j["negate_y"], "negate_y");
    if (j.contains("model")) c.model = get_as<std::string>(j["model"], "model");
    if (j.contains("reference_rule")) {
        const auto r = get_as<std::string>(j["reference_rule"], "reference_rule");
        if (r == "optimal") c.reference_rule = ReferenceRule::Optimal;
        else if (r == "treat_all") c.reference_rule = ReferenceRule::TreatAll;
        else if (r == "treat_none") c.reference_rule = ReferenceRule::TreatNone;
        else throw InvalidConfiguration("reference_rule must be optimal, treat_all or treat_none");
    }
    if (j.contains("evaluation_sample")) {
        const auto e = get_as<std::string>(j["evaluation_sample"], "evaluation_sample");
        if (e == "fresh") c.evaluation = EvaluationSample::Fresh;
        else if (e == "estimation") c.evaluation = EvaluationSample::Estimation;
        else throw InvalidConfiguration("evaluation_sample must be fresh or estimation");
    }
    if (j.contains("eval_rows")) {
        const auto e = get_int(j["eval_rows"], "eval_rows");
        if (e < 1) throw InvalidConfiguration("eval_rows must be positive");
        c.eval_rows = static_cast<std::size_t>(e);
    }
    return c;
}

RunConfig read_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfiguration("cannot open config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidConfiguration("config file " + path + " is not valid JSON: " + e.what());
    }
    return parse_run_config(j);
}

std::vector<EnsembleConfig> expand_configs(const RunConfig& c) {
    const std::vector<Library> libs =
        c.libraries.empty() ? std::vector<Library>(std::begin(kAllLibraries), std::end(kAllLibraries)) : c.libraries;
    const std::vector<Metalearner> metas =
        c.metalearners.empty() ? std::vector<Metalearner>(std::begin(kAllMetalearners), std::end(kAllMetalearners))
                               : c.metalearners;
    const std::vector<Risk> risks =
        c.risks.empty() ? std::vector<Risk>(std::begin(kAllRisks), std::end(kAllRisks)) : c.risks;
    std::vector<EnsembleConfig> out;
    for (Library l : libs)
        for (Metalearner m : metas)
            for (Risk r : risks) {
                EnsembleConfig e{l, m, r, c.folds, c.seed};
                if (c.any_all && config_violation(e)) continue;
                out.push_back(validate_config(e));
            }
    if (out.empty()) throw InvalidConfiguration("no valid configuration in the requested set");
    return out;
}

std::string format_number(double x) {
    if (!std::isfinite(x)) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

void write_summary_csv(std::ostream& out, const MetricsReport& report) {
    out << "config,reps_ok,reps_failed,mean_accuracy,mean_regret,var_regret,relative_variance,"
           "mean_value,value_p025,value_p975,mean_fraction_treated\n";
    for (const auto& s : report.summary)
        out << s.config << ',' << s.reps_ok << ',' << s.reps_failed << ',' << format_number(s.mean_accuracy)
            << ',' << format_number(s.mean_regret) << ',' << format_number(s.var_regret) << ','
            << format_number(s.relative_variance) << ',' << format_number(s.mean_value) << ','
            << format_number(s.value_p025) << ',' << format_number(s.value_p975) << ','
            << format_number(s.mean_fraction_treated) << '\n';
}

void write_replications_csv(std::ostream& out, const MetricsReport& report) {
    out << "replication,config,ok,accuracy,value,regret,fraction_treated,cv_risk,error\n";
    for (const auto& r : report.replications) {
        std::string err = r.error;
        std::replace(err.begin(), err.end(), '"', '\'');
        out << r.replication << ',' << r.config << ',' << (r.ok ? 1 : 0) << ',';
        if (r.ok)
            out << format_number(r.metrics.accuracy) << ',' << format_number(r.metrics.value) << ','
                << format_number(r.metrics.regret) << ',' << format_number(r.metrics.fraction_treated)
                << ',' << (r.config == kBaselineLabel ? "NA" : format_number(r.cv_risk));
        else
            out << "NA,NA,NA,NA,NA";
        out << ",\"" << err << "\"\n";
    }
}

}  // namespace odtr::io
