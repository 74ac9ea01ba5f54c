#pragma once

// Results table (CSV) and run summary (JSON).

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "normlab/analysis/bounds.hpp"
#include "normlab/analysis/statistics.hpp"
#include "normlab/protocols/experiment.hpp"

namespace normlab {

inline constexpr int kResultsTableVersion = 1;
inline constexpr std::array<const char*, 15> kResultsColumns = {
    "sweep_kind", "sweep_value", "seed", "epochs", "train_loss", "train_err", "test_loss", "test_err",
    "norm_kind", "norm_train_loss", "norm_test_loss", "norm_train_err", "norm_test_err", "product_norm",
    "selected_epoch"};

/// Rounds to 9 significant digits, the precision the table is written with.
inline double round9(double v) {
    if (!std::isfinite(v) || v == 0) return v;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::strtod(buf, nullptr);
}

inline std::string format9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

struct ResultsRow {
    std::string sweep_kind;
    double sweep_value = 0;
    std::uint64_t seed = 0;
    std::size_t epochs = 0;
    double train_loss = 0, train_err = 0, test_loss = 0, test_err = 0;
    std::string norm_kind;
    double norm_train_loss = 0, norm_test_loss = 0, norm_train_err = 0, norm_test_err = 0;
    double product_norm = 0;
    std::size_t selected_epoch = 0;

    static ResultsRow from_record(const protocols::RunRecord& r) {
        ResultsRow row;
        row.sweep_kind = r.sweep_kind;
        row.sweep_value = round9(r.sweep_value);
        row.seed = r.seed;
        row.epochs = r.epochs;
        row.train_loss = round9(r.train.loss);
        row.train_err = round9(r.train.error);
        row.test_loss = round9(r.test.loss);
        row.test_err = round9(r.test.error);
        row.norm_kind = r.norm_kind;
        row.norm_train_loss = round9(r.norm_train.loss);
        row.norm_test_loss = round9(r.norm_test.loss);
        row.norm_train_err = round9(r.norm_train.error);
        row.norm_test_err = round9(r.norm_test.error);
        row.product_norm = round9(r.product_norm);
        row.selected_epoch = r.selected_epoch;
        return row;
    }

    /// Numeric column by name.
    double column(const std::string& name) const {
        if (name == "sweep_value") return sweep_value;
        if (name == "seed") return double(seed);
        if (name == "epochs") return double(epochs);
        if (name == "train_loss") return train_loss;
        if (name == "train_err") return train_err;
        if (name == "test_loss") return test_loss;
        if (name == "test_err") return test_err;
        if (name == "norm_train_loss") return norm_train_loss;
        if (name == "norm_test_loss") return norm_test_loss;
        if (name == "norm_train_err") return norm_train_err;
        if (name == "norm_test_err") return norm_test_err;
        if (name == "product_norm") return product_norm;
        if (name == "selected_epoch") return double(selected_epoch);
        throw ConfigError("unknown numeric column '" + name + "'");
    }

    friend bool operator==(const ResultsRow&, const ResultsRow&) = default;
};

struct ResultsTable {
    std::vector<ResultsRow> rows;

    static ResultsTable from_records(const std::vector<protocols::RunRecord>& records) {
        ResultsTable t;
        for (const auto& r : records) t.rows.push_back(ResultsRow::from_record(r));
        return t;
    }

    std::vector<double> column(const std::string& name) const {
        std::vector<double> out;
        for (const auto& r : rows) out.push_back(r.column(name));
        return out;
    }

    friend bool operator==(const ResultsTable&, const ResultsTable&) = default;
};

inline std::string emit_results_csv(const ResultsTable& t) {
    std::ostringstream os;
    os << "# normlab results v" << kResultsTableVersion << "\n";
    for (std::size_t i = 0; i < kResultsColumns.size(); ++i) os << (i ? "," : "") << kResultsColumns[i];
    os << "\n";
    for (const auto& r : t.rows) {
        for (double v : {r.train_loss, r.train_err, r.test_loss, r.test_err, r.norm_train_loss, r.norm_test_loss,
                         r.norm_train_err, r.norm_test_err, r.product_norm, r.sweep_value})
            if (!std::isfinite(v)) throw NumericError("non-finite value in results row");
        os << r.sweep_kind << ',' << format9(r.sweep_value) << ',' << r.seed << ',' << r.epochs << ','
           << format9(r.train_loss) << ',' << format9(r.train_err) << ',' << format9(r.test_loss) << ','
           << format9(r.test_err) << ',' << r.norm_kind << ',' << format9(r.norm_train_loss) << ','
           << format9(r.norm_test_loss) << ',' << format9(r.norm_train_err) << ',' << format9(r.norm_test_err)
           << ',' << format9(r.product_norm) << ',' << r.selected_epoch << "\n";
    }
    return os.str();
}

inline ResultsTable parse_results_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != "# normlab results v" + std::to_string(kResultsTableVersion))
        throw FormatError("results table: missing or unsupported version line");
    std::string expected;
    for (std::size_t i = 0; i < kResultsColumns.size(); ++i) expected += (i ? "," : "") + std::string(kResultsColumns[i]);
    if (!std::getline(is, line) || line != expected) throw FormatError("results table: unexpected header row");
    ResultsTable t;
    std::size_t lineno = 2;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
        if (f.size() != kResultsColumns.size())
            throw FormatError("results table line " + std::to_string(lineno) + ": expected " +
                              std::to_string(kResultsColumns.size()) + " fields");
        try {
            ResultsRow r;
            r.sweep_kind = f[0];
            r.sweep_value = std::stod(f[1]);
            r.seed = std::stoull(f[2]);
            r.epochs = std::stoull(f[3]);
            r.train_loss = std::stod(f[4]);
            r.train_err = std::stod(f[5]);
            r.test_loss = std::stod(f[6]);
            r.test_err = std::stod(f[7]);
            r.norm_kind = f[8];
            r.norm_train_loss = std::stod(f[9]);
            r.norm_test_loss = std::stod(f[10]);
            r.norm_train_err = std::stod(f[11]);
            r.norm_test_err = std::stod(f[12]);
            r.product_norm = std::stod(f[13]);
            r.selected_epoch = std::stoull(f[14]);
            t.rows.push_back(r);
        } catch (const std::logic_error&) {
            throw FormatError("results table line " + std::to_string(lineno) + ": unparsable number");
        }
    }
    return t;
}

inline ResultsTable read_results_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_results_csv(ss.str());
}

inline nlohmann::json fit_json(const analysis::LinearFit& f) {
    return {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2},
            {"adjusted_r2", f.adjusted_r2}, {"rmse", f.rmse}, {"n", f.count}};
}

/// Fit of column y against column x over the rows accepted by `keep`.
inline analysis::LinearFit fit_columns(const ResultsTable& t, const std::string& x, const std::string& y,
                                       const std::function<bool(const ResultsRow&)>& keep = {}) {
    std::vector<analysis::Point> pts;
    for (const auto& r : t.rows)
        if (!keep || keep(r)) pts.push_back({r.column(x), r.column(y)});
    return analysis::linear_fit(pts);
}

/// Machine-readable summary: echoed config, fits, correlations and the bound report.
inline nlohmann::json build_summary(const protocols::ExperimentConfig& cfg, const std::vector<protocols::RunRecord>& recs,
                                    std::size_t train_size) {
    const auto table = ResultsTable::from_records(recs);
    nlohmann::json s;
    s["results_version"] = kResultsTableVersion;
    s["config"] = cfg.to_json();
    s["train_size"] = train_size;
    s["points"] = nlohmann::json::array();
    for (const auto& r : recs) s["points"].push_back(r.to_json());
    auto guarded = [&](const char* key, auto&& f) {
        try {
            s[key] = f();
        } catch (const Error& e) {
            s[key] = {{"error", e.what()}};
        }
    };
    guarded("fit_normalized", [&] { return fit_json(fit_columns(table, "norm_train_loss", "norm_test_loss")); });
    guarded("fit_normalized_natural_only", [&] {
        return fit_json(fit_columns(table, "norm_train_loss", "norm_test_loss",
                                    [](const ResultsRow& r) { return r.sweep_kind != "random-labels"; }));
    });
    guarded("fit_unnormalized", [&] { return fit_json(fit_columns(table, "train_loss", "test_loss")); });
    guarded("spearman_product_norm_test_loss",
            [&] { return analysis::spearman(table.column("product_norm"), table.column("test_loss")); });
    guarded("spearman_norm_test_loss_test_err",
            [&] { return analysis::spearman(table.column("norm_test_loss"), table.column("test_err")); });
    guarded("bound", [&] {
        std::vector<analysis::Point> pts;
        for (const auto& r : table.rows) pts.push_back({r.norm_train_loss, r.norm_test_loss});
        const auto b = analysis::bound_report(pts, cfg.bound_delta, train_size, cfg.offset_threshold);
        return nlohmann::json{{"gaps", b.gaps}, {"max_gap", b.max_gap}, {"mean_gap", b.mean_gap},
                              {"offset", b.offset}, {"slope", b.fit.slope},
                              {"confidence_term", b.confidence_term}, {"delta", b.delta}, {"n", b.sample_size},
                              {"offset_threshold", b.threshold}, {"tight", b.tight}, {"caveat", b.caveat}};
    });
    bool flagged = false;
    for (const auto& r : recs) flagged |= !r.reference_reached;
    s["reference_band_warning"] = flagged;
    return s;
}

}  // namespace normlab
