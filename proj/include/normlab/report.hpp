#pragma once

// Plot-ready data for a finished run: one two-column text file per panel.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "normlab/analysis/outputs.hpp"
#include "normlab/protocols/checkpoint.hpp"
#include "normlab/protocols/config.hpp"
#include "normlab/results.hpp"

namespace normlab {

inline void write_series(const std::filesystem::path& path, const std::vector<std::pair<double, double>>& xy,
                         const std::string& header) {
    std::ofstream f(path);
    if (!f) throw FormatError("cannot write '" + path.string() + "'");
    f << "# " << header << "\n" << std::setprecision(9);
    for (const auto& [x, y] : xy) f << x << ' ' << y << "\n";
}

struct ReportOptions {
    bool histograms = true;   // needs the point checkpoints and the dataset files
    std::size_t bins = 50;
};

/// Writes the panel files under <run_dir>/plots and returns their paths.
inline std::vector<std::filesystem::path> write_report(const std::filesystem::path& run_dir,
                                                       const ReportOptions& opts = {}) {
    const auto csv = run_dir / "results.csv";
    if (!std::filesystem::exists(csv)) throw ConfigError("'" + run_dir.string() + "' contains no results.csv");
    const auto table = read_results_csv(csv.string());
    if (table.rows.empty()) throw ConfigError("results table in '" + run_dir.string() + "' has no rows");
    const auto out = run_dir / "plots";
    std::filesystem::create_directories(out);
    std::vector<std::filesystem::path> files;
    auto emit = [&](const std::string& name, const std::vector<std::pair<double, double>>& xy, const std::string& hdr) {
        write_series(out / name, xy, hdr);
        files.push_back(out / name);
    };
    auto pairs = [&](const std::string& x, const std::string& y) {
        std::vector<std::pair<double, double>> xy;
        for (const auto& r : table.rows) xy.emplace_back(r.column(x), r.column(y));
        return xy;
    };

    emit("unnormalized_loss.txt", pairs("train_loss", "test_loss"), "train_loss test_loss");
    emit("product_norm_vs_test_loss.txt", pairs("product_norm", "test_loss"), "product_norm test_loss");
    emit("normalized_loss.txt", pairs("norm_train_loss", "norm_test_loss"), "norm_train_loss norm_test_loss");
    emit("error_vs_normalized_loss.txt", pairs("norm_test_loss", "test_err"), "norm_test_loss test_err");
    emit("train_vs_test_error.txt", pairs("train_err", "test_err"), "train_err test_err");

    if (table.rows.size() >= 2) {
        const auto fit = fit_columns(table, "norm_train_loss", "norm_test_loss");
        double lo = table.rows[0].norm_train_loss, hi = lo;
        for (const auto& r : table.rows) {
            lo = std::min(lo, r.norm_train_loss);
            hi = std::max(hi, r.norm_train_loss);
        }
        std::vector<std::pair<double, double>> line;
        for (int i = 0; i <= 20; ++i) {
            const double x = lo + (hi - lo) * i / 20.0;
            line.emplace_back(x, fit.slope * x + fit.intercept);
        }
        emit("normalized_fit_line.txt", line, "norm_train_loss fitted_norm_test_loss");
    }

    std::vector<std::pair<double, double>> psi;
    for (int i = 0; i <= 100; ++i) psi.emplace_back(i / 100.0, analysis::psi_transform(i / 100.0));
    emit("psi_curve.txt", psi, "x psi(x)");

    const auto summary_path = run_dir / "summary.json";
    if (opts.histograms && std::filesystem::exists(summary_path)) {
        std::ifstream f(summary_path);
        const auto summary = nlohmann::json::parse(f);
        const auto cfg = protocols::ExperimentConfig::from_json(summary.at("config"));
        const auto data = protocols::load_datasets(cfg.dataset);
        std::size_t i = 0;
        for (const auto& p : summary.at("points")) {
            for (const char* which : {"checkpoint", "normalized_checkpoint"}) {
                const std::string rel = p.value(which, "");
                if (rel.empty()) continue;
                const auto ck = protocols::load_checkpoint((run_dir / "points" / rel).string());
                const auto h = analysis::output_histogram(ck.network, data.train, opts.bins);
                std::vector<std::pair<double, double>> xy;
                const double w = (h.hi - h.lo) / double(h.counts.size());
                for (std::size_t b = 0; b < h.counts.size(); ++b) xy.emplace_back(h.lo + (b + 0.5) * w, double(h.counts[b]));
                std::ostringstream name;
                name << "histogram_point" << i << "_" << (std::string(which) == "checkpoint" ? "unnormalized" : "normalized")
                     << ".txt";
                std::ostringstream hdr;
                hdr << "bin_center count (mean " << std::setprecision(9) << h.mean << " std " << h.std << ")";
                emit(name.str(), xy, hdr.str());
            }
            ++i;
        }
    }
    return files;
}

}  // namespace normlab
