// normlab command line: ingest, sweep, normalize, evaluate, fit, report, demo-linear.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "normlab/analysis/linear_demo.hpp"
#include "normlab/protocols/experiment.hpp"
#include "normlab/report.hpp"
#include "normlab/results.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace normlab;

namespace {

void write_json(const fs::path& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw FormatError("cannot write '" + path.string() + "'");
    f << j.dump(2) << "\n";
}

std::vector<std::string> dataset_files(const protocols::DatasetSpec& d) {
    if (d.format == "idx") return {d.train_images, d.train_labels, d.test_images, d.test_labels};
    auto out = d.train_files;
    out.insert(out.end(), d.test_files.begin(), d.test_files.end());
    return out;
}

json split_json(const data::Dataset& ds) {
    std::vector<std::size_t> hist(ds.class_count, 0);
    for (auto l : ds.labels) ++hist[std::size_t(l)];
    return {{"count", ds.size()}, {"class_count", ds.class_count}, {"shape", ds.example_shape()},
            {"label_histogram", hist}, {"source", ds.provenance.source},
            {"source_digest", ds.provenance.source_digest}};
}

int cmd_ingest(const std::string& config_path, const std::string& out_dir, std::size_t subset_size) {
    auto cfg = protocols::ExperimentConfig::load(config_path);
    if (subset_size) cfg.dataset.train_subset = subset_size;
    for (const auto& f : dataset_files(cfg.dataset))
        if (f.empty() || !fs::exists(f)) throw ConfigError("dataset file not found: '" + f + "'");

    json files = json::array();
    Fnv1a64 combined;
    for (const auto& f : dataset_files(cfg.dataset)) {
        const auto digest = protocols::file_digest(f);
        combined.update(std::string_view(digest));
        files.push_back({{"path", f}, {"digest", digest}, {"bytes", fs::file_size(f)}});
    }
    const auto data = protocols::load_datasets(cfg.dataset);
    json manifest{{"format", cfg.dataset.format},
                  {"files", files},
                  {"digest", combined.hex()},
                  {"train_subset", cfg.dataset.train_subset},
                  {"test_subset", cfg.dataset.test_subset},
                  {"subset_seed", cfg.dataset.subset_seed},
                  {"train", split_json(data.train)},
                  {"test", split_json(data.test)},
                  {"standardizer",
                   {{"id", data.standardizer.id()}, {"mean", data.standardizer.mean}, {"std", data.standardizer.std}}}};

    const fs::path dir = out_dir.empty() ? fs::path(cfg.output_dir) / "dataset" : fs::path(out_dir);
    const auto path = dir / "manifest.json";
    if (fs::exists(path)) {
        std::ifstream f(path);
        const auto old = json::parse(f, nullptr, false);
        if (!old.is_discarded() && old == manifest) {
            std::cout << "unchanged " << path.string() << " (digest " << manifest["digest"].get<std::string>() << ")\n";
            return 0;
        }
    }
    fs::create_directories(dir);
    write_json(path, manifest);
    std::cout << "wrote " << path.string() << ": " << data.train.size() << " train, " << data.test.size()
              << " test, digest " << manifest["digest"].get<std::string>() << "\n";
    return 0;
}

struct SweepArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::size_t subset_size = 0;
    bool resume = false;
    bool quiet = false;
};

int cmd_sweep(const SweepArgs& a) {
    auto cfg = protocols::ExperimentConfig::load(a.config);
    if (a.seed) cfg.seed = *a.seed;
    if (a.workers) cfg.workers = *a.workers;
    if (a.subset_size) cfg.dataset.train_subset = a.subset_size;
    cfg.validate();
    const auto data = protocols::load_datasets(cfg.dataset);
    std::cerr << "train " << data.train.size() << " / test " << data.test.size() << " examples, "
              << protocols::plan_points(cfg).size() << " points\n";

    protocols::RunOptions opts;
    opts.resume = a.resume;
    if (!a.quiet) opts.log = protocols::stderr_logger();
    const auto recs = protocols::run_experiment(cfg, data, opts);

    const fs::path root = cfg.output_dir;
    fs::create_directories(root);
    const auto table = ResultsTable::from_records(recs);
    std::ofstream(root / "results.csv") << emit_results_csv(table);
    const auto summary = build_summary(cfg, recs, data.train.size());
    write_json(root / "summary.json", summary);
    std::cout << "wrote " << (root / "results.csv").string() << " and " << (root / "summary.json").string() << "\n";
    if (summary["fit_normalized"].contains("slope"))
        std::cout << "normalized fit: slope " << summary["fit_normalized"]["slope"] << " intercept "
                  << summary["fit_normalized"]["intercept"] << " R2 " << summary["fit_normalized"]["r2"] << "\n";
    if (summary["reference_band_warning"].get<bool>())
        std::cerr << "warning: at least one point never came near the reference training loss\n";
    return 0;
}

Tensor<float> random_inputs(const Shape& example, std::size_t n, std::uint64_t seed) {
    Shape s{n};
    s.insert(s.end(), example.begin(), example.end());
    Tensor<float> t(s);
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> g(0.f, 1.f);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = g(rng);
    return t;
}

int cmd_normalize(const std::string& in, const std::string& norm, std::string out, std::size_t samples,
                  std::uint64_t seed) {
    const auto ck = protocols::load_checkpoint(in);
    if (ck.normalized) throw ConfigError("'" + in + "' is already normalized (" + *ck.normalized + ")");
    const auto kind = NormKind::parse(norm);
    const auto inputs = random_inputs(ck.network.input_shape(), samples, seed);
    const auto original = nn::forward(ck.network, inputs, nn::Mode::eval);

    json report{{"source", in}, {"norm", kind.name()}, {"samples", samples}};
    nn::Network<float> plain = ck.network;
    if (ck.network.has_batchnorm()) {
        plain = absorb_batchnorm(ck.network);
        const double dev = relative_deviation(nn::forward(plain, inputs, nn::Mode::eval), original);
        report["batchnorm_absorbed"] = true;
        report["absorption_deviation"] = dev;
    } else {
        report["batchnorm_absorbed"] = false;
    }
    auto nz = normalize_layerwise(plain, kind);
    nz.source_digest = protocols::file_digest(in);
    const auto normalized = nn::forward(nz.network, inputs, nn::Mode::eval);
    const double dev = relative_deviation(normalized, original, nz.product_norm);
    bool same_argmax = true;
    const std::size_t k = original.dim(1);
    for (std::size_t r = 0; r < samples; ++r)
        if (!nn::has_tied_max(original.data() + r * k, k) &&
            nn::argmax(original.data() + r * k, k) != nn::argmax(normalized.data() + r * k, k))
            same_argmax = false;
    report["rho"] = nz.rho;
    report["product_norm"] = nz.product_norm;
    report["equivalence_deviation"] = dev;
    report["argmax_identical"] = same_argmax;

    if (out.empty()) out = (fs::path(in).parent_path() / (fs::path(in).stem().string() + "." + kind.name() + ".ngc")).string();
    auto meta = ck.meta;
    meta["normalize_report"] = report;
    report["output"] = out;
    report["output_digest"] = protocols::save_checkpoint(protocols::normalized_checkpoint(nz, meta), out);
    std::cout << report.dump(2) << "\n";
    // float32 forward passes; anything beyond this is a real mismatch
    if (dev > 1e-4 || !same_argmax) {
        std::cerr << "error: normalized network is not equivalent to the source\n";
        return 3;
    }
    return 0;
}

int cmd_evaluate(const std::string& ckpt, const std::string& config_path, const std::string& split) {
    const auto ck = protocols::load_checkpoint(ckpt);
    const auto cfg = protocols::ExperimentConfig::load(config_path);
    const auto data = protocols::load_datasets(cfg.dataset, ck.network.class_count());
    json out{{"checkpoint", ckpt}, {"digest", protocols::file_digest(ckpt)}};
    if (ck.normalized) out["normalized"] = *ck.normalized;
    auto ev = [](const analysis::EvalReport& r) {
        return json{{"dataset", r.dataset_id}, {"loss", r.loss}, {"error", r.error}, {"n", r.count}};
    };
    if (split == "train" || split == "both") out["train"] = ev(analysis::evaluate(ck.network, data.train));
    if (split == "test" || split == "both") out["test"] = ev(analysis::evaluate(ck.network, data.test));
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_fit(const std::string& csv, const std::string& x, const std::string& y, const std::vector<std::string>& kinds,
            const std::vector<double>& values) {
    const auto table = read_results_csv(csv);
    auto keep = [&](const ResultsRow& r) {
        if (!kinds.empty() && std::find(kinds.begin(), kinds.end(), r.sweep_kind) == kinds.end()) return false;
        if (!values.empty() &&
            std::none_of(values.begin(), values.end(), [&](double v) { return round9(v) == r.sweep_value; }))
            return false;
        return true;
    };
    const auto fit = fit_columns(table, x, y, keep);
    auto j = fit_json(fit);
    j["x"] = x;
    j["y"] = y;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_report(const std::string& run_dir, bool histograms, std::size_t bins) {
    if (!fs::is_directory(run_dir)) throw ConfigError("'" + run_dir + "' is not a directory");
    ReportOptions opts;
    opts.histograms = histograms;
    opts.bins = bins;
    for (const auto& f : write_report(run_dir, opts)) std::cout << f.string() << "\n";
    return 0;
}

int cmd_demo_linear(std::size_t n, std::size_t d, std::uint64_t seed, double lr, std::size_t iters) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXd x(n, d);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) x(i, j) = g(rng);
        y(i) = g(rng) < 0 ? -1.0 : 1.0;
    }
    if (lr <= 0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(x.transpose() * x / double(n), Eigen::EigenvaluesOnly);
        lr = 1.0 / eig.eigenvalues().maxCoeff();
    }
    const auto rep = analysis::min_norm_gd_demo(x, y, lr, iters);
    const Eigen::VectorXd pinv = x.completeOrthogonalDecomposition().solve(y);
    json out{{"examples", n},
             {"dimension", d},
             {"seed", seed},
             {"learning_rate", rep.learning_rate},
             {"learning_rate_limit", rep.lr_limit},
             {"iterations", rep.iterations},
             {"final_loss", rep.final_loss},
             {"norm", rep.norm},
             {"min_norm", pinv.norm()},
             {"distance_to_min_norm", (rep.weights - pinv).norm()},
             {"max_orthogonal_component", rep.max_orthogonal},
             {"margin", rep.margin}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"normlab: layerwise-normalized generalization experiments"};
    app.require_subcommand(1);

    auto* ingest = app.add_subcommand("ingest", "load and standardize a dataset, write a provenance manifest");
    std::string ingest_config, ingest_out;
    std::size_t ingest_subset = 0;
    ingest->add_option("--config", ingest_config, "experiment config (dataset section)")->required();
    ingest->add_option("--out", ingest_out, "manifest directory (default <output_dir>/dataset)");
    ingest->add_option("--subset-size", ingest_subset, "training subset size");

    auto* sweep = app.add_subcommand("sweep", "run the configured protocol");
    SweepArgs sa;
    sweep->add_option("--config", sa.config, "experiment config")->required();
    sweep->add_option("--seed", sa.seed, "override the master seed");
    sweep->add_option("--workers", sa.workers, "concurrent sweep points");
    sweep->add_option("--subset-size", sa.subset_size, "training subset size");
    sweep->add_flag("--resume", sa.resume, "skip points whose checkpoint digest matches their record");
    sweep->add_flag("--quiet", sa.quiet, "no per-epoch log");

    auto* normalize = app.add_subcommand("normalize", "absorb batch norm and normalize a checkpoint layerwise");
    std::string norm_in, norm_kind = "fro", norm_out;
    std::size_t norm_samples = 100;
    std::uint64_t norm_seed = 1;
    normalize->add_option("checkpoint", norm_in, "input checkpoint")->required();
    normalize->add_option("--norm", norm_kind, "fro | l1 | linf");
    normalize->add_option("-o,--out", norm_out, "output checkpoint");
    normalize->add_option("--samples", norm_samples, "random inputs for the equivalence check");
    normalize->add_option("--seed", norm_seed, "seed for the equivalence inputs");

    auto* evaluate = app.add_subcommand("evaluate", "loss and error of a checkpoint");
    std::string eval_ckpt, eval_config, eval_split = "both";
    evaluate->add_option("checkpoint", eval_ckpt)->required();
    evaluate->add_option("--config", eval_config, "config naming the dataset")->required();
    evaluate->add_option("--split", eval_split)->check(CLI::IsMember({"train", "test", "both"}));

    auto* fit = app.add_subcommand("fit", "least-squares fit between two results columns");
    std::string fit_csv, fit_x = "norm_train_loss", fit_y = "norm_test_loss";
    std::vector<std::string> fit_kinds;
    std::vector<double> fit_values;
    fit->add_option("results", fit_csv, "results.csv")->required();
    fit->add_option("--x", fit_x);
    fit->add_option("--y", fit_y);
    fit->add_option("--kinds", fit_kinds, "keep rows of these sweep kinds")->delimiter(',');
    fit->add_option("--values", fit_values, "keep rows with these sweep values")->delimiter(',');

    auto* report = app.add_subcommand("report", "write plot data for a finished run");
    std::string report_dir;
    bool no_hist = false;
    std::size_t bins = 50;
    report->add_option("run_dir", report_dir)->required();
    report->add_flag("--no-histograms", no_hist, "skip the output histograms");
    report->add_option("--bins", bins);

    auto* demo = app.add_subcommand("demo-linear", "gradient descent to the minimum-norm solution");
    std::size_t demo_n = 20, demo_d = 100, demo_iters = 20000;
    std::uint64_t demo_seed = 1;
    double demo_lr = 0;
    demo->add_option("--examples", demo_n);
    demo->add_option("--dimension", demo_d);
    demo->add_option("--seed", demo_seed);
    demo->add_option("--lr", demo_lr, "step size (default 1/lambda_max)");
    demo->add_option("--iterations", demo_iters);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*ingest) return cmd_ingest(ingest_config, ingest_out, ingest_subset);
        if (*sweep) return cmd_sweep(sa);
        if (*normalize) return cmd_normalize(norm_in, norm_kind, norm_out, norm_samples, norm_seed);
        if (*evaluate) return cmd_evaluate(eval_ckpt, eval_config, eval_split);
        if (*fit) return cmd_fit(fit_csv, fit_x, fit_y, fit_kinds, fit_values);
        if (*report) return cmd_report(report_dir, !no_hist, bins);
        if (*demo) return cmd_demo_linear(demo_n, demo_d, demo_seed, demo_lr, demo_iters);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
