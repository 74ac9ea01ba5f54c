#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "normlab/nn/init.hpp"
#include "normlab/protocols/checkpoint.hpp"
#include "normlab/protocols/config.hpp"
#include "normlab/protocols/training.hpp"

namespace normlab::protocols {

/// One experiment point: the selected snapshot evaluated before and after
/// layerwise normalization.
struct RunRecord {
    std::string sweep_kind;          // corruption | init-std | random-labels
    double sweep_value = 0;
    std::uint64_t seed = 0;
    std::size_t epochs = 0;          // clean-phase epochs trained
    std::size_t pretrain_epochs = 0;
    std::size_t selected_epoch = 0;
    bool reference_reached = false;
    analysis::EvalReport train, test, norm_train, norm_test;
    std::string norm_kind = "fro";
    double product_norm = 0;
    std::vector<double> rho;
    double learning_rate = 0, momentum = 0;
    std::size_t batch_size = 0;
    std::string checkpoint;          // selected snapshot (relative to the run dir)
    std::string checkpoint_digest;
    std::string normalized_checkpoint;
    std::vector<double> snapshot_losses;   // per-epoch training loss of the clean phase

    nlohmann::json to_json() const {
        auto ev = [](const analysis::EvalReport& r) {
            return nlohmann::json{{"dataset", r.dataset_id}, {"loss", r.loss}, {"error", r.error}, {"n", r.count}};
        };
        return {{"sweep_kind", sweep_kind}, {"sweep_value", sweep_value}, {"seed", seed}, {"epochs", epochs},
                {"pretrain_epochs", pretrain_epochs}, {"selected_epoch", selected_epoch},
                {"reference_reached", reference_reached}, {"train", ev(train)}, {"test", ev(test)},
                {"norm_train", ev(norm_train)}, {"norm_test", ev(norm_test)}, {"norm_kind", norm_kind},
                {"product_norm", product_norm}, {"rho", rho},
                {"optimizer", {{"learning_rate", learning_rate}, {"momentum", momentum}, {"batch_size", batch_size}}},
                {"checkpoint", checkpoint}, {"checkpoint_digest", checkpoint_digest},
                {"normalized_checkpoint", normalized_checkpoint}, {"snapshot_losses", snapshot_losses}};
    }

    static RunRecord from_json(const nlohmann::json& j) {
        auto ev = [](const nlohmann::json& e) {
            analysis::EvalReport r;
            r.dataset_id = e.at("dataset").get<std::string>();
            r.loss = e.at("loss").get<double>();
            r.error = e.at("error").get<double>();
            r.count = e.at("n").get<std::size_t>();
            return r;
        };
        RunRecord r;
        r.sweep_kind = j.at("sweep_kind").get<std::string>();
        r.sweep_value = j.at("sweep_value").get<double>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.epochs = j.at("epochs").get<std::size_t>();
        r.pretrain_epochs = j.at("pretrain_epochs").get<std::size_t>();
        r.selected_epoch = j.at("selected_epoch").get<std::size_t>();
        r.reference_reached = j.at("reference_reached").get<bool>();
        r.train = ev(j.at("train"));
        r.test = ev(j.at("test"));
        r.norm_train = ev(j.at("norm_train"));
        r.norm_test = ev(j.at("norm_test"));
        r.norm_kind = j.at("norm_kind").get<std::string>();
        r.product_norm = j.at("product_norm").get<double>();
        r.rho = j.at("rho").get<std::vector<double>>();
        r.learning_rate = j.at("optimizer").at("learning_rate").get<double>();
        r.momentum = j.at("optimizer").at("momentum").get<double>();
        r.batch_size = j.at("optimizer").at("batch_size").get<std::size_t>();
        r.checkpoint = j.at("checkpoint").get<std::string>();
        r.checkpoint_digest = j.at("checkpoint_digest").get<std::string>();
        r.normalized_checkpoint = j.value("normalized_checkpoint", "");
        r.snapshot_losses = j.value("snapshot_losses", std::vector<double>{});
        return r;
    }
};

/// Everything needed to run one sweep point.
struct PointPlan {
    std::string kind;        // corruption | init-std | random-labels
    double value = 0;
    std::string init_scheme = "gaussian";
    double init_std = 0.05;
    double corruption = -1;  // >= 0: pretrain on labels corrupted at this fraction
    bool random_labels = false;
    std::size_t epochs = 0;

    std::string dir_name(std::size_t index) const {
        std::ostringstream os;
        os << "point_" << index << "_" << kind << "_" << value;
        return os.str();
    }
};

using Logger = std::function<void(const std::string&)>;

inline Logger stderr_logger() {
    return [](const std::string& msg) { std::cerr << msg << std::endl; };
}

/// Seeds derived from the master seed; identical across sweep points so that
/// only the swept quantity differs.
struct SeedPlan {
    std::uint64_t init, order, corruption, random_labels;
    explicit SeedPlan(std::uint64_t master)
        : init(master), order(master * 1000003ULL + 17), corruption(master * 7919ULL + 3),
          random_labels(master * 104729ULL + 5) {}
};

inline std::vector<PointPlan> plan_points(const ExperimentConfig& cfg) {
    std::vector<PointPlan> plans;
    auto rl_point = [&] {
        PointPlan p;
        p.kind = "random-labels";
        p.value = 1.0;
        p.init_scheme = "gaussian";
        p.init_std = cfg.random_label_std;
        p.random_labels = true;
        p.epochs = cfg.random_label_epochs;
        return p;
    };
    switch (cfg.protocol) {
        case ProtocolKind::pretrain_sweep:
            for (double f : cfg.sweep_values) {
                PointPlan p;
                p.kind = "corruption";
                p.value = f;
                p.init_scheme = cfg.init_scheme;
                p.init_std = cfg.init_std;
                p.corruption = f;
                p.epochs = cfg.train_epochs;
                plans.push_back(p);
            }
            break;
        case ProtocolKind::init_std_sweep:
            for (double s : cfg.sweep_values) {
                PointPlan p;
                p.kind = "init-std";
                p.value = s;
                p.init_std = s;
                p.epochs = cfg.train_epochs;
                plans.push_back(p);
            }
            break;
        case ProtocolKind::random_labels: plans.push_back(rl_point()); return plans;
    }
    if (cfg.random_label_point) plans.push_back(rl_point());
    return plans;
}

/// Builds and initializes the network for a point.
inline nn::Network<float> initial_network(const ExperimentConfig& cfg, const PointPlan& plan, std::size_t classes) {
    auto net = nn::build_architecture<float>(cfg.architecture, classes);
    const SeedPlan seeds(cfg.seed);
    if (plan.init_scheme == "fan-in") nn::init_fan_in(net, seeds.init);
    else nn::init_gaussian(net, plan.init_std, seeds.init);
    return net;
}

/// Trains one point, selects its snapshot, evaluates and normalizes it.
/// When `point_dir` is non-empty the selected and normalized checkpoints and
/// record.json are written there.
inline RunRecord run_point(const ExperimentConfig& cfg, const PointPlan& plan, const Datasets& data,
                           const std::filesystem::path& point_dir = {}, const Logger& log = {}) {
    const SeedPlan seeds(cfg.seed);
    auto net = initial_network(cfg, plan, data.train.class_count);
    auto say = [&](const std::string& m) {
        if (log) log("[" + plan.kind + " " + std::to_string(plan.value) + "] " + m);
    };

    if (plan.corruption >= 0) {
        const auto corrupted = data::corrupt_labels(data.train, plan.corruption, seeds.corruption).first;
        auto opt = cfg.optimizer();
        opt.seed = seeds.order;
        for (std::size_t e = 0; e < cfg.pretrain_epochs; ++e) {
            const double loss = train_epoch(net, corrupted, opt);
            say("pretrain epoch " + std::to_string(e + 1) + " loss " + std::to_string(loss));
        }
    }

    const data::Dataset train =
        plan.random_labels ? data::randomize_all_labels(data.train, seeds.random_labels) : data.train;

    // fresh optimizer state for the clean phase
    auto opt = cfg.optimizer();
    opt.seed = seeds.order + 1;
    auto snaps = train_with_snapshots(net, train, opt, plan.epochs, [&](const Snapshot& s) {
        say("epoch " + std::to_string(s.epoch) + " train loss " + std::to_string(s.train_loss) + " error " +
            std::to_string(s.train_error));
    });
    const Snapshot& sel = select_snapshot(snaps, cfg.reference_loss);

    RunRecord rec;
    rec.sweep_kind = plan.kind;
    rec.sweep_value = plan.value;
    rec.seed = cfg.seed;
    rec.epochs = plan.epochs;
    rec.pretrain_epochs = plan.corruption >= 0 ? cfg.pretrain_epochs : 0;
    rec.selected_epoch = sel.epoch;
    rec.reference_reached = sel.train_loss <= cfg.reference_loss * cfg.reference_band &&
                            sel.train_loss >= cfg.reference_loss / cfg.reference_band;
    if (!rec.reference_reached)
        say("warning: no snapshot within a factor " + std::to_string(cfg.reference_band) + " of reference loss " +
            std::to_string(cfg.reference_loss) + "; selected loss " + std::to_string(sel.train_loss));
    for (const auto& s : snaps) rec.snapshot_losses.push_back(s.train_loss);
    rec.learning_rate = cfg.learning_rate;
    rec.momentum = cfg.momentum;
    rec.batch_size = cfg.batch_size;

    const nn::Network<float>& chosen = *sel.weights;
    rec.train = analysis::evaluate(chosen, train);
    rec.test = analysis::evaluate(chosen, data.test);

    const NormKind kind = NormKind::parse(cfg.norm);
    const auto plain = chosen.has_batchnorm() ? absorb_batchnorm(chosen) : chosen;
    auto nz = normalize_layerwise(plain, kind);
    rec.norm_kind = kind.name();
    rec.product_norm = nz.product_norm;
    rec.rho = nz.rho;
    rec.norm_train = analysis::evaluate(nz.network, train);
    rec.norm_test = analysis::evaluate(nz.network, data.test);

    if (!point_dir.empty()) {
        std::filesystem::create_directories(point_dir);
        const nlohmann::json meta{{"sweep_kind", plan.kind}, {"sweep_value", plan.value}, {"seed", cfg.seed},
                                  {"epoch", sel.epoch}, {"train_loss", sel.train_loss},
                                  {"train_error", sel.train_error}, {"test_loss", rec.test.loss}};
        rec.checkpoint = (point_dir.filename() / "checkpoint.ngc").string();
        rec.checkpoint_digest = save_checkpoint(chosen, meta, (point_dir / "checkpoint.ngc").string());
        nz.source_digest = rec.checkpoint_digest;
        auto nmeta = meta;
        nmeta["norm_train_loss"] = rec.norm_train.loss;
        nmeta["norm_test_loss"] = rec.norm_test.loss;
        rec.normalized_checkpoint = (point_dir.filename() / "normalized.ngc").string();
        save_checkpoint(normalized_checkpoint(nz, nmeta), (point_dir / "normalized.ngc").string());
        std::ofstream(point_dir / "record.json") << rec.to_json().dump(2) << "\n";
    }
    say("selected epoch " + std::to_string(rec.selected_epoch) + " train " + std::to_string(rec.train.loss) +
        " test " + std::to_string(rec.test.loss) + " normalized " + std::to_string(rec.norm_train.loss) + " / " +
        std::to_string(rec.norm_test.loss));
    return rec;
}

/// A previously completed point, if its record and checkpoint are intact.
inline std::optional<RunRecord> completed_point(const std::filesystem::path& point_dir) {
    const auto record = point_dir / "record.json";
    const auto ckpt = point_dir / "checkpoint.ngc";
    if (!std::filesystem::exists(record) || !std::filesystem::exists(ckpt)) return std::nullopt;
    try {
        std::ifstream f(record);
        auto rec = RunRecord::from_json(nlohmann::json::parse(f));
        if (rec.checkpoint_digest != file_digest(ckpt.string())) return std::nullopt;
        return rec;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

struct RunOptions {
    bool write_outputs = true;
    bool resume = false;
    Logger log;
};

/// Runs every point of the configured protocol. Points may run concurrently
/// (cfg.workers); results come back in sweep order.
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, const Datasets& data,
                                             const RunOptions& options = {}) {
    cfg.validate();
    const auto plans = plan_points(cfg);
    std::vector<std::optional<RunRecord>> results(plans.size());
    std::vector<std::exception_ptr> errors(plans.size());
    const std::filesystem::path root = cfg.output_dir;
    std::mutex log_mutex;
    Logger log = options.log ? Logger([&](const std::string& m) {
        std::lock_guard lock(log_mutex);
        options.log(m);
    })
                             : Logger{};

    auto work = [&](std::size_t i) {
        try {
            const auto dir = options.write_outputs ? root / "points" / plans[i].dir_name(i) : std::filesystem::path{};
            if (options.write_outputs && options.resume) {
                if (auto done = completed_point(dir)) {
                    if (log) log("[" + plans[i].kind + " " + std::to_string(plans[i].value) + "] resume: already complete");
                    results[i] = std::move(*done);
                    return;
                }
            }
            results[i] = run_point(cfg, plans[i], data, dir, log);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };

    const std::size_t workers = std::min(cfg.workers, plans.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < plans.size(); ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i; (i = next.fetch_add(1)) < plans.size();) work(i);
            });
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<RunRecord> out;
    for (auto& r : results) out.push_back(std::move(*r));
    return out;
}

inline std::vector<RunRecord> run_pretrain_protocol(const ExperimentConfig& cfg, const Datasets& data,
                                                    const RunOptions& options = {}) {
    if (cfg.protocol != ProtocolKind::pretrain_sweep) throw ConfigError("config protocol is not pretrain-sweep");
    return run_experiment(cfg, data, options);
}

inline std::vector<RunRecord> run_init_std_protocol(const ExperimentConfig& cfg, const Datasets& data,
                                                    const RunOptions& options = {}) {
    if (cfg.protocol != ProtocolKind::init_std_sweep) throw ConfigError("config protocol is not init-std-sweep");
    return run_experiment(cfg, data, options);
}

/// Trains and evaluates on one uniformly random relabelling of the training
/// set; the test set keeps its natural labels.
inline RunRecord run_random_label_point(const ExperimentConfig& cfg, const Datasets& data,
                                        const std::filesystem::path& point_dir = {}, const Logger& log = {}) {
    PointPlan p;
    p.kind = "random-labels";
    p.value = 1.0;
    p.init_scheme = "gaussian";
    p.init_std = cfg.random_label_std;
    p.random_labels = true;
    p.epochs = cfg.random_label_epochs;
    return run_point(cfg, p, data, point_dir, log);
}

}  // namespace normlab::protocols
