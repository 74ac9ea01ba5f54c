#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "normlab/data/loaders.hpp"
#include "normlab/data/standardizer.hpp"
#include "normlab/data/labels.hpp"
#include "normlab/nn/architectures.hpp"
#include "normlab/nn/optimizer.hpp"
#include "normlab/normalize.hpp"

namespace normlab::protocols {

enum class ProtocolKind { pretrain_sweep, init_std_sweep, random_labels };

inline std::string to_string(ProtocolKind k) {
    switch (k) {
        case ProtocolKind::pretrain_sweep: return "pretrain-sweep";
        case ProtocolKind::init_std_sweep: return "init-std-sweep";
        case ProtocolKind::random_labels: return "random-labels";
    }
    return "?";
}

inline ProtocolKind parse_protocol(const std::string& s) {
    if (s == "pretrain-sweep") return ProtocolKind::pretrain_sweep;
    if (s == "init-std-sweep") return ProtocolKind::init_std_sweep;
    if (s == "random-labels") return ProtocolKind::random_labels;
    throw ConfigError("unknown protocol '" + s + "' (pretrain-sweep, init-std-sweep, random-labels)");
}

/// Where the data lives and how much of it to use.
struct DatasetSpec {
    std::string format = "idx";   // idx | cifar10 | cifar100
    std::string train_images, train_labels, test_images, test_labels;   // idx
    std::vector<std::string> train_files, test_files;                   // cifar
    std::size_t train_subset = 0;   // 0 = all
    std::size_t test_subset = 0;
    std::uint64_t subset_seed = 0;
};

/// One experiment. Defaults that fill gaps in the method description are
/// echoed into every run summary via to_json().
struct ExperimentConfig {
    std::string architecture = "mnist3x34";
    DatasetSpec dataset;
    ProtocolKind protocol = ProtocolKind::init_std_sweep;
    std::vector<double> sweep_values;
    std::size_t pretrain_epochs = 30;
    std::size_t train_epochs = 80;
    double reference_loss = 0.006;
    double reference_band = 2.0;      // flag when no snapshot lies in [ref/band, ref*band]
    std::string init_scheme = "fan-in";   // pretrain-sweep initialization: fan-in | gaussian
    double init_std = 0.05;               // used when init_scheme = gaussian
    bool random_label_point = false;      // append an RL point to a sweep
    double random_label_std = 0.05;
    std::size_t random_label_epochs = 300;
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 64;
    std::uint64_t seed = 1;
    std::string norm = "fro";
    std::string output_dir = "run";
    std::size_t workers = 1;
    double bound_delta = 0.05;
    double offset_threshold = 0.15;
    std::size_t histogram_bins = 50;

    void validate() const {
        nn::architecture_input_shape(architecture);
        if (protocol != ProtocolKind::random_labels) {
            if (sweep_values.empty()) throw ConfigError("sweep_values must be non-empty");
            for (std::size_t i = 1; i < sweep_values.size(); ++i)
                if (!(sweep_values[i] > sweep_values[i - 1]))
                    throw ConfigError("sweep_values must be strictly increasing");
        }
        if (protocol == ProtocolKind::pretrain_sweep)
            for (double f : sweep_values)
                if (f < 0 || f > 1) throw ConfigError("corruption fractions must lie in [0,1]");
        if (protocol == ProtocolKind::init_std_sweep)
            for (double s : sweep_values)
                if (!(s > 0)) throw ConfigError("initialization stds must be positive");
        if (train_epochs < 1) throw ConfigError("train_epochs must be >= 1");
        if (protocol == ProtocolKind::pretrain_sweep && pretrain_epochs < 1)
            throw ConfigError("pretrain_epochs must be >= 1");
        if ((random_label_point || protocol == ProtocolKind::random_labels) && random_label_epochs < 1)
            throw ConfigError("random_label_epochs must be >= 1");
        if (!(reference_loss > 0)) throw ConfigError("reference_loss must be positive");
        if (!(reference_band >= 1)) throw ConfigError("reference_band must be >= 1");
        if (init_scheme != "fan-in" && init_scheme != "gaussian")
            throw ConfigError("init_scheme must be fan-in or gaussian");
        if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
        if (workers < 1) throw ConfigError("workers must be >= 1");
        NormKind::parse(norm);
        if (dataset.format != "idx" && dataset.format != "cifar10" && dataset.format != "cifar100")
            throw ConfigError("dataset.format must be idx, cifar10 or cifar100");
    }

    nn::OptimizerState optimizer() const {
        nn::OptimizerState opt;
        opt.learning_rate = learning_rate;
        opt.momentum = momentum;
        opt.batch_size = batch_size;
        opt.seed = seed;
        return opt;
    }

    nlohmann::json to_json() const {
        nlohmann::json d{{"format", dataset.format},
                         {"train_subset", dataset.train_subset},
                         {"test_subset", dataset.test_subset},
                         {"subset_seed", dataset.subset_seed}};
        if (dataset.format == "idx") {
            d["train_images"] = dataset.train_images;
            d["train_labels"] = dataset.train_labels;
            d["test_images"] = dataset.test_images;
            d["test_labels"] = dataset.test_labels;
        } else {
            d["train_files"] = dataset.train_files;
            d["test_files"] = dataset.test_files;
        }
        return {{"architecture", architecture},
                {"dataset", d},
                {"protocol", to_string(protocol)},
                {"sweep_values", sweep_values},
                {"pretrain_epochs", pretrain_epochs},
                {"train_epochs", train_epochs},
                {"reference_loss", reference_loss},
                {"reference_band", reference_band},
                {"init_scheme", init_scheme},
                {"init_std", init_std},
                {"random_label_point", random_label_point},
                {"random_label_std", random_label_std},
                {"random_label_epochs", random_label_epochs},
                {"optimizer", {{"learning_rate", learning_rate}, {"momentum", momentum}, {"batch_size", batch_size}}},
                {"seed", seed},
                {"norm", norm},
                {"output_dir", output_dir},
                {"workers", workers},
                {"bound", {{"delta", bound_delta}, {"offset_threshold", offset_threshold}}},
                {"histogram_bins", histogram_bins}};
    }

    /// Relative paths are resolved against `base_dir`.
    static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
        static const std::vector<std::string> known = {
            "architecture", "dataset", "protocol", "sweep_values", "pretrain_epochs", "train_epochs",
            "reference_loss", "reference_band", "init_scheme", "init_std", "random_label_point",
            "random_label_std", "random_label_epochs", "optimizer", "seed", "norm", "output_dir", "workers",
            "bound", "histogram_bins"};
        for (const auto& [key, _] : j.items())
            if (std::find(known.begin(), known.end(), key) == known.end())
                throw ConfigError("unknown config key '" + key + "'");
        ExperimentConfig c;
        auto resolve = [&](const std::string& p) {
            if (p.empty() || std::filesystem::path(p).is_absolute() || base_dir.empty()) return p;
            return (base_dir / p).lexically_normal().string();
        };
        try {
            c.architecture = j.value("architecture", c.architecture);
            if (j.contains("dataset")) {
                const auto& d = j["dataset"];
                c.dataset.format = d.value("format", c.dataset.format);
                c.dataset.train_images = resolve(d.value("train_images", ""));
                c.dataset.train_labels = resolve(d.value("train_labels", ""));
                c.dataset.test_images = resolve(d.value("test_images", ""));
                c.dataset.test_labels = resolve(d.value("test_labels", ""));
                for (const auto& p : d.value("train_files", std::vector<std::string>{}))
                    c.dataset.train_files.push_back(resolve(p));
                for (const auto& p : d.value("test_files", std::vector<std::string>{}))
                    c.dataset.test_files.push_back(resolve(p));
                c.dataset.train_subset = d.value("train_subset", std::size_t{0});
                c.dataset.test_subset = d.value("test_subset", std::size_t{0});
                c.dataset.subset_seed = d.value("subset_seed", std::uint64_t{0});
            }
            if (j.contains("protocol")) c.protocol = parse_protocol(j["protocol"].get<std::string>());
            c.sweep_values = j.value("sweep_values", c.sweep_values);
            c.pretrain_epochs = j.value("pretrain_epochs", c.pretrain_epochs);
            c.train_epochs = j.value("train_epochs", c.train_epochs);
            c.reference_loss = j.value("reference_loss", c.reference_loss);
            c.reference_band = j.value("reference_band", c.reference_band);
            c.init_scheme = j.value("init_scheme", c.init_scheme);
            c.init_std = j.value("init_std", c.init_std);
            c.random_label_point = j.value("random_label_point", c.random_label_point);
            c.random_label_std = j.value("random_label_std", c.random_label_std);
            c.random_label_epochs = j.value("random_label_epochs", c.random_label_epochs);
            if (j.contains("optimizer")) {
                const auto& o = j["optimizer"];
                c.learning_rate = o.value("learning_rate", c.learning_rate);
                c.momentum = o.value("momentum", c.momentum);
                c.batch_size = o.value("batch_size", c.batch_size);
            }
            c.seed = j.value("seed", c.seed);
            c.norm = j.value("norm", c.norm);
            c.output_dir = resolve(j.value("output_dir", c.output_dir));
            c.workers = j.value("workers", c.workers);
            if (j.contains("bound")) {
                c.bound_delta = j["bound"].value("delta", c.bound_delta);
                c.offset_threshold = j["bound"].value("offset_threshold", c.offset_threshold);
            }
            c.histogram_bins = j.value("histogram_bins", c.histogram_bins);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("bad config value: ") + e.what());
        }
        c.validate();
        return c;
    }

    static ExperimentConfig load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open config '" + path + "'");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(f, nullptr, true, true);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("'" + path + "': " + e.what());
        }
        return from_json(j, std::filesystem::path(path).parent_path());
    }
};

/// Standardized train/test pair; the standardizer is fitted on train only.
struct Datasets {
    data::Dataset train;
    data::Dataset test;
    data::Standardizer standardizer;
};

inline Datasets load_datasets(const DatasetSpec& spec, std::size_t class_count_hint = 0) {
    Datasets d;
    if (spec.format == "idx") {
        const std::size_t classes = class_count_hint ? class_count_hint : 10;
        d.train = data::load_idx(spec.train_images, spec.train_labels, classes);
        d.test = data::load_idx(spec.test_images, spec.test_labels, classes);
    } else {
        const auto v = spec.format == "cifar10" ? data::CifarVariant::cifar10 : data::CifarVariant::cifar100;
        d.train = data::load_cifar_binary(spec.train_files, v);
        d.test = data::load_cifar_binary(spec.test_files, v);
    }
    if (spec.train_subset) d.train = data::subset(d.train, spec.train_subset, spec.subset_seed);
    if (spec.test_subset) d.test = data::subset(d.test, spec.test_subset, spec.subset_seed + 1);
    d.standardizer = data::fit_standardizer(d.train);
    d.train = data::apply_standardizer(d.standardizer, d.train);
    d.test = data::apply_standardizer(d.standardizer, d.test);
    return d;
}

}  // namespace normlab::protocols
