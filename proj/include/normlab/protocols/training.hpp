#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "normlab/analysis/evaluate.hpp"
#include "normlab/data/labels.hpp"
#include "normlab/nn/optimizer.hpp"

namespace normlab::protocols {

/// Network state at the end of one training epoch.
struct Snapshot {
    std::size_t epoch = 0;
    std::shared_ptr<const nn::Network<float>> weights;
    std::string checkpoint;   // path, when persisted
    double train_loss = 0;
    double train_error = 0;
    double wall_seconds = 0;
};

/// One pass over `ds` in an order drawn from (opt.seed, opt.epoch).
/// Returns the mean minibatch loss seen during the pass.
template <typename S>
double train_epoch(nn::Network<S>& net, const data::Dataset& ds, nn::OptimizerState& opt) {
    opt.validate();
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(opt.seed ^ (0x9e3779b97f4a7c15ULL * (opt.epoch + 1)));
    for (std::size_t i = order.size(); i-- > 1;) std::swap(order[i], order[data::uniform_index(rng, i + 1)]);

    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
        const std::size_t n = std::min(opt.batch_size, order.size() - start);
        std::span<const std::size_t> idx(order.data() + start, n);
        const auto x = ds.gather<S>(idx);
        const auto y = ds.gather_labels(idx);
        nn::ForwardTrace<S> trace;
        const auto grads = nn::backward(net, x, y, nn::Mode::train, &trace);
        if (!std::isfinite(grads.loss)) throw NumericError("training diverged: non-finite minibatch loss");
        nn::sgd_step(net, grads, opt);
        nn::update_running_statistics(net, trace);
        loss_sum += grads.loss * double(n);
    }
    ++opt.epoch;
    return loss_sum / double(ds.size());
}

using EpochCallback = std::function<void(const Snapshot&)>;

/// Trains for `epochs` epochs and snapshots the network after each one,
/// recording its full-dataset (eval-mode) loss and error.
inline std::vector<Snapshot> train_with_snapshots(nn::Network<float>& net, const data::Dataset& ds,
                                                  nn::OptimizerState& opt, std::size_t epochs,
                                                  const EpochCallback& on_epoch = {}) {
    std::vector<Snapshot> snaps;
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t e = 0; e < epochs; ++e) {
        train_epoch(net, ds, opt);
        const auto rep = analysis::evaluate(net, ds);
        if (!std::isfinite(rep.loss)) throw NumericError("training diverged: non-finite training loss");
        Snapshot s;
        s.epoch = opt.epoch;
        s.weights = std::make_shared<const nn::Network<float>>(net);
        s.train_loss = rep.loss;
        s.train_error = rep.error;
        s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (on_epoch) on_epoch(s);
        snaps.push_back(std::move(s));
    }
    return snaps;
}

/// Snapshot whose training loss is closest to `reference_loss`; ties go to
/// the earliest epoch.
inline const Snapshot& select_snapshot(std::span<const Snapshot> snaps, double reference_loss) {
    if (snaps.empty()) throw ConfigError("no snapshots to select from");
    std::size_t best = 0;
    for (std::size_t i = 1; i < snaps.size(); ++i)
        if (std::abs(snaps[i].train_loss - reference_loss) < std::abs(snaps[best].train_loss - reference_loss))
            best = i;
    return snaps[best];
}

}  // namespace normlab::protocols
