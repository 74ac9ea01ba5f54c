#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "normlab/data/dataset.hpp"
#include "normlab/nn/forward.hpp"

namespace normlab::analysis {

struct EvalReport {
    std::string dataset_id;
    double loss = 0;
    double error = 0;
    std::size_t count = 0;
};

/// Mean cross-entropy and classification error over a whole dataset (eval mode,
/// fixed batch order so the result is reproducible).
template <typename S>
EvalReport evaluate(const nn::Network<S>& net, const data::Dataset& ds, std::size_t batch_size = 250) {
    ds.validate();
    if (ds.class_count != net.class_count())
        throw ConfigError("dataset has " + std::to_string(ds.class_count) + " classes, network " +
                          std::to_string(net.class_count()));
    EvalReport rep;
    rep.dataset_id = ds.provenance.source_digest;
    rep.count = ds.size();
    double loss_sum = 0;
    std::size_t wrong = 0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < ds.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, ds.size() - start);
        idx.resize(n);
        std::iota(idx.begin(), idx.end(), start);
        const auto x = ds.gather<S>(idx);
        const auto y = ds.gather_labels(idx);
        const auto logits = nn::forward(net, x, nn::Mode::eval);
        loss_sum += nn::loss_crossentropy(logits, y) * double(n);
        wrong += nn::count_errors(logits, y);
    }
    rep.loss = loss_sum / double(ds.size());
    rep.error = double(wrong) / double(ds.size());
    return rep;
}

/// Logits of every row, in dataset order.
template <typename S>
Tensor<S> predict(const nn::Network<S>& net, const data::Dataset& ds, std::size_t batch_size = 250) {
    Tensor<S> out({ds.size(), net.class_count()});
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < ds.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, ds.size() - start);
        idx.resize(n);
        std::iota(idx.begin(), idx.end(), start);
        const auto logits = nn::forward(net, ds.gather<S>(idx), nn::Mode::eval);
        std::copy(logits.values().begin(), logits.values().end(), out.data() + start * net.class_count());
    }
    return out;
}

}  // namespace normlab::analysis
