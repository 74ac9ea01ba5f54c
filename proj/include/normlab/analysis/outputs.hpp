#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "normlab/analysis/evaluate.hpp"

namespace normlab::analysis {

/// Distribution of the largest logit (the output of the most likely class).
struct OutputHistogram {
    double lo = 0, hi = 0;
    std::vector<std::size_t> counts;
    double mean = 0;
    double std = 0;   // population std
    std::size_t total = 0;
};

inline OutputHistogram histogram_of(std::span<const double> values, std::size_t bins) {
    if (bins == 0) throw ConfigError("histogram needs at least one bin");
    if (values.empty()) throw ConfigError("histogram of no values");
    OutputHistogram h;
    h.counts.assign(bins, 0);
    h.total = values.size();
    h.lo = *std::min_element(values.begin(), values.end());
    h.hi = *std::max_element(values.begin(), values.end());
    for (double v : values) h.mean += v;
    h.mean /= double(values.size());
    for (double v : values) h.std += (v - h.mean) * (v - h.mean);
    h.std = std::sqrt(h.std / double(values.size()));
    const double width = (h.hi - h.lo) / double(bins);
    for (double v : values) {
        std::size_t b = width > 0 ? std::size_t((v - h.lo) / width) : 0;
        h.counts[std::min(b, bins - 1)]++;
    }
    return h;
}

template <typename S>
OutputHistogram output_histogram(const nn::Network<S>& net, const data::Dataset& ds, std::size_t bins) {
    const auto logits = predict(net, ds);
    const std::size_t k = net.class_count();
    std::vector<double> top(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const S* z = logits.data() + i * k;
        top[i] = double(z[nn::argmax(z, k)]);
    }
    return histogram_of(top, bins);
}

}  // namespace normlab::analysis
