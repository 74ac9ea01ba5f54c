#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "normlab/data/dataset.hpp"

namespace normlab::data {

/// Which labels were swapped and how: label of selected[i] is replaced by
/// the original label of selected[permutation[i]].
struct CorruptionPlan {
    double fraction = 0;
    std::uint64_t seed = 0;
    std::vector<std::size_t> selected;
    std::vector<std::size_t> permutation;
};

/// round(fraction * n) with halves rounded up.
inline std::size_t corruption_count(double fraction, std::size_t n) {
    return std::size_t(std::floor(fraction * double(n) + 0.5));
}

/// Uniform index in [0, bound) from a 64-bit engine.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t bound) {
    return std::uniform_int_distribution<std::size_t>(0, bound - 1)(rng);
}

/// Swaps labels among a random subset: round(fraction*N) indices are drawn
/// without replacement and their labels rotated by a uniformly random single
/// cycle (Sattolo), so no selected slot keeps its own label.
inline std::pair<Dataset, CorruptionPlan> corrupt_labels(const Dataset& ds, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0 && fraction <= 1)) throw ConfigError("corruption fraction must lie in [0,1]");
    const std::size_t n = ds.size();
    CorruptionPlan plan;
    plan.fraction = fraction;
    plan.seed = seed;
    const std::size_t k = corruption_count(fraction, n);
    std::mt19937_64 rng(seed);

    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i = 0; i < k; ++i) std::swap(all[i], all[i + uniform_index(rng, n - i)]);
    plan.selected.assign(all.begin(), all.begin() + std::ptrdiff_t(k));

    plan.permutation.resize(k);
    std::iota(plan.permutation.begin(), plan.permutation.end(), 0);
    for (std::size_t i = k; i-- > 1;) std::swap(plan.permutation[i], plan.permutation[uniform_index(rng, i)]);

    Dataset out = ds;
    for (std::size_t i = 0; i < k; ++i) out.labels[plan.selected[i]] = ds.labels[plan.selected[plan.permutation[i]]];
    out.provenance.corruption_fraction = fraction;
    out.provenance.corruption_seed = seed;
    return {std::move(out), std::move(plan)};
}

/// Every label redrawn i.i.d. uniform over the classes.
inline Dataset randomize_all_labels(const Dataset& ds, std::uint64_t seed) {
    if (ds.class_count < 1) throw ConfigError("dataset has no classes");
    Dataset out = ds;
    std::mt19937_64 rng(seed);
    for (auto& y : out.labels) y = Label(uniform_index(rng, ds.class_count));
    out.provenance.random_labels = true;
    out.provenance.corruption_fraction = 1.0;
    out.provenance.corruption_seed = seed;
    return out;
}

/// n rows sampled without replacement, in sampled order.
inline Dataset subset(const Dataset& ds, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ConfigError("subset size must be positive");
    if (n > ds.size())
        throw ConfigError("subset of " + std::to_string(n) + " from " + std::to_string(ds.size()) + " examples");
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + uniform_index(rng, ds.size() - i)]);
    idx.resize(n);
    Dataset out;
    out.images = ds.gather<float>(idx);
    out.labels = ds.gather_labels(idx);
    out.class_count = ds.class_count;
    out.provenance = ds.provenance;
    out.provenance.subset_of = ds.size();
    out.provenance.subset_seed = seed;
    return out;
}

}  // namespace normlab::data
