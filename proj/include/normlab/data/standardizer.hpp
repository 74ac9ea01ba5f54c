#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "normlab/data/dataset.hpp"
#include "normlab/digest.hpp"

namespace normlab::data {

/// Per-channel affine standardization fitted on a training set.
struct Standardizer {
    static constexpr double kStdFloor = 1e-8;

    std::vector<double> mean;
    std::vector<double> std;

    std::string id() const {
        Fnv1a64 h;
        for (double v : mean) h.update({reinterpret_cast<const std::uint8_t*>(&v), sizeof v});
        for (double v : std) h.update({reinterpret_cast<const std::uint8_t*>(&v), sizeof v});
        return "std-" + h.hex();
    }
};

inline Standardizer fit_standardizer(const Dataset& train) {
    train.validate();
    const std::size_t n = train.size(), c = train.images.dim(1), spatial = train.images.dim(2) * train.images.dim(3);
    Standardizer st;
    st.mean.assign(c, 0.0);
    st.std.assign(c, 0.0);
    const double count = double(n * spatial);
    for (std::size_t ch = 0; ch < c; ++ch) {
        double sum = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const float* p = train.images.data() + (i * c + ch) * spatial;
            for (std::size_t k = 0; k < spatial; ++k) sum += p[k];
        }
        const double mu = sum / count;
        double sq = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const float* p = train.images.data() + (i * c + ch) * spatial;
            for (std::size_t k = 0; k < spatial; ++k) sq += (p[k] - mu) * (p[k] - mu);
        }
        st.mean[ch] = mu;
        st.std[ch] = std::max(std::sqrt(sq / count), Standardizer::kStdFloor);
    }
    return st;
}

namespace detail {

template <typename F>
Dataset map_channels(const Standardizer& st, const Dataset& ds, F&& f) {
    const std::size_t n = ds.size(), c = ds.images.dim(1), spatial = ds.images.dim(2) * ds.images.dim(3);
    if (st.mean.size() != c) throw ShapeError("standardizer has " + std::to_string(st.mean.size()) +
                                              " channels, dataset has " + std::to_string(c));
    Dataset out = ds;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            float* p = out.images.data() + (i * c + ch) * spatial;
            for (std::size_t k = 0; k < spatial; ++k) p[k] = float(f(double(p[k]), st.mean[ch], st.std[ch]));
        }
    return out;
}

}  // namespace detail

inline Dataset apply_standardizer(const Standardizer& st, const Dataset& ds) {
    Dataset out = detail::map_channels(st, ds, [](double x, double m, double s) { return (x - m) / s; });
    out.provenance.standardizer_id = st.id();
    return out;
}

inline Dataset invert_standardizer(const Standardizer& st, const Dataset& ds) {
    Dataset out = detail::map_channels(st, ds, [](double x, double m, double s) { return x * s + m; });
    out.provenance.standardizer_id = "none";
    return out;
}

}  // namespace normlab::data
