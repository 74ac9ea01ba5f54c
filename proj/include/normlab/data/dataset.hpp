#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "normlab/nn/loss.hpp"
#include "normlab/tensor.hpp"

namespace normlab::data {

using nn::Label;

/// Where a dataset came from and what was done to it.
struct Provenance {
    std::string source;             // file path(s)
    std::string source_digest;      // FNV-1a of the decoded source bytes
    double corruption_fraction = 0;
    std::uint64_t corruption_seed = 0;
    bool random_labels = false;
    std::string standardizer_id = "none";
    std::size_t subset_of = 0;      // original N when subsampled, else 0
    std::uint64_t subset_seed = 0;
};

/// Images [N,C,H,W] in float plus one integer label per row.
struct Dataset {
    Tensor<float> images;
    std::vector<Label> labels;
    std::size_t class_count = 0;
    Provenance provenance;

    std::size_t size() const noexcept { return labels.size(); }
    Shape example_shape() const { return Shape(images.shape().begin() + 1, images.shape().end()); }
    std::size_t example_size() const { return element_count(example_shape()); }

    void validate() const {
        if (labels.empty()) throw ConfigError("dataset is empty");
        if (images.rank() != 4 || images.dim(0) != labels.size())
            throw ShapeError("dataset images " + shape_string(images.shape()) + " do not match " +
                             std::to_string(labels.size()) + " labels");
        for (Label y : labels)
            if (y < 0 || std::size_t(y) >= class_count)
                throw ConfigError("label " + std::to_string(y) + " outside [0," + std::to_string(class_count) + ")");
    }

    /// Copies rows `idx` into a batch tensor.
    template <typename S = float>
    Tensor<S> gather(std::span<const std::size_t> idx) const {
        Shape shape = images.shape();
        shape[0] = idx.size();
        Tensor<S> out(shape);
        const std::size_t w = example_size();
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const float* src = images.data() + idx[i] * w;
            std::copy(src, src + w, out.data() + i * w);
        }
        return out;
    }

    std::vector<Label> gather_labels(std::span<const std::size_t> idx) const {
        std::vector<Label> out(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
        return out;
    }
};

}  // namespace normlab::data
