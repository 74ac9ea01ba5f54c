#pragma once

#include <array>
#include <string>
#include <string_view>

#include "normlab/nn/network.hpp"

namespace normlab::nn {

inline constexpr std::array<std::string_view, 3> kArchitectureNames = {"cifar3x24", "mnist3x34", "conv5"};

/// Input extents of the dataset each catalog entry was designed for.
inline Shape architecture_input_shape(std::string_view name) {
    if (name == "mnist3x34") return {1, 28, 28};
    if (name == "cifar3x24" || name == "conv5") return {3, 32, 32};
    throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

/// Catalog networks.
///
/// cifar3x24 / mnist3x34: two valid stride-1 5x5 convolutions with ReLU
/// (bias on the first only), no pooling, then a bias-free dense layer to the
/// logits. conv5: four 3x3 stride-2 valid convolutions of 32, 64, 64, 128
/// filters each followed by batch norm and ReLU, then a dense layer.
template <typename Scalar = float>
Network<Scalar> build_architecture(std::string_view name, std::size_t class_count) {
    if (class_count != 2 && class_count != 10 && class_count != 100)
        throw ConfigError("class_count must be 2, 10 or 100, got " + std::to_string(class_count));
    Network<Scalar> net(std::string(name), architecture_input_shape(name), class_count);
    if (name == "cifar3x24" || name == "mnist3x34") {
        const std::size_t filters = name == "cifar3x24" ? 24 : 34;
        net.add_conv(filters, 5, 1, true).add_relu();
        net.add_conv(filters, 5, 1, false).add_relu();
        net.add_dense(class_count, false);
    } else {
        for (std::size_t filters : {32, 64, 64, 128}) net.add_conv(filters, 3, 2, false).add_batchnorm().add_relu();
        net.add_dense(class_count, false);
    }
    net.validate();
    return net;
}

}  // namespace normlab::nn
