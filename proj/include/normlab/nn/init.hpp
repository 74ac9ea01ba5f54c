#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "normlab/nn/network.hpp"

namespace normlab::nn {

/// Every conv/dense weight i.i.d. N(0, std^2); biases zero; batch norm reset
/// to the identity (gamma 1, beta 0, running mean 0, running var 1).
template <typename S>
void init_gaussian(Network<S>& net, double std, std::uint64_t seed) {
    if (!(std >= 0)) throw ConfigError("initialization std must be non-negative");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& l : net.layers()) {
        if (l.spec.weighted()) {
            for (auto& w : l.weight.values()) w = S(std * normal(rng));
            l.bias.fill(S(0));
        } else if (l.spec.kind == LayerKind::batchnorm) {
            l.gamma.fill(S(1));
            l.beta.fill(S(0));
            l.running_mean.fill(S(0));
            l.running_var.fill(S(1));
        }
    }
}

/// Fan-in scaled uniform initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
/// for weights and biases (the usual framework default).
template <typename S>
void init_fan_in(Network<S>& net, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& l : net.layers()) {
        if (l.spec.weighted()) {
            const double bound = 1.0 / std::sqrt(double(l.spec.fan_in));
            std::uniform_real_distribution<double> u(-bound, bound);
            for (auto& w : l.weight.values()) w = S(u(rng));
            for (auto& b : l.bias.values()) b = S(u(rng));
        } else if (l.spec.kind == LayerKind::batchnorm) {
            l.gamma.fill(S(1));
            l.beta.fill(S(0));
            l.running_mean.fill(S(0));
            l.running_var.fill(S(1));
        }
    }
}

}  // namespace normlab::nn
