#pragma once

#include <cstdint>
#include <vector>

#include "normlab/nn/forward.hpp"

namespace normlab::nn {

/// SGD with heavy-ball momentum. Defaults are declared choices (lr 0.01,
/// momentum 0.9, batch 64); every run records the values it used.
struct OptimizerState {
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    std::size_t epoch = 0;
    std::vector<std::vector<double>> velocity;  // lazily sized to the trainable arrays

    void validate() const {
        if (!(learning_rate >= 0)) throw ConfigError("learning rate must be non-negative");
        if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must lie in [0,1)");
        if (batch_size < 1) throw ConfigError("batch size must be positive");
    }

    void reset() {
        velocity.clear();
        epoch = 0;
    }
};

/// v <- momentum * v + g ; w <- w - lr * v
template <typename S>
void sgd_step(Network<S>& net, const Gradients<S>& grads, OptimizerState& opt) {
    auto params = net.trainable();
    if (params.size() != grads.arrays.size()) throw ShapeError("gradient set does not match the network");
    if (opt.velocity.size() != params.size()) {
        opt.velocity.clear();
        for (const auto* p : params) opt.velocity.emplace_back(p->size(), 0.0);
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor<S>& w = *params[k];
        const Tensor<S>& g = grads.arrays[k];
        if (g.size() != w.size()) throw ShapeError("gradient array " + std::to_string(k) + " has the wrong size");
        auto& v = opt.velocity[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
            v[i] = opt.momentum * v[i] + double(g[i]);
            w[i] = S(double(w[i]) - opt.learning_rate * v[i]);
        }
    }
}

}  // namespace normlab::nn
