#pragma once

#include <span>
#include <vector>

#include "normlab/nn/kernels.hpp"
#include "normlab/nn/loss.hpp"
#include "normlab/nn/network.hpp"

namespace normlab::nn {

/// Batch norm uses batch statistics in train mode and running statistics in eval mode.
enum class Mode { train, eval };

/// Per-layer inputs (and batch-norm statistics) retained for the backward pass.
template <typename S>
struct ForwardTrace {
    std::vector<Tensor<S>> inputs;                     // inputs[i] feeds layer i
    std::vector<kernels::BatchStats<S>> batch_stats;   // indexed by layer; empty for non-BN
};

namespace detail {

inline std::size_t batch_of(const Shape& shape, const Shape& per_example) {
    if (shape.empty()) throw ShapeError("batch tensor has no extents");
    if (element_count(shape) != shape[0] * element_count(per_example))
        throw ShapeError("batch " + shape_string(shape) + " does not match input extents " + shape_string(per_example));
    return shape[0];
}

inline Shape batched(std::size_t n, const Shape& per_example) {
    Shape s{n};
    s.insert(s.end(), per_example.begin(), per_example.end());
    return s;
}

inline std::size_t spatial_of(const Shape& per_example) {
    std::size_t s = 1;
    for (std::size_t i = 1; i < per_example.size(); ++i) s *= per_example[i];
    return s;
}

template <typename S>
Tensor<S> layer_forward(const Layer<S>& layer, const Tensor<S>& x, std::size_t n, Mode mode,
                        kernels::BatchStats<S>* stats) {
    Tensor<S> y(batched(n, layer.out_shape));
    const auto& sp = layer.spec;
    switch (sp.kind) {
        case LayerKind::conv: {
            kernels::ConvGeometry g{layer.in_shape[0], layer.in_shape[1], layer.in_shape[2], sp.filters,
                                    sp.kernel_h, sp.stride};
            kernels::conv_forward(x.data(), n, g, layer.weight.data(), sp.has_bias ? layer.bias.data() : nullptr,
                                  y.data());
            break;
        }
        case LayerKind::dense:
            kernels::dense_forward(x.data(), n, sp.fan_in, sp.filters, layer.weight.data(),
                                   sp.has_bias ? layer.bias.data() : nullptr, y.data());
            break;
        case LayerKind::relu:
            for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > S(0) ? x[i] : S(0);
            break;
        case LayerKind::batchnorm: {
            const std::size_t c = layer.in_shape[0], spatial = spatial_of(layer.in_shape);
            if (mode == Mode::train) {
                auto st = kernels::batch_statistics(x.data(), n, c, spatial);
                kernels::batchnorm_apply(x.data(), n, c, spatial, st.mean, st.var, sp.bn_eps, layer.gamma.data(),
                                         layer.beta.data(), y.data());
                if (stats) *stats = std::move(st);
            } else {
                std::vector<double> mean(layer.running_mean.values().begin(), layer.running_mean.values().end());
                std::vector<double> var(layer.running_var.values().begin(), layer.running_var.values().end());
                for (double v : var)
                    if (!(v + sp.bn_eps > 0)) throw NumericError("batch-norm variance + eps is not positive");
                kernels::batchnorm_apply(x.data(), n, c, spatial, mean, var, sp.bn_eps, layer.gamma.data(),
                                         layer.beta.data(), y.data());
            }
            break;
        }
    }
    return y;
}

}  // namespace detail

/// Runs the layer stack; optionally records what backward() needs.
template <typename S>
Tensor<S> forward(const Network<S>& net, const Tensor<S>& batch, Mode mode, ForwardTrace<S>* trace = nullptr) {
    const std::size_t n = detail::batch_of(batch.shape(), net.input_shape());
    Tensor<S> x = batch;
    x.reshape(detail::batched(n, net.input_shape()));
    if (trace) {
        trace->inputs.clear();
        trace->batch_stats.assign(net.layers().size(), {});
    }
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        const auto& layer = net.layers()[i];
        Tensor<S> y = detail::layer_forward(layer, x, n, mode, trace ? &trace->batch_stats[i] : nullptr);
        if (!y.all_finite())
            throw NumericError("non-finite activation after layer " + std::to_string(i) + " (" +
                               to_string(layer.spec.kind) + ")");
        if (trace) trace->inputs.push_back(std::move(x));
        x = std::move(y);
    }
    x.reshape({n, element_count(net.output_shape())});
    return x;
}

/// Gradients aligned with Network::trainable().
template <typename S>
struct Gradients {
    std::vector<Tensor<S>> arrays;
    double loss = 0;
};

/// Gradient of the minibatch mean cross-entropy with respect to every
/// trainable array. `trace_out`, when given, receives the forward trace
/// (the trainer uses its batch statistics to update running averages).
template <typename S>
Gradients<S> backward(const Network<S>& net, const Tensor<S>& batch, std::span<const Label> labels, Mode mode,
                      ForwardTrace<S>* trace_out = nullptr) {
    ForwardTrace<S> local;
    ForwardTrace<S>& trace = trace_out ? *trace_out : local;
    Tensor<S> logits = forward(net, batch, mode, &trace);
    const std::size_t n = logits.dim(0);

    Gradients<S> grads;
    grads.loss = loss_crossentropy(logits, labels);
    for (const auto* t : net.trainable()) grads.arrays.emplace_back(t->shape());

    // locate each layer's first gradient slot
    std::vector<std::size_t> slot(net.layers().size(), 0);
    for (std::size_t i = 0, k = 0; i < net.layers().size(); ++i) {
        slot[i] = k;
        const auto& sp = net.layers()[i].spec;
        if (sp.weighted()) k += sp.has_bias ? 2 : 1;
        if (sp.kind == LayerKind::batchnorm) k += 2;
    }

    Tensor<S> delta = crossentropy_gradient(logits, labels);
    for (std::size_t i = net.layers().size(); i-- > 0;) {
        const auto& layer = net.layers()[i];
        const auto& sp = layer.spec;
        const Tensor<S>& x = trace.inputs[i];
        const bool need_dx = i > 0;
        Tensor<S> dx(need_dx ? x.shape() : Shape{0});
        S* dxp = need_dx ? dx.data() : nullptr;
        switch (sp.kind) {
            case LayerKind::conv: {
                kernels::ConvGeometry g{layer.in_shape[0], layer.in_shape[1], layer.in_shape[2], sp.filters,
                                        sp.kernel_h, sp.stride};
                kernels::conv_backward(x.data(), n, g, layer.weight.data(), delta.data(), grads.arrays[slot[i]].data(),
                                       sp.has_bias ? grads.arrays[slot[i] + 1].data() : nullptr, dxp);
                break;
            }
            case LayerKind::dense:
                kernels::dense_backward(x.data(), n, sp.fan_in, sp.filters, layer.weight.data(), delta.data(),
                                        grads.arrays[slot[i]].data(),
                                        sp.has_bias ? grads.arrays[slot[i] + 1].data() : nullptr, dxp);
                break;
            case LayerKind::relu:
                if (need_dx)
                    for (std::size_t j = 0; j < x.size(); ++j) dxp[j] = x[j] > S(0) ? delta[j] : S(0);
                break;
            case LayerKind::batchnorm: {
                const std::size_t c = layer.in_shape[0], spatial = detail::spatial_of(layer.in_shape);
                std::vector<double> mean, var;
                if (mode == Mode::train) {
                    mean = trace.batch_stats[i].mean;
                    var = trace.batch_stats[i].var;
                } else {
                    mean.assign(layer.running_mean.values().begin(), layer.running_mean.values().end());
                    var.assign(layer.running_var.values().begin(), layer.running_var.values().end());
                }
                kernels::batchnorm_backward(x.data(), n, c, spatial, mean, var, sp.bn_eps, mode == Mode::train,
                                            layer.gamma.data(), delta.data(), grads.arrays[slot[i]].data(),
                                            grads.arrays[slot[i] + 1].data(), dxp);
                break;
            }
        }
        if (need_dx) delta = std::move(dx);
    }
    for (std::size_t k = 0; k < grads.arrays.size(); ++k) grads.arrays[k].require_finite("gradient array " + std::to_string(k));
    return grads;
}

/// Folds train-mode batch statistics into the running averages
/// (running_var uses the unbiased estimate).
template <typename S>
void update_running_statistics(Network<S>& net, const ForwardTrace<S>& trace) {
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        auto& layer = net.layers()[i];
        if (layer.spec.kind != LayerKind::batchnorm) continue;
        const auto& st = trace.batch_stats[i];
        if (st.mean.empty()) continue;
        const double m = layer.spec.bn_momentum;
        const double unbias = st.count > 1 ? double(st.count) / double(st.count - 1) : 1.0;
        for (std::size_t c = 0; c < st.mean.size(); ++c) {
            layer.running_mean[c] = S((1 - m) * layer.running_mean[c] + m * st.mean[c]);
            layer.running_var[c] = S((1 - m) * layer.running_var[c] + m * st.var[c] * unbias);
        }
    }
}

}  // namespace normlab::nn
