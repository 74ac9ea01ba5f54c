#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "normlab/tensor.hpp"

namespace normlab::nn {

enum class LayerKind { conv, dense, relu, batchnorm };

inline std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv: return "conv";
        case LayerKind::dense: return "dense";
        case LayerKind::relu: return "relu";
        case LayerKind::batchnorm: return "batchnorm";
    }
    return "?";
}

inline LayerKind parse_layer_kind(const std::string& s) {
    if (s == "conv") return LayerKind::conv;
    if (s == "dense") return LayerKind::dense;
    if (s == "relu") return LayerKind::relu;
    if (s == "batchnorm") return LayerKind::batchnorm;
    throw ConfigError("unknown layer kind '" + s + "'");
}

/// Static description of one layer. `filters` is the output channel count for
/// conv and the output width for dense; `fan_in` is the input width of one
/// output unit (C*kh*kw for conv, flattened input width for dense).
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::size_t filters = 0;
    std::size_t kernel_h = 0;
    std::size_t kernel_w = 0;
    std::size_t stride = 1;
    bool has_bias = false;
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
    double bn_eps = 1e-5;
    double bn_momentum = 0.1;

    bool weighted() const noexcept { return kind == LayerKind::conv || kind == LayerKind::dense; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

template <typename Scalar>
struct Layer {
    LayerSpec spec;
    Shape in_shape;   // per-example extents, e.g. {C,H,W}
    Shape out_shape;
    Tensor<Scalar> weight;        // conv: [O,C,kh,kw]; dense: [O,F]
    Tensor<Scalar> bias;          // [O] or empty
    Tensor<Scalar> gamma, beta;   // batchnorm only, [C]
    Tensor<Scalar> running_mean, running_var;

    template <typename To>
    Layer<To> cast() const {
        Layer<To> out;
        out.spec = spec;
        out.in_shape = in_shape;
        out.out_shape = out_shape;
        out.weight = weight.template cast<To>();
        out.bias = bias.template cast<To>();
        out.gamma = gamma.template cast<To>();
        out.beta = beta.template cast<To>();
        out.running_mean = running_mean.template cast<To>();
        out.running_var = running_var.template cast<To>();
        return out;
    }
};

/// Ordered layer stack acting on per-example inputs of extents `input_shape`.
template <typename Scalar>
class Network {
public:
    Network() = default;
    Network(std::string name, Shape input_shape, std::size_t class_count)
        : name_(std::move(name)), input_shape_(std::move(input_shape)), class_count_(class_count) {
        if (input_shape_.empty() || element_count(input_shape_) == 0)
            throw ShapeError("network input shape must be non-empty");
    }

    const std::string& name() const noexcept { return name_; }
    void set_name(std::string name) { name_ = std::move(name); }
    const Shape& input_shape() const noexcept { return input_shape_; }
    std::size_t class_count() const noexcept { return class_count_; }
    const std::vector<Layer<Scalar>>& layers() const noexcept { return layers_; }
    std::vector<Layer<Scalar>>& layers() noexcept { return layers_; }
    const Shape& output_shape() const { return layers_.empty() ? input_shape_ : layers_.back().out_shape; }

    Network& add_conv(std::size_t filters, std::size_t kernel, std::size_t stride, bool bias) {
        const Shape& in = output_shape();
        if (in.size() != 3) throw ShapeError("conv expects {C,H,W} input, got " + shape_string(in));
        if (kernel < 1 || stride < 1 || filters < 1)
            throw ShapeError("conv kernel, stride and filter count must be >= 1");
        if (kernel > in[1] || kernel > in[2])
            throw ShapeError("conv kernel " + std::to_string(kernel) + " exceeds input " + shape_string(in));
        Layer<Scalar> l;
        l.spec.kind = LayerKind::conv;
        l.spec.filters = filters;
        l.spec.kernel_h = l.spec.kernel_w = kernel;
        l.spec.stride = stride;
        l.spec.has_bias = bias;
        l.spec.fan_in = in[0] * kernel * kernel;
        l.spec.fan_out = filters * kernel * kernel;
        l.in_shape = in;
        l.out_shape = {filters, (in[1] - kernel) / stride + 1, (in[2] - kernel) / stride + 1};
        l.weight = Tensor<Scalar>({filters, in[0], kernel, kernel});
        if (bias) l.bias = Tensor<Scalar>({filters});
        layers_.push_back(std::move(l));
        return *this;
    }

    Network& add_dense(std::size_t outputs, bool bias) {
        if (outputs < 1) throw ShapeError("dense layer needs at least one output");
        const Shape& in = output_shape();
        Layer<Scalar> l;
        l.spec.kind = LayerKind::dense;
        l.spec.filters = outputs;
        l.spec.has_bias = bias;
        l.spec.fan_in = element_count(in);
        l.spec.fan_out = outputs;
        l.in_shape = in;
        l.out_shape = {outputs};
        l.weight = Tensor<Scalar>({outputs, l.spec.fan_in});
        if (bias) l.bias = Tensor<Scalar>({outputs});
        layers_.push_back(std::move(l));
        return *this;
    }

    Network& add_relu() {
        Layer<Scalar> l;
        l.spec.kind = LayerKind::relu;
        l.in_shape = l.out_shape = output_shape();
        layers_.push_back(std::move(l));
        return *this;
    }

    Network& add_batchnorm(double eps = 1e-5, double momentum = 0.1) {
        const Shape& in = output_shape();
        Layer<Scalar> l;
        l.spec.kind = LayerKind::batchnorm;
        l.spec.filters = in[0];
        l.spec.bn_eps = eps;
        l.spec.bn_momentum = momentum;
        l.in_shape = l.out_shape = in;
        l.gamma = Tensor<Scalar>({in[0]}, Scalar(1));
        l.beta = Tensor<Scalar>({in[0]});
        l.running_mean = Tensor<Scalar>({in[0]});
        l.running_var = Tensor<Scalar>({in[0]}, Scalar(1));
        layers_.push_back(std::move(l));
        return *this;
    }

    /// Adds a layer described by a spec (used when rebuilding from checkpoints).
    Network& add(const LayerSpec& spec) {
        switch (spec.kind) {
            case LayerKind::conv:
                if (spec.kernel_h != spec.kernel_w) throw ShapeError("only square kernels are supported");
                return add_conv(spec.filters, spec.kernel_h, spec.stride, spec.has_bias);
            case LayerKind::dense: return add_dense(spec.filters, spec.has_bias);
            case LayerKind::relu: return add_relu();
            case LayerKind::batchnorm: return add_batchnorm(spec.bn_eps, spec.bn_momentum);
        }
        return *this;
    }

    /// Checks that the last layer emits class_count logits.
    void validate() const {
        if (element_count(output_shape()) != class_count_)
            throw ShapeError("network '" + name_ + "' emits " + std::to_string(element_count(output_shape())) +
                             " outputs for " + std::to_string(class_count_) + " classes");
    }

    bool has_batchnorm() const {
        for (const auto& l : layers_)
            if (l.spec.kind == LayerKind::batchnorm) return true;
        return false;
    }

    /// Trainable arrays in declaration order: per layer weight, bias, gamma, beta.
    std::vector<Tensor<Scalar>*> trainable() {
        std::vector<Tensor<Scalar>*> out;
        for (auto& l : layers_) {
            if (l.spec.weighted()) {
                out.push_back(&l.weight);
                if (l.spec.has_bias) out.push_back(&l.bias);
            } else if (l.spec.kind == LayerKind::batchnorm) {
                out.push_back(&l.gamma);
                out.push_back(&l.beta);
            }
        }
        return out;
    }

    std::vector<const Tensor<Scalar>*> trainable() const {
        auto out = const_cast<Network*>(this)->trainable();
        return {out.begin(), out.end()};
    }

    /// Every persisted array (trainable plus batch-norm running statistics).
    std::vector<Tensor<Scalar>*> persisted() {
        std::vector<Tensor<Scalar>*> out;
        for (auto& l : layers_) {
            if (l.spec.weighted()) {
                out.push_back(&l.weight);
                if (l.spec.has_bias) out.push_back(&l.bias);
            } else if (l.spec.kind == LayerKind::batchnorm) {
                out.push_back(&l.gamma);
                out.push_back(&l.beta);
                out.push_back(&l.running_mean);
                out.push_back(&l.running_var);
            }
        }
        return out;
    }

    std::vector<const Tensor<Scalar>*> persisted() const {
        auto out = const_cast<Network*>(this)->persisted();
        return {out.begin(), out.end()};
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto* t : trainable()) n += t->size();
        return n;
    }

    std::vector<LayerSpec> specs() const {
        std::vector<LayerSpec> out;
        for (const auto& l : layers_) out.push_back(l.spec);
        return out;
    }

    template <typename To>
    Network<To> cast() const {
        Network<To> out(name_, input_shape_, class_count_);
        for (const auto& l : layers_) out.layers().push_back(l.template cast<To>());
        return out;
    }

private:
    std::string name_;
    Shape input_shape_;
    std::size_t class_count_ = 0;
    std::vector<Layer<Scalar>> layers_;
};

template <typename Scalar>
std::size_t param_count(const Network<Scalar>& net) {
    return net.param_count();
}

}  // namespace normlab::nn
