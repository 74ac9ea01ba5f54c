#pragma once

// Batch-norm absorption and layerwise normalization of ReLU networks.
//
// A network whose weighted layers are rescaled as W_k -> c_k W_k and whose
// biases are rescaled by the running product c_1...c_k computes exactly
// (prod c_k) times the original function, because ReLU is positively
// homogeneous and the final layer is linear. Layerwise normalization uses
// this with c_k = 1/rho_k.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "normlab/nn/forward.hpp"
#include "normlab/nn/loss.hpp"

namespace normlab {

/// Lp norm with an optional post-divisor; p = infinity gives the max norm.
struct NormKind {
    double p = 2.0;
    double divisor = 1.0;

    static NormKind frobenius() { return {2.0, 1.0}; }
    static NormKind l1_scaled() { return {1.0, 100.0}; }
    static NormKind linf() { return {std::numeric_limits<double>::infinity(), 1.0}; }

    /// "fro", "l1" (divided by 100), "linf", or "l<p>".
    static NormKind parse(const std::string& s) {
        if (s == "fro" || s == "l2") return frobenius();
        if (s == "l1") return l1_scaled();
        if (s == "linf") return linf();
        if (s.size() > 1 && s[0] == 'l') {
            const double p = std::stod(s.substr(1));
            if (p >= 1) return {p, 1.0};
        }
        throw ConfigError("unknown norm '" + s + "' (expected fro, l1, linf)");
    }

    std::string name() const {
        if (std::isinf(p)) return divisor == 1.0 ? "linf" : "linf/" + std::to_string(divisor);
        if (p == 2.0 && divisor == 1.0) return "fro";
        if (p == 1.0 && divisor == 100.0) return "l1";
        return "l" + std::to_string(p) + "/" + std::to_string(divisor);
    }

    void validate() const {
        if (!(p >= 1)) throw ConfigError("norm order p must be >= 1");
        if (!(divisor > 0)) throw ConfigError("norm divisor must be positive");
    }

    friend bool operator==(const NormKind&, const NormKind&) = default;
};

/// Norm of the concatenation of `weights` and `bias`, divided by kind.divisor.
template <typename S>
double layer_norm(std::span<const S> weights, std::span<const S> bias, const NormKind& kind) {
    kind.validate();
    double acc = 0;
    auto visit = [&](std::span<const S> xs) {
        for (S x : xs) {
            const double a = std::abs(double(x));
            if (std::isinf(kind.p)) acc = std::max(acc, a);
            else if (kind.p == 1.0) acc += a;
            else if (kind.p == 2.0) acc += a * a;
            else acc += std::pow(a, kind.p);
        }
    };
    visit(weights);
    visit(bias);
    double norm = acc;
    if (!std::isinf(kind.p)) {
        if (kind.p == 2.0) norm = std::sqrt(acc);
        else if (kind.p != 1.0) norm = std::pow(acc, 1.0 / kind.p);
    }
    return norm / kind.divisor;
}

/// Folds each batch-norm layer into the conv/dense layer before it:
/// W' = W s, b' = (b - mu) s + beta with s = gamma / sqrt(var + eps).
/// Eval-mode outputs are unchanged.
template <typename S>
nn::Network<S> absorb_batchnorm(const nn::Network<S>& net) {
    nn::Network<S> out(net.name(), net.input_shape(), net.class_count());
    for (const auto& layer : net.layers()) {
        if (layer.spec.kind != nn::LayerKind::batchnorm) {
            out.layers().push_back(layer);
            continue;
        }
        if (out.layers().empty() || !out.layers().back().spec.weighted())
            throw ConfigError("batch norm must directly follow a conv or dense layer to be absorbed");
        auto& prev = out.layers().back();
        const std::size_t channels = prev.spec.filters;
        if (layer.gamma.size() != channels) throw ShapeError("batch-norm width does not match the preceding layer");
        if (!prev.spec.has_bias) {
            prev.spec.has_bias = true;
            prev.bias = Tensor<S>({channels});
        }
        const std::size_t per_channel = prev.weight.size() / channels;
        for (std::size_t c = 0; c < channels; ++c) {
            const double denom = double(layer.running_var[c]) + layer.spec.bn_eps;
            if (!(denom > 0)) throw NumericError("batch-norm variance + eps is not positive at channel " + std::to_string(c));
            const double s = double(layer.gamma[c]) / std::sqrt(denom);
            for (std::size_t i = 0; i < per_channel; ++i)
                prev.weight[c * per_channel + i] = S(double(prev.weight[c * per_channel + i]) * s);
            prev.bias[c] = S((double(prev.bias[c]) - double(layer.running_mean[c])) * s + double(layer.beta[c]));
        }
    }
    return out;
}

/// Unit-norm network plus the per-layer scales that were divided out.
template <typename S>
struct NormalizedNetwork {
    nn::Network<S> network;
    std::vector<double> rho;   // one per weighted layer
    double product_norm = 1;
    NormKind kind;
    std::string source_digest;
};

/// Rescales layer k by 1/rho_k and its bias by 1/(rho_1...rho_k).
///
/// rho_k is the norm of [W_k, b_k / (rho_1...rho_{k-1})], i.e. of layer k as
/// it appears once the earlier layers are normalized, so every normalized
/// block (weights and bias together) has norm exactly 1 and normalizing twice
/// is the identity. With a bias only on the first layer this is the plain
/// norm of each layer.
template <typename S>
NormalizedNetwork<S> normalize_layerwise(const nn::Network<S>& net, const NormKind& kind = NormKind::frobenius()) {
    kind.validate();
    if (net.has_batchnorm()) throw ConfigError("absorb batch norm before normalizing");
    NormalizedNetwork<S> out;
    out.network = net;
    out.kind = kind;
    double cumulative = 1;
    for (auto& layer : out.network.layers()) {
        if (!layer.spec.weighted()) continue;
        std::vector<double> bias_scaled(layer.bias.size());
        for (std::size_t i = 0; i < layer.bias.size(); ++i) bias_scaled[i] = double(layer.bias[i]) / cumulative;
        std::vector<double> w(layer.weight.values().begin(), layer.weight.values().end());
        const double rho = layer_norm<double>(w, bias_scaled, kind);
        if (!(rho > 0) || !std::isfinite(rho))
            throw NumericError("layer " + std::to_string(out.rho.size()) + " has zero or non-finite norm");
        cumulative *= rho;
        for (auto& v : layer.weight.values()) v = S(double(v) / rho);
        for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] = S(bias_scaled[i] / rho);
        out.rho.push_back(rho);
    }
    out.product_norm = cumulative;
    return out;
}

/// Product of the layer scales rho_k (see normalize_layerwise).
template <typename S>
double product_norm(const nn::Network<S>& net, const NormKind& kind = NormKind::frobenius()) {
    if (net.has_batchnorm()) return normalize_layerwise(absorb_batchnorm(net), kind).product_norm;
    return normalize_layerwise(net, kind).product_norm;
}

template <typename S>
double product_norm(const NormalizedNetwork<S>& nn_) {
    return nn_.product_norm;
}

/// Network with layer k's weights multiplied by scales[k] and its bias by
/// scales[0]*...*scales[k].
template <typename S>
nn::Network<S> scale_layers(const nn::Network<S>& net, std::span<const double> scales) {
    nn::Network<S> out = net;
    std::size_t k = 0;
    double cumulative = 1;
    for (auto& layer : out.layers()) {
        if (!layer.spec.weighted()) continue;
        if (k >= scales.size()) throw ConfigError("fewer scales than weighted layers");
        if (!(scales[k] > 0)) throw ConfigError("layer scales must be positive");
        cumulative *= scales[k];
        for (auto& v : layer.weight.values()) v = S(double(v) * scales[k]);
        for (auto& v : layer.bias.values()) v = S(double(v) * cumulative);
        ++k;
    }
    if (k != scales.size()) throw ConfigError("more scales than weighted layers");
    return out;
}

/// max |factor * a - b| / max |b| over two output tensors of equal shape.
template <typename S>
double relative_deviation(const Tensor<S>& a, const Tensor<S>& b, double factor = 1.0) {
    if (a.shape() != b.shape()) throw ShapeError("output shapes differ: " + shape_string(a.shape()) + " vs " +
                                                 shape_string(b.shape()));
    double max_ref = 0, max_diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        max_ref = std::max(max_ref, std::abs(double(b[i])));
        max_diff = std::max(max_diff, std::abs(factor * double(a[i]) - double(b[i])));
    }
    return max_ref > 0 ? max_diff / max_ref : max_diff;
}

struct HomogeneityReport {
    double factor = 1;                 // product of the scales
    double max_relative_deviation = 0; // max |scaled - factor*orig| / max |factor*orig|
    bool argmax_identical = true;
    std::size_t tied_rows = 0;         // rows with a tied maximum (excluded from the argmax check)
};

/// Compares forward(scaled net) with factor * forward(net) on `inputs`.
template <typename S>
HomogeneityReport verify_homogeneity(const nn::Network<S>& net, std::span<const double> scales,
                                     const Tensor<S>& inputs) {
    HomogeneityReport rep;
    for (double s : scales) rep.factor *= s;
    const auto scaled = scale_layers(net, scales);
    const auto a = nn::forward(scaled, inputs, nn::Mode::eval);
    const auto b = nn::forward(net, inputs, nn::Mode::eval);
    double max_ref = 0, max_diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        max_ref = std::max(max_ref, std::abs(rep.factor * double(b[i])));
        max_diff = std::max(max_diff, std::abs(double(a[i]) - rep.factor * double(b[i])));
    }
    rep.max_relative_deviation = max_ref > 0 ? max_diff / max_ref : max_diff;
    const std::size_t k = a.dim(1);
    for (std::size_t r = 0; r < a.dim(0); ++r) {
        if (nn::has_tied_max(a.data() + r * k, k) || nn::has_tied_max(b.data() + r * k, k)) {
            ++rep.tied_rows;
            continue;
        }
        if (nn::argmax(a.data() + r * k, k) != nn::argmax(b.data() + r * k, k)) rep.argmax_identical = false;
    }
    return rep;
}

}  // namespace normlab
