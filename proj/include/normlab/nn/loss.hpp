#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "normlab/tensor.hpp"

namespace normlab::nn {

using Label = std::int32_t;

namespace detail {

inline void check_logits(const Shape& shape, std::size_t labels) {
    if (shape.size() != 2) throw ShapeError("logits must be [batch, classes], got " + shape_string(shape));
    if (shape[0] != labels)
        throw ShapeError("logits batch " + std::to_string(shape[0]) + " vs " + std::to_string(labels) + " labels");
}

inline void check_label(Label y, std::size_t classes) {
    if (y < 0 || std::size_t(y) >= classes)
        throw ConfigError("label " + std::to_string(y) + " outside [0," + std::to_string(classes) + ")");
}

/// log(sum_j exp(z_j)) with max subtraction.
template <typename S>
double log_sum_exp(const S* z, std::size_t k) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, double(z[j]));
    double s = 0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(double(z[j]) - mx);
    return mx + std::log(s);
}

}  // namespace detail

/// Mean softmax cross-entropy over the batch. Accumulated in double.
template <typename S>
double loss_crossentropy(const Tensor<S>& logits, std::span<const Label> labels) {
    detail::check_logits(logits.shape(), labels.size());
    const std::size_t n = labels.size(), k = logits.dim(1);
    if (n == 0) throw ConfigError("cross-entropy of an empty batch");
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        detail::check_label(labels[i], k);
        const S* z = logits.data() + i * k;
        total += detail::log_sum_exp(z, k) - double(z[labels[i]]);
    }
    return total / double(n);
}

/// Sum of ln(1 + exp(-y f)) with y in {-1,+1}.
inline double loss_binary_logistic(std::span<const double> scores, std::span<const int> labels) {
    if (scores.empty()) throw ConfigError("logistic loss of an empty input");
    if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
    double total = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1 && labels[i] != -1) throw ConfigError("binary labels must be -1 or +1");
        const double m = labels[i] * scores[i];
        // softplus(-m), stable for both signs
        total += std::max(-m, 0.0) + std::log1p(std::exp(-std::abs(m)));
    }
    return total;
}

/// Index of the largest entry; ties go to the lowest index.
template <typename S>
std::size_t argmax(const S* z, std::size_t k) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
        if (z[j] > z[best]) best = j;
    return best;
}

/// True when the row's maximum is attained more than once.
template <typename S>
bool has_tied_max(const S* z, std::size_t k) {
    const std::size_t best = argmax(z, k);
    for (std::size_t j = 0; j < k; ++j)
        if (j != best && z[j] == z[best]) return true;
    return false;
}

template <typename S>
std::size_t count_errors(const Tensor<S>& logits, std::span<const Label> labels) {
    detail::check_logits(logits.shape(), labels.size());
    const std::size_t k = logits.dim(1);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (argmax(logits.data() + i * k, k) != std::size_t(labels[i])) ++wrong;
    return wrong;
}

/// Fraction of rows whose argmax differs from the label.
template <typename S>
double classification_error(const Tensor<S>& logits, std::span<const Label> labels) {
    if (labels.empty()) throw ConfigError("classification error of an empty batch");
    return double(count_errors(logits, labels)) / double(labels.size());
}

/// d(mean CE)/d logits = (softmax - onehot) / batch.
template <typename S>
Tensor<S> crossentropy_gradient(const Tensor<S>& logits, std::span<const Label> labels) {
    detail::check_logits(logits.shape(), labels.size());
    const std::size_t n = labels.size(), k = logits.dim(1);
    Tensor<S> grad(logits.shape());
    for (std::size_t i = 0; i < n; ++i) {
        detail::check_label(labels[i], k);
        const S* z = logits.data() + i * k;
        const double lse = detail::log_sum_exp(z, k);
        for (std::size_t j = 0; j < k; ++j) {
            double p = std::exp(double(z[j]) - lse);
            if (j == std::size_t(labels[i])) p -= 1.0;
            grad[i * k + j] = S(p / double(n));
        }
    }
    return grad;
}

}  // namespace normlab::nn
