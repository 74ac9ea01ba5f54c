#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "normlab/error.hpp"

namespace normlab {

using Shape = std::vector<std::size_t>;

/// Storage aligned to Eigen's widest packet, so vectorized reductions take the
/// same path (and give bit-identical sums) wherever a buffer lands in memory.
template <typename Scalar>
using AlignedVector = std::vector<Scalar, Eigen::aligned_allocator<Scalar>>;

inline std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

/// Dense row-major array. Scalar is float for training storage and double for
/// verification runs; both instantiations share every algorithm.
template <typename Scalar>
class Tensor {
    static_assert(std::is_floating_point_v<Scalar>, "Tensor requires a floating-point scalar");

public:
    using value_type = Scalar;

    Tensor() = default;

    explicit Tensor(Shape shape, Scalar fill = Scalar(0))
        : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

    Tensor(Shape shape, const std::vector<Scalar>& data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
        if (data_.size() != element_count(shape_))
            throw ShapeError("tensor of shape " + shape_string(shape_) + " given " +
                             std::to_string(data_.size()) + " elements");
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    Scalar* data() noexcept { return data_.data(); }
    const Scalar* data() const noexcept { return data_.data(); }
    std::span<Scalar> values() noexcept { return data_; }
    std::span<const Scalar> values() const noexcept { return data_; }

    Scalar& operator[](std::size_t i) noexcept { return data_[i]; }
    Scalar operator[](std::size_t i) const noexcept { return data_[i]; }

    void fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

    /// Changes the extents without touching the elements.
    void reshape(Shape shape) {
        if (element_count(shape) != data_.size())
            throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
        shape_ = std::move(shape);
    }

    template <typename To>
    Tensor<To> cast() const {
        Tensor<To> out;
        out.shape_ = shape_;
        out.data_.assign(data_.begin(), data_.end());
        return out;
    }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](Scalar v) { return std::isfinite(v); });
    }

    void require_finite(std::string_view what) const {
        if (!all_finite()) throw NumericError("non-finite value in " + std::string(what));
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    template <typename>
    friend class Tensor;

    Shape shape_;
    AlignedVector<Scalar> data_;
};

}  // namespace normlab
