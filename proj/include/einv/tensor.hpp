// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensor used by every layer kernel.

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace einv {

using Shape = std::vector<std::size_t>;

/// Raised when operand shapes disagree. The message names the offending axis.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a layer geometry produces an empty or negative extent.
class GeometryError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
class TensorT {
public:
    using value_type = T;

    /// A rank-0 scalar holding zero.
    TensorT() : data_(1, T{0}) {}

    explicit TensorT(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
        check_extents();
        data_.assign(shape_numel(shape_), fill);
    }

    TensorT(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_extents();
        if (data_.size() != shape_numel(shape_)) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
        }
    }

    static TensorT zeros(Shape shape) { return TensorT(std::move(shape)); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const {
        if (axis >= shape_.size()) {
            throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape_));
        }
        return shape_[axis];
    }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
        return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
    }
    const T& at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
        return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
    }

    void fill(T value) { data_.assign(data_.size(), value); }

    TensorT reshaped(Shape shape) const {
        if (shape_numel(shape) != data_.size()) {
            throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
        }
        return TensorT(std::move(shape), data_);
    }

    template <typename U>
    TensorT<U> cast() const {
        std::vector<U> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return TensorT<U>(shape_, std::move(out));
    }

    /// Bitwise equality of shape and values.
    bool operator==(const TensorT& other) const = default;

private:
    void check_extents() const {
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (shape_[i] == 0) {
                throw ShapeError("extent of axis " + std::to_string(i) + " must be >= 1 in " + shape_str(shape_));
            }
        }
    }

    Shape shape_;
    std::vector<T> data_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

/// Throws ShapeError naming `what` unless both shapes are identical.
void require_same_shape(const Shape& a, const Shape& b, const std::string& what);

/// Copies items [begin, end) along axis 0.
template <typename T>
TensorT<T> slice_batch(const TensorT<T>& t, std::size_t begin, std::size_t end);

/// Gathers the listed items along axis 0, in order.
template <typename T>
TensorT<T> gather_batch(const TensorT<T>& t, std::span<const std::size_t> rows);

}  // namespace einv
