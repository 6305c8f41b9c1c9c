// SPDX-License-Identifier: Apache-2.0

#include "einv/tensor.hpp"

#include <algorithm>

namespace einv {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

void require_same_shape(const Shape& a, const Shape& b, const std::string& what) {
    if (a.size() != b.size()) {
        throw ShapeError(what + ": rank mismatch " + shape_str(a) + " vs " + shape_str(b));
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) {
            throw ShapeError(what + ": axis " + std::to_string(i) + " differs, " + shape_str(a) + " vs " +
                             shape_str(b));
        }
    }
}

template <typename T>
TensorT<T> slice_batch(const TensorT<T>& t, std::size_t begin, std::size_t end) {
    if (t.rank() == 0 || begin >= end || end > t.dim(0)) {
        throw ShapeError("invalid batch slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " +
                         shape_str(t.shape()));
    }
    const std::size_t item = t.size() / t.dim(0);
    Shape shape = t.shape();
    shape[0] = end - begin;
    std::vector<T> data(t.data() + begin * item, t.data() + end * item);
    return TensorT<T>(std::move(shape), std::move(data));
}

template <typename T>
TensorT<T> gather_batch(const TensorT<T>& t, std::span<const std::size_t> rows) {
    if (t.rank() == 0 || rows.empty()) throw ShapeError("gather_batch needs a batched tensor and rows");
    const std::size_t item = t.size() / t.dim(0);
    Shape shape = t.shape();
    shape[0] = rows.size();
    std::vector<T> data;
    data.reserve(rows.size() * item);
    for (auto r : rows) {
        if (r >= t.dim(0)) throw ShapeError("gather_batch row " + std::to_string(r) + " out of range");
        data.insert(data.end(), t.data() + r * item, t.data() + (r + 1) * item);
    }
    return TensorT<T>(std::move(shape), std::move(data));
}

template TensorT<float> slice_batch(const TensorT<float>&, std::size_t, std::size_t);
template TensorT<double> slice_batch(const TensorT<double>&, std::size_t, std::size_t);
template TensorT<float> gather_batch(const TensorT<float>&, std::span<const std::size_t>);
template TensorT<double> gather_batch(const TensorT<double>&, std::span<const std::size_t>);

}  // namespace einv
