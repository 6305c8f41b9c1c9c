// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "einv/tensor.hpp"

namespace einv {

/// Raised when a loss or gradient becomes NaN or infinite during training.
class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AdamSettings {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct AdamStateT {
    AdamSettings settings;
    std::uint64_t step = 0;
    std::vector<TensorT<T>> first_moment;
    std::vector<TensorT<T>> second_moment;
};

/// One Adam update with bias correction. Moments are created on the first
/// call. Throws NonFiniteError (naming the tensor and element) before touching
/// any parameter if a gradient is not finite.
template <typename T>
void adam_step(std::span<TensorT<T>* const> params, std::span<const TensorT<T>* const> grads,
               AdamStateT<T>& state);

}  // namespace einv
