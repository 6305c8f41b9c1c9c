// SPDX-License-Identifier: Apache-2.0
//
// Layer kernels with hand-written gradients. Every kernel is a pure function of
// its arguments and is instantiated for float (production) and double
// (gradient checks).
//
// Reductions run in a fixed sequential order per output element, so results
// do not depend on the thread count, and removing zero-valued channels leaves
// the remaining sums bit-identical.

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>

#include "einv/tensor.hpp"

namespace einv {

using Pair = std::array<std::size_t, 2>;

/// Convolution weights are (c_out, c_in, k_h, k_w); transposed-convolution
/// weights are (c_in, c_out, k_h, k_w).
template <typename T>
struct ConvParamsT {
    TensorT<T> weights;
    std::optional<TensorT<T>> bias;
    Pair stride{1, 1};
    Pair padding{0, 0};

    void validate() const;
    Pair kernel() const { return {weights.dim(2), weights.dim(3)}; }
};

template <typename T>
struct ConvGradsT {
    TensorT<T> grad_input;
    TensorT<T> grad_weights;
    std::optional<TensorT<T>> grad_bias;
};

/// Output extent of a strided convolution along one axis.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad,
                            const char* axis);
std::size_t conv_transpose_out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                                      std::size_t pad, const char* axis);

template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& input, const ConvParamsT<T>& params);

template <typename T>
ConvGradsT<T> conv2d_backward(const TensorT<T>& input, const ConvParamsT<T>& params,
                              const TensorT<T>& grad_out);

template <typename T>
TensorT<T> conv_transpose2d_forward(const TensorT<T>& input, const ConvParamsT<T>& params);

template <typename T>
ConvGradsT<T> conv_transpose2d_backward(const TensorT<T>& input, const ConvParamsT<T>& params,
                                        const TensorT<T>& grad_out);

template <typename T>
struct BatchNormParamsT {
    TensorT<T> gamma;
    TensorT<T> beta;
    TensorT<T> running_mean;
    TensorT<T> running_var;
    double epsilon = 1e-5;
    double momentum = 0.1;

    static BatchNormParamsT identity(std::size_t channels);
    std::size_t channels() const { return gamma.size(); }
    void validate() const;
};

/// Everything batchnorm_backward needs, plus the running statistics a
/// training-mode pass produced. Eval-mode passes leave the running fields
/// equal to the inputs.
template <typename T>
struct BatchNormResultT {
    TensorT<T> output;
    TensorT<T> normalized;   // x-hat, same shape as output
    TensorT<T> inv_std;      // per channel
    TensorT<T> running_mean;
    TensorT<T> running_var;
    bool training = false;
};

template <typename T>
BatchNormResultT<T> batchnorm_forward(const TensorT<T>& input, const BatchNormParamsT<T>& params,
                                      bool training);

template <typename T>
struct BatchNormGradsT {
    TensorT<T> grad_input;
    TensorT<T> grad_gamma;
    TensorT<T> grad_beta;
};

template <typename T>
BatchNormGradsT<T> batchnorm_backward(const BatchNormResultT<T>& forward, const BatchNormParamsT<T>& params,
                                      const TensorT<T>& grad_out);

enum class ActivationKind { identity, leaky_relu, tanh };

struct Activation {
    ActivationKind kind = ActivationKind::identity;
    double slope = 0.2;  // leaky_relu only

    static Activation identity() { return {}; }
    static Activation leaky_relu(double slope) { return {ActivationKind::leaky_relu, slope}; }
    static Activation tanh() { return {ActivationKind::tanh, 0.0}; }
    bool operator==(const Activation&) const = default;
};

std::string to_string(ActivationKind kind);
ActivationKind activation_kind_from_string(const std::string& name);

template <typename T>
TensorT<T> activation_forward(const TensorT<T>& input, Activation act);

/// `input` is the pre-activation tensor, `output` the post-activation one.
template <typename T>
TensorT<T> activation_backward(const TensorT<T>& input, const TensorT<T>& output, const TensorT<T>& grad_out,
                               Activation act);

/// Crops the trailing two axes to `size`, centred (offset = (in - size) / 2).
template <typename T>
TensorT<T> center_crop_forward(const TensorT<T>& input, Pair size);

template <typename T>
TensorT<T> center_crop_backward(const Shape& input_shape, const TensorT<T>& grad_out);

template <typename T>
struct LossT {
    double loss = 0.0;
    TensorT<T> grad;
};

/// Mean absolute error and its subgradient sign(pred - target) / count, with sign(0) = 0.
template <typename T>
LossT<T> mae_loss(const TensorT<T>& pred, const TensorT<T>& target);

/// Set the worker count used inside the GEMM kernels (1 = serial).
void set_num_threads(std::size_t n);
std::size_t num_threads();

}  // namespace einv
