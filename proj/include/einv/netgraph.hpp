// SPDX-License-Identifier: Apache-2.0
//
// Sequential (single-chain) networks: layer specs, parameters, and the
// forward/backward passes that drive training and pruning.

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "einv/kernels.hpp"
#include "einv/tensor.hpp"

namespace einv {

/// Raised when a cache no longer matches the network it came from.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

enum class LayerKind { conv, conv_transpose, center_crop, activation_only };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

struct LayerSpec {
    std::size_t index = 0;  // 1-based position in the chain
    LayerKind kind = LayerKind::conv;
    Pair kernel{1, 1};
    Pair stride{1, 1};
    Pair padding{0, 0};
    Pair crop{0, 0};  // center_crop target (h, w)
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    bool has_bias = true;
    bool has_batchnorm = false;
    Activation activation;
    bool prunable = false;

    /// conv and conv_transpose layers own weights and produce new channels.
    bool producing() const { return kind == LayerKind::conv || kind == LayerKind::conv_transpose; }
};

template <typename T>
struct Layer {
    LayerSpec spec;
    std::optional<ConvParamsT<T>> conv;
    std::optional<BatchNormParamsT<T>> bn;
};

template <typename T>
class BasicNetwork {
public:
    BasicNetwork() = default;
    BasicNetwork(std::string name, Shape input_shape, std::vector<Layer<T>> layers);

    /// Builds a network (zero-valued parameters) from an architecture config.
    static BasicNetwork from_config(const nlohmann::json& config);
    /// Architecture config reflecting the current (possibly pruned) widths.
    nlohmann::json to_config() const;

    const std::string& name() const { return name_; }
    /// Per-sample input shape (c, h, w).
    const Shape& input_shape() const { return input_shape_; }
    /// Per-sample output shape (c, h, w), computed by shape propagation.
    Shape output_shape() const;
    /// Statically propagated per-sample output shape of every layer.
    std::vector<Shape> layer_output_shapes() const;

    const std::vector<Layer<T>>& layers() const { return layers_; }
    std::vector<Layer<T>>& mutable_layers() {
        ++revision_;
        return layers_;
    }
    std::size_t producing_layer_count() const;

    /// Throws ShapeError/GeometryError unless every invariant holds.
    void validate() const;

    /// Trainable tensors in a fixed order: per layer weights, bias, gamma, beta.
    std::vector<TensorT<T>*> parameters();
    std::vector<const TensorT<T>*> parameters() const;

    /// Incremented whenever parameters or structure may have changed.
    std::uint64_t revision() const { return revision_; }
    void touch() { ++revision_; }

    template <typename U>
    BasicNetwork<U> cast() const;

private:
    std::string name_;
    Shape input_shape_;
    std::vector<Layer<T>> layers_;
    std::uint64_t revision_ = 0;
};

using NetworkGraph = BasicNetwork<float>;
using NetworkGraphD = BasicNetwork<double>;

enum class Mode { train, eval };

template <typename T>
struct LayerCache {
    TensorT<T> input;
    TensorT<T> pre_bn;
    std::optional<BatchNormResultT<T>> bn;
    TensorT<T> pre_activation;
    TensorT<T> output;
};

template <typename T>
struct ForwardResult {
    TensorT<T> output;
    std::vector<LayerCache<T>> cache;
    std::uint64_t revision = 0;
    Mode mode = Mode::eval;
};

template <typename T>
struct LayerGrads {
    std::optional<TensorT<T>> weights, bias, gamma, beta;
};

template <typename T>
struct Gradients {
    std::vector<LayerGrads<T>> layers;
    TensorT<T> input;

    /// Same order as BasicNetwork::parameters().
    std::vector<const TensorT<T>*> flat() const;
};

/// Optional per-layer output-channel masks (0 = channel forced to zero after
/// the layer's activation). Indexed like net.layers(); empty entries mean "keep all".
using ChannelMasks = std::vector<std::vector<std::uint8_t>>;

/// Runs the chain and keeps what backward needs. In train mode batchnorm uses
/// batch statistics and the updated running statistics are written to `net`.
template <typename T>
ForwardResult<T> forward(BasicNetwork<T>& net, const TensorT<T>& batch, Mode mode);

/// Eval-mode forward without caching; a pure function of (net, batch).
template <typename T>
TensorT<T> predict(const BasicNetwork<T>& net, const TensorT<T>& batch, const ChannelMasks* masks = nullptr);

/// Throws ContractError if `fwd` was produced before the net last changed.
template <typename T>
Gradients<T> backward(const BasicNetwork<T>& net, const ForwardResult<T>& fwd, const TensorT<T>& grad_out);

/// Kaiming fan-in normal weights (std = sqrt(2 / fan_in)); zero biases and
/// betas; unit gammas; reset running statistics. Fully determined by `seed`.
template <typename T>
void init_weights(BasicNetwork<T>& net, std::uint64_t seed);

/// fan_in used by init_weights: weights.dim(1) * k_h * k_w.
std::size_t fan_in(const LayerSpec& spec);

/// Encoder-decoder following the OpenFWI InversionNet layer table:
/// (5, 1000, 70) -> (1, 70, 70), 25 producing layers.
nlohmann::json inversionnet_config();
/// Desk-scale stand-in: (3, 64, 16) -> (1, 16, 16), 6 producing layers.
nlohmann::json tiny_testnet_config();

NetworkGraph build_inversionnet_default();
NetworkGraph build_tiny_testnet();

}  // namespace einv
