// SPDX-License-Identifier: Apache-2.0

#include "einv/netgraph.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace einv {

using nlohmann::json;

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv: return "conv";
        case LayerKind::conv_transpose: return "conv_transpose";
        case LayerKind::center_crop: return "center_crop";
        case LayerKind::activation_only: return "activation";
    }
    return "conv";
}

LayerKind layer_kind_from_string(const std::string& name) {
    if (name == "conv") return LayerKind::conv;
    if (name == "conv_transpose" || name == "deconv") return LayerKind::conv_transpose;
    if (name == "center_crop" || name == "crop") return LayerKind::center_crop;
    if (name == "activation") return LayerKind::activation_only;
    throw std::invalid_argument("unknown layer kind '" + name + "'");
}

namespace {

Pair read_pair(const json& j, const char* key, Pair fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (v.is_number_unsigned() || v.is_number_integer()) {
        const auto x = v.get<std::size_t>();
        return {x, x};
    }
    if (!v.is_array() || v.size() != 2) throw std::invalid_argument(std::string("'") + key + "' must be an int or [h, w]");
    return {v[0].get<std::size_t>(), v[1].get<std::size_t>()};
}

std::string layer_tag(const LayerSpec& s) { return "layer " + std::to_string(s.index) + " (" + to_string(s.kind) + ")"; }

template <typename T>
Layer<T> make_layer(const LayerSpec& spec) {
    Layer<T> layer{spec, std::nullopt, std::nullopt};
    if (spec.kind == LayerKind::conv || spec.kind == LayerKind::conv_transpose) {
        ConvParamsT<T> p;
        const Shape w = spec.kind == LayerKind::conv
                            ? Shape{spec.out_channels, spec.in_channels, spec.kernel[0], spec.kernel[1]}
                            : Shape{spec.in_channels, spec.out_channels, spec.kernel[0], spec.kernel[1]};
        p.weights = TensorT<T>(w);
        if (spec.has_bias) p.bias = TensorT<T>({spec.out_channels});
        p.stride = spec.stride;
        p.padding = spec.padding;
        layer.conv = std::move(p);
        if (spec.has_batchnorm) layer.bn = BatchNormParamsT<T>::identity(spec.out_channels);
    }
    return layer;
}

// Gaussian sampler built on the integer engine so the draw sequence is fixed
// for a given seed.
class NormalSource {
public:
    explicit NormalSource(std::uint64_t seed) : engine_(seed) {}
    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace

std::size_t fan_in(const LayerSpec& spec) {
    const std::size_t axis1 = spec.kind == LayerKind::conv ? spec.in_channels : spec.out_channels;
    return axis1 * spec.kernel[0] * spec.kernel[1];
}

template <typename T>
BasicNetwork<T>::BasicNetwork(std::string name, Shape input_shape, std::vector<Layer<T>> layers)
    : name_(std::move(name)), input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
    validate();
}

template <typename T>
BasicNetwork<T> BasicNetwork<T>::from_config(const json& config) {
    const auto input = config.at("input_shape").get<std::vector<std::size_t>>();
    if (input.size() != 3) throw ShapeError("input_shape must be (c, h, w), got " + shape_str(input));
    std::vector<Layer<T>> layers;
    std::size_t channels = input[0];
    std::size_t last_producing = 0;
    const auto& entries = config.at("layers");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (layer_kind_from_string(entries[i].at("kind").get<std::string>()) == LayerKind::conv ||
            layer_kind_from_string(entries[i].at("kind").get<std::string>()) == LayerKind::conv_transpose) {
            last_producing = i + 1;
        }
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        LayerSpec s;
        s.index = i + 1;
        s.kind = layer_kind_from_string(e.at("kind").get<std::string>());
        s.in_channels = channels;
        if (e.contains("in_channels") && e.at("in_channels").get<std::size_t>() != channels) {
            throw ShapeError("layer " + std::to_string(s.index) + " declares in_channels " +
                             std::to_string(e.at("in_channels").get<std::size_t>()) + " but receives " +
                             std::to_string(channels));
        }
        s.activation.kind = activation_kind_from_string(e.value("activation", std::string("identity")));
        s.activation.slope = e.value("slope", 0.2);
        if (s.producing()) {
            s.out_channels = e.at("out_channels").get<std::size_t>();
            s.kernel = read_pair(e, "kernel", {3, 3});
            s.stride = read_pair(e, "stride", {1, 1});
            s.padding = read_pair(e, "padding", {0, 0});
            s.has_bias = e.value("bias", true);
            s.has_batchnorm = e.value("batchnorm", false);
            s.prunable = e.value("prunable", s.index != last_producing);
            channels = s.out_channels;
        } else {
            s.out_channels = channels;
            if (s.kind == LayerKind::center_crop) s.crop = read_pair(e, "size", {0, 0});
        }
        auto layer = make_layer<T>(s);
        if (layer.bn) {
            layer.bn->epsilon = e.value("bn_epsilon", 1e-5);
            layer.bn->momentum = e.value("bn_momentum", 0.1);
        }
        layers.push_back(std::move(layer));
    }
    return BasicNetwork<T>(config.value("name", std::string("network")), input, std::move(layers));
}

template <typename T>
json BasicNetwork<T>::to_config() const {
    json layers = json::array();
    for (const auto& l : layers_) {
        const auto& s = l.spec;
        json e;
        e["kind"] = to_string(s.kind);
        if (s.producing()) {
            e["in_channels"] = s.in_channels;
            e["out_channels"] = s.out_channels;
            e["kernel"] = {s.kernel[0], s.kernel[1]};
            e["stride"] = {s.stride[0], s.stride[1]};
            e["padding"] = {s.padding[0], s.padding[1]};
            e["bias"] = s.has_bias;
            e["batchnorm"] = s.has_batchnorm;
            e["prunable"] = s.prunable;
            if (l.bn) {
                e["bn_epsilon"] = l.bn->epsilon;
                e["bn_momentum"] = l.bn->momentum;
            }
        }
        if (s.kind == LayerKind::center_crop) e["size"] = {s.crop[0], s.crop[1]};
        if (s.kind != LayerKind::center_crop) {
            e["activation"] = to_string(s.activation.kind);
            if (s.activation.kind == ActivationKind::leaky_relu) e["slope"] = s.activation.slope;
        }
        layers.push_back(std::move(e));
    }
    return json{{"name", name_}, {"input_shape", input_shape_}, {"layers", std::move(layers)}};
}

template <typename T>
std::vector<Shape> BasicNetwork<T>::layer_output_shapes() const {
    std::vector<Shape> shapes;
    Shape cur = input_shape_;
    for (const auto& l : layers_) {
        const auto& s = l.spec;
        switch (s.kind) {
            case LayerKind::conv:
                cur = {s.out_channels, conv_out_extent(cur[1], s.kernel[0], s.stride[0], s.padding[0], "height"),
                       conv_out_extent(cur[2], s.kernel[1], s.stride[1], s.padding[1], "width")};
                break;
            case LayerKind::conv_transpose:
                cur = {s.out_channels,
                       conv_transpose_out_extent(cur[1], s.kernel[0], s.stride[0], s.padding[0], "height"),
                       conv_transpose_out_extent(cur[2], s.kernel[1], s.stride[1], s.padding[1], "width")};
                break;
            case LayerKind::center_crop:
                if (s.crop[0] == 0 || s.crop[1] == 0 || s.crop[0] > cur[1] || s.crop[1] > cur[2]) {
                    throw GeometryError(layer_tag(s) + ": crop " + shape_str({s.crop[0], s.crop[1]}) +
                                        " does not fit " + shape_str(cur));
                }
                cur = {cur[0], s.crop[0], s.crop[1]};
                break;
            case LayerKind::activation_only: break;
        }
        shapes.push_back(cur);
    }
    return shapes;
}

template <typename T>
Shape BasicNetwork<T>::output_shape() const {
    const auto shapes = layer_output_shapes();
    return shapes.empty() ? input_shape_ : shapes.back();
}

template <typename T>
std::size_t BasicNetwork<T>::producing_layer_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.spec.producing() ? 1 : 0;
    return n;
}

template <typename T>
void BasicNetwork<T>::validate() const {
    if (input_shape_.size() != 3) throw ShapeError("network input shape must be (c, h, w)");
    std::size_t channels = input_shape_[0];
    const Layer<T>* last_producing = nullptr;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        const auto& s = l.spec;
        if (s.index != i + 1) throw ContractError(layer_tag(s) + ": index out of sequence");
        if (s.in_channels != channels) {
            throw ShapeError(layer_tag(s) + ": in_channels " + std::to_string(s.in_channels) +
                             " but previous layer produces " + std::to_string(channels));
        }
        if (s.producing()) {
            if (s.out_channels == 0) throw ShapeError(layer_tag(s) + ": out_channels must be >= 1");
            if (!l.conv) throw ContractError(layer_tag(s) + ": missing convolution parameters");
            const Shape expect = s.kind == LayerKind::conv
                                     ? Shape{s.out_channels, s.in_channels, s.kernel[0], s.kernel[1]}
                                     : Shape{s.in_channels, s.out_channels, s.kernel[0], s.kernel[1]};
            require_same_shape(l.conv->weights.shape(), expect, layer_tag(s) + " weights");
            if (l.conv->bias.has_value() != s.has_bias) throw ContractError(layer_tag(s) + ": bias presence mismatch");
            if (l.conv->bias) require_same_shape(l.conv->bias->shape(), {s.out_channels}, layer_tag(s) + " bias");
            if (l.conv->stride != s.stride || l.conv->padding != s.padding) {
                throw ContractError(layer_tag(s) + ": geometry disagrees with spec");
            }
            if (l.bn.has_value() != s.has_batchnorm) throw ContractError(layer_tag(s) + ": batchnorm presence mismatch");
            if (l.bn) {
                l.bn->validate();
                if (l.bn->channels() != s.out_channels) throw ShapeError(layer_tag(s) + ": batchnorm width mismatch");
            }
            channels = s.out_channels;
            last_producing = &l;
        } else {
            if (s.out_channels != channels) throw ShapeError(layer_tag(s) + ": pass-through layer changes channels");
            if (l.conv || l.bn) throw ContractError(layer_tag(s) + ": parameterless layer carries parameters");
        }
    }
    if (last_producing && last_producing->spec.prunable) {
        throw ContractError(layer_tag(last_producing->spec) + ": final producing layer must not be prunable");
    }
    (void)layer_output_shapes();
}

template <typename T>
std::vector<TensorT<T>*> BasicNetwork<T>::parameters() {
    std::vector<TensorT<T>*> out;
    for (auto& l : layers_) {
        if (l.conv) {
            out.push_back(&l.conv->weights);
            if (l.conv->bias) out.push_back(&*l.conv->bias);
        }
        if (l.bn) {
            out.push_back(&l.bn->gamma);
            out.push_back(&l.bn->beta);
        }
    }
    return out;
}

template <typename T>
std::vector<const TensorT<T>*> BasicNetwork<T>::parameters() const {
    std::vector<const TensorT<T>*> out;
    for (const auto* p : const_cast<BasicNetwork*>(this)->parameters()) out.push_back(p);
    return out;
}

template <typename T>
template <typename U>
BasicNetwork<U> BasicNetwork<T>::cast() const {
    std::vector<Layer<U>> layers;
    for (const auto& l : layers_) {
        Layer<U> out{l.spec, std::nullopt, std::nullopt};
        if (l.conv) {
            ConvParamsT<U> p;
            p.weights = l.conv->weights.template cast<U>();
            if (l.conv->bias) p.bias = l.conv->bias->template cast<U>();
            p.stride = l.conv->stride;
            p.padding = l.conv->padding;
            out.conv = std::move(p);
        }
        if (l.bn) {
            BatchNormParamsT<U> b;
            b.gamma = l.bn->gamma.template cast<U>();
            b.beta = l.bn->beta.template cast<U>();
            b.running_mean = l.bn->running_mean.template cast<U>();
            b.running_var = l.bn->running_var.template cast<U>();
            b.epsilon = l.bn->epsilon;
            b.momentum = l.bn->momentum;
            out.bn = std::move(b);
        }
        layers.push_back(std::move(out));
    }
    return BasicNetwork<U>(name_, input_shape_, std::move(layers));
}

template <typename T>
std::vector<const TensorT<T>*> Gradients<T>::flat() const {
    std::vector<const TensorT<T>*> out;
    for (const auto& l : layers) {
        if (l.weights) out.push_back(&*l.weights);
        if (l.bias) out.push_back(&*l.bias);
        if (l.gamma) out.push_back(&*l.gamma);
        if (l.beta) out.push_back(&*l.beta);
    }
    return out;
}

namespace {

template <typename T>
void check_batch(const BasicNetwork<T>& net, const TensorT<T>& batch) {
    if (batch.rank() != 4) throw ShapeError("network input must be rank 4 (n, c, h, w), got " + shape_str(batch.shape()));
    const Shape& in = net.input_shape();
    for (std::size_t a = 0; a < 3; ++a) {
        if (batch.dim(a + 1) != in[a]) {
            throw ShapeError("network input axis " + std::to_string(a + 1) + " is " + std::to_string(batch.dim(a + 1)) +
                             ", expected " + std::to_string(in[a]));
        }
    }
}

template <typename T>
void apply_mask(TensorT<T>& t, const std::vector<std::uint8_t>& mask) {
    const std::size_t n = t.dim(0), c = t.dim(1), hw = t.dim(2) * t.dim(3);
    if (mask.size() != c) throw ShapeError("channel mask length " + std::to_string(mask.size()) + " != " + std::to_string(c));
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            if (mask[ch]) continue;
            T* d = t.data() + (b * c + ch) * hw;
            std::fill(d, d + hw, T{0});
        }
    }
}

// Runs one layer. When `cache` is non-null intermediate tensors are kept.
template <typename T>
TensorT<T> run_layer(Layer<T>& layer, const TensorT<T>& x, Mode mode, LayerCache<T>* cache, bool commit_stats) {
    const auto& s = layer.spec;
    try {
        switch (s.kind) {
            case LayerKind::center_crop: return center_crop_forward(x, s.crop);
            case LayerKind::activation_only: {
                TensorT<T> y = activation_forward(x, s.activation);
                if (cache) cache->pre_activation = x;
                return y;
            }
            case LayerKind::conv:
            case LayerKind::conv_transpose: break;
        }
        TensorT<T> z = s.kind == LayerKind::conv ? conv2d_forward(x, *layer.conv) : conv_transpose2d_forward(x, *layer.conv);
        TensorT<T> a;
        if (layer.bn) {
            auto bn = batchnorm_forward(z, *layer.bn, mode == Mode::train);
            if (commit_stats && mode == Mode::train) {
                layer.bn->running_mean = bn.running_mean;
                layer.bn->running_var = bn.running_var;
            }
            a = bn.output;
            if (cache) cache->bn = std::move(bn);
        } else {
            a = z;
        }
        TensorT<T> y = activation_forward(a, s.activation);
        if (cache) {
            cache->pre_bn = std::move(z);
            cache->pre_activation = std::move(a);
        }
        return y;
    } catch (const ShapeError& e) {
        throw ShapeError(layer_tag(s) + ": " + e.what());
    } catch (const GeometryError& e) {
        throw GeometryError(layer_tag(s) + ": " + e.what());
    }
}

}  // namespace

template <typename T>
ForwardResult<T> forward(BasicNetwork<T>& net, const TensorT<T>& batch, Mode mode) {
    check_batch(net, batch);
    ForwardResult<T> r;
    r.mode = mode;
    auto& layers = net.mutable_layers();
    r.cache.resize(layers.size());
    TensorT<T> x = batch;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        r.cache[i].input = x;
        x = run_layer(layers[i], x, mode, &r.cache[i], true);
        r.cache[i].output = x;
    }
    r.output = std::move(x);
    r.revision = net.revision();
    return r;
}

template <typename T>
TensorT<T> predict(const BasicNetwork<T>& net, const TensorT<T>& batch, const ChannelMasks* masks) {
    check_batch(net, batch);
    const auto& layers = net.layers();
    if (masks && masks->size() != layers.size()) throw ShapeError("channel masks must cover every layer");
    TensorT<T> x = batch;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        // run_layer never mutates in eval mode with commit_stats = false.
        x = run_layer(const_cast<Layer<T>&>(layers[i]), x, Mode::eval, static_cast<LayerCache<T>*>(nullptr), false);
        if (masks && !(*masks)[i].empty()) apply_mask(x, (*masks)[i]);
    }
    return x;
}

template <typename T>
Gradients<T> backward(const BasicNetwork<T>& net, const ForwardResult<T>& fwd, const TensorT<T>& grad_out) {
    if (fwd.revision != net.revision() || fwd.cache.size() != net.layers().size()) {
        throw ContractError("backward called with a stale forward cache (net revision " +
                            std::to_string(net.revision()) + ", cache revision " + std::to_string(fwd.revision) + ")");
    }
    require_same_shape(grad_out.shape(), fwd.output.shape(), "backward grad_out");
    const auto& layers = net.layers();
    Gradients<T> grads;
    grads.layers.resize(layers.size());
    TensorT<T> g = grad_out;
    for (std::size_t idx = layers.size(); idx-- > 0;) {
        const auto& l = layers[idx];
        const auto& c = fwd.cache[idx];
        const auto& s = l.spec;
        switch (s.kind) {
            case LayerKind::center_crop: g = center_crop_backward(c.input.shape(), g); continue;
            case LayerKind::activation_only: g = activation_backward(c.pre_activation, c.output, g, s.activation); continue;
            case LayerKind::conv:
            case LayerKind::conv_transpose: break;
        }
        g = activation_backward(c.pre_activation, c.output, g, s.activation);
        auto& lg = grads.layers[idx];
        if (l.bn) {
            auto bg = batchnorm_backward(*c.bn, *l.bn, g);
            lg.gamma = std::move(bg.grad_gamma);
            lg.beta = std::move(bg.grad_beta);
            g = std::move(bg.grad_input);
        }
        auto cg = s.kind == LayerKind::conv ? conv2d_backward(c.input, *l.conv, g)
                                            : conv_transpose2d_backward(c.input, *l.conv, g);
        lg.weights = std::move(cg.grad_weights);
        lg.bias = std::move(cg.grad_bias);
        g = std::move(cg.grad_input);
    }
    grads.input = std::move(g);
    return grads;
}

template <typename T>
void init_weights(BasicNetwork<T>& net, std::uint64_t seed) {
    NormalSource normal(seed);
    for (auto& l : net.mutable_layers()) {
        if (!l.conv) continue;
        const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in(l.spec)));
        for (auto& w : l.conv->weights.values()) w = static_cast<T>(normal.next() * std_dev);
        if (l.conv->bias) l.conv->bias->fill(T{0});
        if (l.bn) {
            const double eps = l.bn->epsilon, mom = l.bn->momentum;
            *l.bn = BatchNormParamsT<T>::identity(l.spec.out_channels);
            l.bn->epsilon = eps;
            l.bn->momentum = mom;
        }
    }
}

namespace {

json conv_block(std::size_t out, Pair kernel, Pair stride, Pair padding, const char* kind = "conv") {
    return json{{"kind", kind},
                {"out_channels", out},
                {"kernel", {kernel[0], kernel[1]}},
                {"stride", {stride[0], stride[1]}},
                {"padding", {padding[0], padding[1]}},
                {"bias", true},
                {"batchnorm", true},
                {"activation", "leaky_relu"},
                {"slope", 0.2}};
}

}  // namespace

json inversionnet_config() {
    json layers = json::array();
    // Encoder: time axis first, then square kernels, then a valid conv to 1 x 1.
    layers.push_back(conv_block(32, {7, 1}, {2, 1}, {3, 0}));
    layers.push_back(conv_block(64, {3, 1}, {2, 1}, {1, 0}));
    layers.push_back(conv_block(64, {3, 1}, {1, 1}, {1, 0}));
    layers.push_back(conv_block(64, {3, 1}, {2, 1}, {1, 0}));
    layers.push_back(conv_block(64, {3, 1}, {1, 1}, {1, 0}));
    layers.push_back(conv_block(128, {3, 1}, {2, 1}, {1, 0}));
    layers.push_back(conv_block(128, {3, 1}, {1, 1}, {1, 0}));
    layers.push_back(conv_block(128, {3, 3}, {2, 2}, {1, 1}));
    layers.push_back(conv_block(128, {3, 3}, {1, 1}, {1, 1}));
    layers.push_back(conv_block(256, {3, 3}, {2, 2}, {1, 1}));
    layers.push_back(conv_block(256, {3, 3}, {1, 1}, {1, 1}));
    layers.push_back(conv_block(256, {3, 3}, {2, 2}, {1, 1}));
    layers.push_back(conv_block(256, {3, 3}, {1, 1}, {1, 1}));
    layers.push_back(conv_block(512, {8, 9}, {1, 1}, {0, 0}));
    // Decoder: 1x1 -> 5x5 -> 10 -> 20 -> 40 -> 80, crop to 70.
    layers.push_back(conv_block(512, {5, 5}, {1, 1}, {0, 0}, "conv_transpose"));
    layers.push_back(conv_block(512, {3, 3}, {1, 1}, {1, 1}));
    const std::size_t widths[] = {256, 128, 64, 32};
    for (auto w : widths) {
        layers.push_back(conv_block(w, {4, 4}, {2, 2}, {1, 1}, "conv_transpose"));
        layers.push_back(conv_block(w, {3, 3}, {1, 1}, {1, 1}));
    }
    layers.push_back(json{{"kind", "center_crop"}, {"size", {70, 70}}});
    json out = conv_block(1, {3, 3}, {1, 1}, {1, 1});
    out["activation"] = "tanh";
    out.erase("slope");
    layers.push_back(out);
    return json{{"name", "inversionnet"}, {"input_shape", {5, 1000, 70}}, {"layers", layers}};
}

json tiny_testnet_config() {
    json layers = json::array();
    layers.push_back(conv_block(16, {7, 1}, {4, 1}, {3, 0}));
    layers.push_back(conv_block(32, {3, 3}, {2, 2}, {1, 1}));
    layers.push_back(conv_block(32, {3, 3}, {2, 2}, {1, 1}));
    layers.push_back(conv_block(16, {4, 4}, {2, 2}, {1, 1}, "conv_transpose"));
    layers.push_back(conv_block(16, {4, 4}, {2, 2}, {1, 1}, "conv_transpose"));
    json out = conv_block(1, {3, 3}, {1, 1}, {1, 1});
    out["activation"] = "tanh";
    out.erase("slope");
    layers.push_back(out);
    return json{{"name", "tiny"}, {"input_shape", {3, 64, 16}}, {"layers", layers}};
}

NetworkGraph build_inversionnet_default() { return NetworkGraph::from_config(inversionnet_config()); }
NetworkGraph build_tiny_testnet() { return NetworkGraph::from_config(tiny_testnet_config()); }

template class BasicNetwork<float>;
template class BasicNetwork<double>;
template BasicNetwork<double> BasicNetwork<float>::cast<double>() const;
template BasicNetwork<float> BasicNetwork<double>::cast<float>() const;
template BasicNetwork<float> BasicNetwork<float>::cast<float>() const;
template struct Gradients<float>;
template struct Gradients<double>;

#define EINV_INSTANTIATE(T)                                                                                     \
    template ForwardResult<T> forward(BasicNetwork<T>&, const TensorT<T>&, Mode);                               \
    template TensorT<T> predict(const BasicNetwork<T>&, const TensorT<T>&, const ChannelMasks*);                \
    template Gradients<T> backward(const BasicNetwork<T>&, const ForwardResult<T>&, const TensorT<T>&);          \
    template void init_weights(BasicNetwork<T>&, std::uint64_t);

EINV_INSTANTIATE(float)
EINV_INSTANTIATE(double)

#undef EINV_INSTANTIATE

}  // namespace einv
