// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "einv/netgraph.hpp"
#include "support.hpp"

using namespace einv;
using namespace einv::testing;
using nlohmann::json;

namespace {

// conv -> deconv -> crop -> conv: every layer kind, small enough for finite
// differences over all parameters.
json mini_config() {
    json layers = json::array();
    layers.push_back({{"kind", "conv"}, {"out_channels", 3}, {"kernel", {3, 2}}, {"stride", {2, 1}}, {"padding", {1, 0}},
                      {"batchnorm", true}, {"activation", "leaky_relu"}, {"slope", 0.2}});
    layers.push_back({{"kind", "conv_transpose"}, {"out_channels", 2}, {"kernel", {2, 2}}, {"stride", {2, 2}},
                      {"padding", {0, 0}}, {"batchnorm", true}, {"activation", "leaky_relu"}, {"slope", 0.2}});
    layers.push_back({{"kind", "center_crop"}, {"size", {5, 5}}});
    layers.push_back({{"kind", "conv"}, {"out_channels", 1}, {"kernel", {3, 3}}, {"padding", {1, 1}},
                      {"batchnorm", false}, {"activation", "tanh"}});
    return {{"name", "mini"}, {"input_shape", {2, 6, 4}}, {"layers", layers}};
}

}  // namespace

TEST_CASE("tiny testnet shapes and parameter count") {
    const NetworkGraph net = build_tiny_testnet();
    CHECK(net.input_shape() == Shape{3, 64, 16});
    CHECK(net.output_shape() == Shape{1, 16, 16});
    CHECK(net.producing_layer_count() == 6);
    std::uint64_t params = 0;
    for (auto* p : const_cast<NetworkGraph&>(net).parameters()) params += p->size();
    // sum over layers of c_out*c_in*kh*kw + c_out (bias) + 2*c_out (gamma, beta)
    CHECK(params == 26931);
}

TEST_CASE("default architecture follows the InversionNet layer table") {
    const NetworkGraph net = build_inversionnet_default();
    CHECK(net.input_shape() == Shape{5, 1000, 70});
    CHECK(net.output_shape() == Shape{1, 70, 70});
    CHECK(net.producing_layer_count() == 25);
    const auto shapes = net.layer_output_shapes();
    CHECK(shapes[0] == Shape{32, 500, 70});
    CHECK(shapes[6] == Shape{128, 63, 70});
    CHECK(shapes[7] == Shape{128, 32, 35});
    CHECK(shapes[13] == Shape{512, 1, 1});
    CHECK(shapes[14] == Shape{512, 5, 5});
    CHECK(shapes[22] == Shape{32, 80, 80});
    CHECK(shapes[23] == Shape{32, 80, 80});
    CHECK(shapes[24] == Shape{32, 70, 70});
    std::uint64_t params = 0;
    for (const auto* p : net.parameters()) params += p->size();
    CHECK(params == 24409123);
}

TEST_CASE("config round trip and validation") {
    const NetworkGraph net = NetworkGraph::from_config(mini_config());
    const json again = NetworkGraph::from_config(net.to_config()).to_config();
    CHECK(again == net.to_config());
    CHECK(net.layers()[1].spec.in_channels == 3);
    CHECK(net.layers()[1].spec.prunable);
    CHECK_FALSE(net.layers()[3].spec.prunable);

    json bad = mini_config();
    bad["layers"][0]["kind"] = "dense";
    CHECK_THROWS(NetworkGraph::from_config(bad));
    json small = mini_config();
    small["input_shape"] = {2, 1, 1};
    CHECK_THROWS_AS(NetworkGraph::from_config(small), GeometryError);
}

TEST_CASE("eval forward equals predict; predict never mutates the net") {
    Rng rng(1);
    NetworkGraph net = build_tiny_testnet();
    init_weights(net, 3);
    const Tensor x = random_tensor<float>({3, 3, 64, 16}, rng);
    const NetworkGraph before = net;
    const Tensor a = predict(net, x);
    CHECK(net.to_config() == before.to_config());
    const auto fwd = forward(net, x, Mode::eval);
    CHECK(fwd.output == a);
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        if (!net.layers()[i].bn) continue;
        CHECK(net.layers()[i].bn->running_mean == before.layers()[i].bn->running_mean);
    }
    CHECK_THROWS_AS(predict(net, random_tensor<float>({1, 3, 60, 16}, rng)), ShapeError);
}

TEST_CASE("train-mode forward commits running statistics") {
    Rng rng(2);
    NetworkGraph net = build_tiny_testnet();
    init_weights(net, 3);
    const Tensor x = random_tensor<float>({4, 3, 64, 16}, rng);
    forward(net, x, Mode::train);
    CHECK(net.layers()[0].bn->running_mean != BatchNormParamsT<float>::identity(16).running_mean);
}

TEST_CASE("backward rejects a cache from an older revision") {
    Rng rng(3);
    NetworkGraph net = build_tiny_testnet();
    init_weights(net, 1);
    const Tensor x = random_tensor<float>({2, 3, 64, 16}, rng);
    const auto fwd = forward(net, x, Mode::train);
    const Tensor g(fwd.output.shape(), 1.0f);
    CHECK_NOTHROW(backward(net, fwd, g));
    net.touch();
    CHECK_THROWS_AS(backward(net, fwd, g), ContractError);
}

TEST_CASE("whole-network gradients agree with central differences (64-bit)") {
    Rng rng(4);
    NetworkGraphD net = NetworkGraph::from_config(mini_config()).cast<double>();
    init_weights(net, 5);
    for (auto* p : net.parameters()) {
        for (std::size_t i = 0; i < p->size(); ++i) (*p)[i] += 0.1 * std::uniform_real_distribution<double>(-1, 1)(rng);
    }
    TensorD x = random_tensor<double>({3, 2, 6, 4}, rng);
    const auto fwd = forward(net, x, Mode::train);
    const TensorD g = random_tensor<double>(fwd.output.shape(), rng);
    const auto grads = backward(net, fwd, g);
    auto loss = [&] { return dot(forward(net, x, Mode::train).output, g); };
    auto params = net.parameters();
    const auto flat = grads.flat();
    REQUIRE(params.size() == flat.size());
    // A bias feeding batchnorm has an exactly zero gradient, so it is checked
    // directly instead of against difference-quotient noise.
    std::vector<bool> zero_grad;
    for (const auto& l : net.layers()) {
        if (!l.spec.producing()) continue;
        zero_grad.push_back(false);
        if (l.conv->bias) zero_grad.push_back(l.bn.has_value());
        if (l.bn) zero_grad.insert(zero_grad.end(), {false, false});
    }
    REQUIRE(zero_grad.size() == params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        INFO("parameter tensor " << i);
        if (zero_grad[i]) {
            for (double v : flat[i]->values()) CHECK(std::abs(v) < 1e-12);
        } else {
            CHECK(fd_relative_error(*params[i], *flat[i], loss) < 1e-4);
        }
    }
    CHECK(fd_relative_error(x, grads.input, loss) < 1e-4);
}

TEST_CASE("init_weights is seeded Kaiming fan-in normal") {
    NetworkGraph a = build_tiny_testnet(), b = build_tiny_testnet(), c = build_tiny_testnet();
    init_weights(a, 42);
    init_weights(b, 42);
    init_weights(c, 43);
    CHECK(a.layers()[1].conv->weights == b.layers()[1].conv->weights);
    CHECK(a.layers()[1].conv->weights != c.layers()[1].conv->weights);

    NetworkGraph big = build_inversionnet_default();
    init_weights(big, 7);
    const auto& layer = big.layers()[15];  // 512 -> 512, 3x3
    const auto& w = layer.conv->weights;
    double sum = 0, sq = 0;
    for (float v : w.values()) {
        sum += v;
        sq += static_cast<double>(v) * v;
    }
    const double n = static_cast<double>(w.size());
    const double std = std::sqrt(sq / n - (sum / n) * (sum / n));
    CHECK(fan_in(layer.spec) == 512 * 9);
    CHECK(std == doctest::Approx(std::sqrt(2.0 / (512 * 9))).epsilon(0.01));
    for (float v : layer.conv->bias->values()) CHECK(v == 0.0f);
    CHECK(layer.bn->gamma == Tensor({512}, 1.0f));
}

TEST_CASE("channel masks zero the masked outputs") {
    Rng rng(6);
    NetworkGraph net = build_tiny_testnet();
    init_weights(net, 1);
    const Tensor x = random_tensor<float>({1, 3, 64, 16}, rng);
    ChannelMasks masks(net.layers().size());
    masks[0].assign(16, 1);
    masks[0][3] = 0;
    const Tensor masked = predict(net, x, &masks);
    CHECK(masked != predict(net, x));
    masks[0].assign(16, 1);
    CHECK(predict(net, x, &masks) == predict(net, x));
}

TEST_CASE("double-precision copy predicts the same maps") {
    Rng rng(8);
    NetworkGraph net = build_tiny_testnet();
    init_weights(net, 2);
    const Tensor x = random_tensor<float>({2, 3, 64, 16}, rng);
    CHECK(max_abs_diff(predict(net, x), predict(net.cast<double>(), x.cast<double>())) < 1e-4);
}
