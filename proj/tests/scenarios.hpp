// SPDX-License-Identifier: Apache-2.0
//
// Randomized trials shared by the unit tests and the acceptance runner.

#pragma once

#include <algorithm>
#include <numeric>

#include "einv/pruner.hpp"
#include "random_nets.hpp"

namespace einv::testing {

/// Kept filters for ratio tenths/10 in integer arithmetic:
/// max(1, round_half_up(n * (10 - tenths) / 10)).
inline std::size_t kept_oracle(std::size_t n, std::size_t tenths) {
    return std::max<std::size_t>(1, (n * (10 - tenths) + 5) / 10);
}

/// Flat-loop absolute sum over filter j's weights (axis 0 for conv, axis 1 for
/// transposed conv).
inline double l1_oracle(const Layer<float>& layer, std::size_t j) {
    const auto& w = layer.conv->weights;
    double s = 0.0;
    for (std::size_t a = 0; a < w.dim(0); ++a)
        for (std::size_t b = 0; b < w.dim(1); ++b)
            for (std::size_t u = 0; u < w.dim(2); ++u)
                for (std::size_t v = 0; v < w.dim(3); ++v) {
                    const bool mine = layer.spec.kind == LayerKind::conv ? a == j : b == j;
                    if (mine) s += std::abs(static_cast<double>(w.at(a, b, u, v)));
                }
    return s;
}

/// Sort-and-cut: order by (score, index) and drop the first n - kept.
inline std::vector<std::uint8_t> select_oracle(const std::vector<double>& scores, std::size_t kept) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] != scores[b] ? scores[a] < scores[b] : a < b;
    });
    std::vector<std::uint8_t> keep(scores.size(), 1);
    for (std::size_t i = 0; i + kept < scores.size(); ++i) keep[order[i]] = 0;
    return keep;
}

/// Zeroes a random proper subset of filters (weights and bias) in random
/// prunable layers of a batchnorm-free net, prunes exactly those, and reports
/// whether eval outputs on `inputs_per_net` fresh inputs stayed bit-identical.
struct ZeroFilterTrial {
    bool identical = true;
    std::size_t inputs = 0;
    std::size_t pruned = 0;
};

inline ZeroFilterTrial zero_filter_trial(Rng& rng, std::size_t inputs_per_net) {
    RandomNetOptions opt;
    opt.allow_batchnorm = false;
    NetworkGraph net = NetworkGraph::from_config(random_net_config(rng, opt));
    init_weights(net, rng());
    PruningPlan plan = identity_plan(net);
    ZeroFilterTrial t;
    auto& layers = net.mutable_layers();
    // Surviving filters get nonzero biases so the check is not vacuous.
    for (auto& l : layers) {
        if (l.conv && l.conv->bias) *l.conv->bias = random_tensor<float>(l.conv->bias->shape(), rng, -0.5, 0.5);
    }
    std::size_t pos = 0;
    for (auto& l : layers) {
        if (!l.spec.producing()) continue;
        auto& mask = plan.layers[pos++].keep;
        if (!l.spec.prunable || mask.size() < 2) continue;
        for (std::size_t j = 0; j + 1 < mask.size(); ++j) {
            if (rng() % 2) continue;
            mask[j] = 0;
            ++t.pruned;
            auto& w = l.conv->weights;
            for (std::size_t a = 0; a < w.dim(0); ++a)
                for (std::size_t b = 0; b < w.dim(1); ++b)
                    for (std::size_t u = 0; u < w.dim(2); ++u)
                        for (std::size_t v = 0; v < w.dim(3); ++v) {
                            if ((l.spec.kind == LayerKind::conv ? a : b) == j) w.at(a, b, u, v) = 0.0f;
                        }
            if (l.conv->bias) (*l.conv->bias)[j] = 0.0f;
        }
    }
    const NetworkGraph pruned = apply_plan(net, plan);
    for (std::size_t i = 0; i < inputs_per_net; ++i) {
        Shape shape{1};
        shape.insert(shape.end(), net.input_shape().begin(), net.input_shape().end());
        const Tensor x = random_tensor<float>(shape, rng, -2.0, 2.0);
        t.identical = t.identical && predict(net, x) == predict(pruned, x);
        ++t.inputs;
    }
    return t;
}

inline nlohmann::json oracle_net_config() {
    using nlohmann::json;
    json layers = json::array();
    for (int i = 0; i < 2; ++i) {
        layers.push_back({{"kind", "conv"}, {"out_channels", 4}, {"kernel", {3, 3}}, {"padding", {1, 1}},
                          {"batchnorm", false}, {"activation", "leaky_relu"}, {"slope", 0.2}});
    }
    layers.push_back({{"kind", "conv"}, {"out_channels", 1}, {"kernel", {3, 3}}, {"padding", {1, 1}},
                      {"batchnorm", false}, {"activation", "tanh"}});
    return {{"name", "oracle"}, {"input_shape", {2, 8, 8}}, {"layers", layers}};
}

struct DominanceTrial {
    double exhaustive_loss = 0.0;
    double l1_loss = 0.0;
    std::uint64_t evaluated = 0;
    bool select_matches_oracle = true;
};

/// Two prunable 4-filter layers at r = 0.5: 36 candidate plans.
inline DominanceTrial dominance_trial(Rng& rng) {
    NetworkGraph net = NetworkGraph::from_config(oracle_net_config());
    init_weights(net, rng());
    const Tensor x = random_tensor<float>({4, 2, 8, 8}, rng);
    const Tensor y = random_tensor<float>({4, 1, 8, 8}, rng);
    DominanceTrial t;
    const auto ex = exhaustive_plan(net, 0.5, x, y);
    const auto scores = l1_scores(net);
    const auto plan = select_filters(scores, 0.5);
    t.exhaustive_loss = ex.loss;
    t.l1_loss = masked_loss(net, plan, x, y);
    t.evaluated = ex.evaluated;
    std::size_t pos = 0;
    for (const auto& l : net.layers()) {
        if (!l.spec.producing()) continue;
        std::vector<double> oracle_scores;
        for (std::size_t j = 0; j < l.spec.out_channels; ++j) oracle_scores.push_back(l1_oracle(l, j));
        const auto expect = l.spec.prunable ? select_oracle(oracle_scores, kept_oracle(l.spec.out_channels, 5))
                                            : std::vector<std::uint8_t>(l.spec.out_channels, 1);
        t.select_matches_oracle = t.select_matches_oracle && plan.layers[pos].keep == expect;
        ++pos;
    }
    return t;
}

}  // namespace einv::testing
