// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "einv/costs.hpp"
#include "einv/pruner.hpp"
#include "scenarios.hpp"

using namespace einv;
using namespace einv::testing;
using nlohmann::json;

namespace {

FilterScores one_layer(std::vector<double> s) { return FilterScores{{LayerScores{1, true, std::move(s)}}}; }

json chain_4_6_8() {
    json layers = json::array();
    layers.push_back({{"kind", "conv"}, {"out_channels", 6}, {"kernel", {3, 3}}, {"padding", {1, 1}}, {"batchnorm", true}});
    layers.push_back({{"kind", "conv"}, {"out_channels", 8}, {"kernel", {3, 3}}, {"padding", {1, 1}}, {"batchnorm", true}});
    return {{"name", "chain"}, {"input_shape", {4, 6, 6}}, {"layers", layers}};
}

}  // namespace

TEST_CASE("rounding rule for kept filters") {
    CHECK(kept_filters(4, 0.5) == 2);
    CHECK(kept_filters(5, 0.5) == 3);  // round_half_up(2.5)
    CHECK(kept_filters(512, 0.5) == 256);
    CHECK(kept_filters(512, 0.9) == 51);
    CHECK(kept_filters(3, 0.9) == 1);
    CHECK(kept_filters(1, 0.5) == 1);
    CHECK(kept_filters(7, 0.0) == 7);
    CHECK_THROWS(kept_filters(4, 1.0));
    CHECK_THROWS(kept_filters(4, -0.1));
    for (std::size_t n = 1; n <= 600; ++n) {
        for (std::size_t t = 0; t <= 9; ++t) CHECK(kept_filters(n, static_cast<double>(t) / 10.0) == kept_oracle(n, t));
    }
}

TEST_CASE("L1 scores: hand examples and flat-loop oracle") {
    NetworkGraph net = NetworkGraph::from_config(chain_4_6_8());
    init_weights(net, 2);
    auto& w = net.mutable_layers()[0].conv->weights;
    w.fill(0.0f);
    w.at(0, 0, 0, 0) = 1.0f;
    w.at(0, 1, 0, 1) = -1.0f;
    w.at(0, 2, 1, 1) = 2.0f;
    const auto s = l1_scores(net);
    REQUIRE(s.layers.size() == 2);
    CHECK(s.layers[0].scores[0] == 4.0);
    CHECK(s.layers[0].scores[1] == 0.0);
    CHECK_FALSE(s.layers[1].prunable);

    Rng rng(12);
    for (int trial = 0; trial < 30; ++trial) {
        NetworkGraph r = NetworkGraph::from_config(random_net_config(rng));
        init_weights(r, rng());
        const auto sc = l1_scores(r);
        std::size_t pos = 0;
        for (const auto& l : r.layers()) {
            if (!l.spec.producing()) continue;
            REQUIRE(sc.layers[pos].scores.size() == l.spec.out_channels);
            for (std::size_t j = 0; j < l.spec.out_channels; ++j) {
                CHECK(sc.layers[pos].scores[j] == doctest::Approx(l1_oracle(l, j)).epsilon(1e-5));
            }
            ++pos;
        }
    }
}

TEST_CASE("select_filters hand examples") {
    const auto plan = select_filters(one_layer({3, 1, 4, 2}), 0.5);
    CHECK(plan.layers[0].keep == std::vector<std::uint8_t>{1, 0, 1, 0});
    CHECK(select_filters(one_layer({3, 1, 4, 2}), 0.0).layers[0].keep == std::vector<std::uint8_t>{1, 1, 1, 1});
    const auto five = select_filters(one_layer({5, 4, 3, 2, 1}), 0.5);
    CHECK(five.layers[0].kept() == 3);
    CHECK(five.layers[0].keep == std::vector<std::uint8_t>{1, 1, 1, 0, 0});
    // Ties: the lower index goes first.
    CHECK(select_filters(one_layer({1, 1, 1, 1}), 0.5).layers[0].keep == std::vector<std::uint8_t>{0, 0, 1, 1});
    FilterScores fixed{{LayerScores{3, false, {0.0, 0.0, 9.0}}}};
    CHECK(select_filters(fixed, 0.9).layers[0].keep == std::vector<std::uint8_t>{1, 1, 1});
}

TEST_CASE("property: select_filters matches the sort-and-cut oracle, ties included") {
    Rng rng(99);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = rand_between(rng, 1, 40), tenths = rand_between(rng, 0, 9);
        std::vector<double> s(n);
        for (auto& v : s) v = static_cast<double>(rng() % 6);  // many ties
        const auto plan = select_filters(one_layer(s), static_cast<double>(tenths) / 10.0);
        CHECK(plan.layers[0].keep == select_oracle(s, kept_oracle(n, tenths)));
    }
}

TEST_CASE("property: selection is invariant to positive per-layer scaling") {
    Rng rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        NetworkGraph net = NetworkGraph::from_config(random_net_config(rng));
        init_weights(net, rng());
        const auto before = select_filters(l1_scores(net), 0.5);
        for (auto& l : net.mutable_layers()) {
            if (!l.conv) continue;
            const float k = std::uniform_real_distribution<float>(0.5f, 4.0f)(rng);
            for (auto& v : l.conv->weights.values()) v *= k;
        }
        CHECK(select_filters(l1_scores(net), 0.5).to_json() == before.to_json());
    }
}

TEST_CASE("apply_plan slices the layer and the next layer's input kernels") {
    NetworkGraph net = NetworkGraph::from_config(chain_4_6_8());
    init_weights(net, 1);
    PruningPlan plan = identity_plan(net);
    plan.layers[0].keep = {1, 0, 1, 0, 0, 1};
    const NetworkGraph p = apply_plan(net, plan);
    CHECK(p.layers()[0].conv->weights.shape() == Shape{3, 4, 3, 3});
    CHECK(p.layers()[0].conv->bias->shape() == Shape{3});
    CHECK(p.layers()[0].bn->running_var.shape() == Shape{3});
    CHECK(p.layers()[1].conv->weights.shape() == Shape{8, 3, 3, 3});
    CHECK(p.layers()[1].spec.in_channels == 3);
    CHECK(p.layers()[0].conv->weights.at(1, 2, 0, 1) == net.layers()[0].conv->weights.at(2, 2, 0, 1));
    CHECK(p.layers()[1].conv->weights.at(5, 2, 1, 1) == net.layers()[1].conv->weights.at(5, 5, 1, 1));
    CHECK(p.output_shape() == net.output_shape());
    CHECK(param_count(p).total_params < param_count(net).total_params);
}

TEST_CASE("identity plan leaves outputs bit-identical") {
    Rng rng(4);
    NetworkGraph net = build_tiny_testnet();
    init_weights(net, 1);
    const NetworkGraph same = apply_plan(net, identity_plan(net));
    const Tensor x = random_tensor<float>({2, 3, 64, 16}, rng);
    CHECK(predict(net, x) == predict(same, x));
}

TEST_CASE("congruence errors name the layer") {
    NetworkGraph net = NetworkGraph::from_config(chain_4_6_8());
    PruningPlan plan = identity_plan(net);
    plan.layers[0].keep.pop_back();
    try {
        apply_plan(net, plan);
        FAIL("expected CongruenceError");
    } catch (const CongruenceError& e) {
        CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
    }
    plan = identity_plan(net);
    plan.layers[0].keep.assign(6, 0);
    CHECK_THROWS_AS(apply_plan(net, plan), CongruenceError);
    plan = identity_plan(net);
    plan.layers[1].keep[0] = 0;  // final layer is not prunable
    CHECK_THROWS_AS(apply_plan(net, plan), CongruenceError);
}

TEST_CASE("property: random plans on random nets stay executable and shrink parameters") {
    Rng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        NetworkGraph net = NetworkGraph::from_config(random_net_config(rng));
        init_weights(net, rng());
        PruningPlan plan = identity_plan(net);
        bool any = false;
        std::size_t pos = 0;
        for (const auto& l : net.layers()) {
            if (!l.spec.producing()) continue;
            auto& keep = plan.layers[pos++].keep;
            if (!l.spec.prunable) continue;
            for (auto& k : keep) k = rng() % 2;
            if (std::count(keep.begin(), keep.end(), 1) == 0) keep[rng() % keep.size()] = 1;
            any = any || std::count(keep.begin(), keep.end(), 0) > 0;
        }
        const NetworkGraph p = apply_plan(net, plan);
        CHECK_NOTHROW(p.validate());
        Shape shape{2};
        shape.insert(shape.end(), net.input_shape().begin(), net.input_shape().end());
        const Tensor y = predict(p, random_tensor<float>(shape, rng));
        CHECK(y.dim(1) == net.output_shape()[0]);
        if (any) CHECK(param_count(p).total_params < param_count(net).total_params);
    }
}

TEST_CASE("pruning zero filters in batchnorm-free nets is exact") {
    Rng rng(1234);
    std::size_t pruned = 0;
    for (int trial = 0; trial < 30; ++trial) {
        const auto t = zero_filter_trial(rng, 3);
        CHECK(t.identical);
        pruned += t.pruned;
    }
    CHECK(pruned > 20);
}

TEST_CASE("plan JSON round trip") {
    NetworkGraph net = build_tiny_testnet();
    init_weights(net, 3);
    const PruningPlan plan = select_filters(l1_scores(net), 0.5);
    const json j = plan.to_json();
    CHECK(j.at("layers").at("1").size() == 16);
    CHECK(PruningPlan::from_json(j).to_json() == j);
    json bad = j;
    bad["layers"]["1"][0] = 2;
    CHECK_THROWS(PruningPlan::from_json(bad));
}

TEST_CASE("exhaustive plan: zero filter is pruned; r = 0 is the identity") {
    json layers = json::array();
    layers.push_back({{"kind", "conv"}, {"out_channels", 3}, {"kernel", {3, 3}}, {"padding", {1, 1}}, {"batchnorm", false}});
    layers.push_back({{"kind", "conv"}, {"out_channels", 1}, {"kernel", {3, 3}}, {"padding", {1, 1}}, {"batchnorm", false},
                      {"activation", "identity"}});
    NetworkGraph net = NetworkGraph::from_config({{"name", "three"}, {"input_shape", {1, 5, 5}}, {"layers", layers}});
    init_weights(net, 8);
    auto& first = net.mutable_layers()[0];
    for (std::size_t i = 0; i < 9; ++i) first.conv->weights[9 + i] = 0.0f;  // filter 1
    Rng rng(3);
    const Tensor x = random_tensor<float>({3, 1, 5, 5}, rng);
    const Tensor y = predict(net, x);  // the unpruned net is a perfect fit
    const auto ex = exhaustive_plan(net, 1.0 / 3.0, x, y);
    CHECK(ex.evaluated == 3);
    CHECK(ex.plan.layers[0].keep == std::vector<std::uint8_t>{1, 0, 1});
    CHECK(ex.loss == 0.0);

    const auto id = exhaustive_plan(net, 0.0, x, y);
    CHECK(id.evaluated == 1);
    CHECK_FALSE(id.plan.prunes_anything());
}

TEST_CASE("exhaustive plan dominates the L1 plan; guard refuses big spaces") {
    Rng rng(55);
    for (int trial = 0; trial < 10; ++trial) {
        const auto t = dominance_trial(rng);
        CHECK(t.evaluated == 36);
        CHECK(t.exhaustive_loss <= t.l1_loss);
        CHECK(t.select_matches_oracle);
    }
    NetworkGraph net = build_tiny_testnet();
    CHECK(plan_space_size(NetworkGraph::from_config(oracle_net_config()), 0.5) == 36.0);
    CHECK(plan_space_size(net, 0.5) > kExhaustiveGuard);
    const Tensor x({1, 3, 64, 16}), y({1, 1, 16, 16});
    CHECK_THROWS_AS(exhaustive_plan(net, 0.5, x, y), CombinatorialLimitError);
}
