// SPDX-License-Identifier: Apache-2.0

#include "einv/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace einv {

using nlohmann::json;

std::size_t LayerMask::kept() const {
    return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), std::uint8_t{1}));
}

bool PruningPlan::prunes_anything() const {
    for (const auto& l : layers) {
        if (l.kept() != l.keep.size()) return true;
    }
    return false;
}

json PruningPlan::to_json() const {
    json layers_json = json::object();
    for (const auto& l : layers) {
        std::vector<int> bits(l.keep.begin(), l.keep.end());
        layers_json[std::to_string(l.layer)] = bits;
    }
    return json{{"layers", layers_json}};
}

PruningPlan PruningPlan::from_json(const json& j) {
    PruningPlan plan;
    for (const auto& [key, bits] : j.at("layers").items()) {
        LayerMask m;
        m.layer = std::stoul(key);
        for (const auto& b : bits) {
            const int v = b.get<int>();
            if (v != 0 && v != 1) throw std::invalid_argument("plan masks must contain only 0 or 1");
            m.keep.push_back(static_cast<std::uint8_t>(v));
        }
        plan.layers.push_back(std::move(m));
    }
    std::sort(plan.layers.begin(), plan.layers.end(), [](const auto& a, const auto& b) { return a.layer < b.layer; });
    return plan;
}

std::size_t kept_filters(std::size_t n, double r) {
    if (!(r >= 0.0 && r < 1.0)) throw std::invalid_argument("pruning ratio must lie in [0, 1), got " + std::to_string(r));
    const double exact = static_cast<double>(n) * (1.0 - r);
    const auto rounded = static_cast<std::size_t>(std::floor(exact + 0.5 + 1e-9));
    return std::clamp<std::size_t>(rounded, 1, n);
}

namespace {

// L1 norm of filter j; transposed-conv filters live on weight axis 1.
double filter_l1(const Layer<float>& layer, std::size_t j) {
    const auto& w = layer.conv->weights;
    const std::size_t kk = w.dim(2) * w.dim(3);
    double s = 0.0;
    if (layer.spec.kind == LayerKind::conv) {
        const std::size_t slab = w.dim(1) * kk;
        const float* p = w.data() + j * slab;
        for (std::size_t i = 0; i < slab; ++i) s += std::abs(static_cast<double>(p[i]));
    } else {
        for (std::size_t ci = 0; ci < w.dim(0); ++ci) {
            const float* p = w.data() + (ci * w.dim(1) + j) * kk;
            for (std::size_t i = 0; i < kk; ++i) s += std::abs(static_cast<double>(p[i]));
        }
    }
    return s;
}

const LayerMask& mask_for(const PruningPlan& plan, std::size_t pos, const LayerSpec& spec) {
    if (pos >= plan.layers.size()) {
        throw CongruenceError("plan has no mask for layer " + std::to_string(spec.index));
    }
    const auto& m = plan.layers[pos];
    if (m.layer != spec.index) {
        throw CongruenceError("plan entry " + std::to_string(pos) + " targets layer " + std::to_string(m.layer) +
                              " but the next producing layer is " + std::to_string(spec.index));
    }
    if (m.keep.size() != spec.out_channels) {
        throw CongruenceError("plan mask for layer " + std::to_string(spec.index) + " has " +
                              std::to_string(m.keep.size()) + " entries but the layer has " +
                              std::to_string(spec.out_channels) + " filters");
    }
    if (m.kept() == 0) throw CongruenceError("plan removes every filter of layer " + std::to_string(spec.index));
    if (!spec.prunable && m.kept() != m.keep.size()) {
        throw CongruenceError("plan prunes non-prunable layer " + std::to_string(spec.index));
    }
    return m;
}

std::vector<std::size_t> kept_indices(const std::vector<std::uint8_t>& keep) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (keep[i]) idx.push_back(i);
    }
    return idx;
}

Tensor select_vector(const Tensor& v, const std::vector<std::size_t>& idx) {
    Tensor out({idx.size()});
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
    return out;
}

// Keeps rows `a_idx` of axis 0 and `b_idx` of axis 1 of a rank-4 weight tensor.
Tensor select_weights(const Tensor& w, const std::vector<std::size_t>& a_idx, const std::vector<std::size_t>& b_idx) {
    const std::size_t kk = w.dim(2) * w.dim(3);
    Tensor out({a_idx.size(), b_idx.size(), w.dim(2), w.dim(3)});
    for (std::size_t a = 0; a < a_idx.size(); ++a) {
        for (std::size_t b = 0; b < b_idx.size(); ++b) {
            const float* src = w.data() + (a_idx[a] * w.dim(1) + b_idx[b]) * kk;
            std::copy(src, src + kk, out.data() + (a * b_idx.size() + b) * kk);
        }
    }
    return out;
}

std::vector<std::size_t> iota(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

}  // namespace

FilterScores l1_scores(const NetworkGraph& net) {
    FilterScores out;
    for (const auto& l : net.layers()) {
        if (!l.spec.producing()) continue;
        LayerScores s{l.spec.index, l.spec.prunable, {}};
        s.scores.resize(l.spec.out_channels);
        for (std::size_t j = 0; j < l.spec.out_channels; ++j) s.scores[j] = filter_l1(l, j);
        out.layers.push_back(std::move(s));
    }
    return out;
}

PruningPlan select_filters(const FilterScores& scores, double r) {
    if (!(r >= 0.0 && r < 1.0)) throw std::invalid_argument("pruning ratio must lie in [0, 1), got " + std::to_string(r));
    PruningPlan plan;
    for (const auto& ls : scores.layers) {
        const std::size_t n = ls.scores.size();
        LayerMask m{ls.layer, std::vector<std::uint8_t>(n, 1)};
        if (ls.prunable && n > 0) {
            const std::size_t drop = n - kept_filters(n, r);
            auto order = iota(n);
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return ls.scores[a] < ls.scores[b]; });
            for (std::size_t i = 0; i < drop; ++i) m.keep[order[i]] = 0;
        }
        plan.layers.push_back(std::move(m));
    }
    return plan;
}

PruningPlan identity_plan(const NetworkGraph& net) {
    PruningPlan plan;
    for (const auto& l : net.layers()) {
        if (l.spec.producing()) plan.layers.push_back({l.spec.index, std::vector<std::uint8_t>(l.spec.out_channels, 1)});
    }
    return plan;
}

NetworkGraph apply_plan(const NetworkGraph& net, const PruningPlan& plan) {
    std::vector<Layer<float>> layers;
    std::size_t pos = 0;
    std::vector<std::size_t> in_idx = iota(net.input_shape()[0]);
    for (const auto& src : net.layers()) {
        Layer<float> l = src;
        l.spec.in_channels = in_idx.size();
        if (!src.spec.producing()) {
            l.spec.out_channels = in_idx.size();
            layers.push_back(std::move(l));
            continue;
        }
        const auto& mask = mask_for(plan, pos++, src.spec);
        const auto out_idx = kept_indices(mask.keep);
        const auto& w = src.conv->weights;
        l.conv->weights = src.spec.kind == LayerKind::conv ? select_weights(w, out_idx, in_idx)
                                                           : select_weights(w, in_idx, out_idx);
        if (src.conv->bias) l.conv->bias = select_vector(*src.conv->bias, out_idx);
        if (src.bn) {
            l.bn->gamma = select_vector(src.bn->gamma, out_idx);
            l.bn->beta = select_vector(src.bn->beta, out_idx);
            l.bn->running_mean = select_vector(src.bn->running_mean, out_idx);
            l.bn->running_var = select_vector(src.bn->running_var, out_idx);
        }
        l.spec.out_channels = out_idx.size();
        in_idx = out_idx;
        layers.push_back(std::move(l));
    }
    if (pos != plan.layers.size()) {
        throw CongruenceError("plan has " + std::to_string(plan.layers.size()) + " masks but the network has " +
                              std::to_string(pos) + " producing layers");
    }
    return NetworkGraph(net.name(), net.input_shape(), std::move(layers));
}

double masked_loss(const NetworkGraph& net, const PruningPlan& plan, const Tensor& inputs, const Tensor& targets) {
    ChannelMasks masks(net.layers().size());
    std::size_t pos = 0;
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        const auto& spec = net.layers()[i].spec;
        if (!spec.producing()) continue;
        masks[i] = mask_for(plan, pos++, spec).keep;
    }
    return mae_loss(predict(net, inputs, &masks), targets).loss;
}

double plan_space_size(const NetworkGraph& net, double r) {
    double total = 1.0;
    for (const auto& l : net.layers()) {
        if (!l.spec.producing() || !l.spec.prunable) continue;
        const std::size_t n = l.spec.out_channels, drop = n - kept_filters(n, r);
        // C(n, drop) in floating point; exact for the sizes the guard admits.
        double c = 1.0;
        for (std::size_t i = 0; i < drop; ++i) c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
        total *= std::round(c);
    }
    return total;
}

ExhaustiveResult exhaustive_plan(const NetworkGraph& net, double r, const Tensor& inputs, const Tensor& targets) {
    if (inputs.rank() == 0 || inputs.dim(0) == 0) throw std::invalid_argument("exhaustive_plan needs a nonempty batch");
    const double space = plan_space_size(net, r);
    if (space > kExhaustiveGuard) {
        throw CombinatorialLimitError("exhaustive search over " + std::to_string(space) +
                                      " plans exceeds the 1e6 guard; use l1_scores + select_filters instead");
    }
    PruningPlan plan = identity_plan(net);
    // For each prunable layer: the current combination of pruned indices.
    struct Slot {
        std::size_t plan_pos, n, drop;
        std::vector<std::size_t> combo;
    };
    std::vector<Slot> slots;
    std::size_t pos = 0;
    for (const auto& l : net.layers()) {
        if (!l.spec.producing()) continue;
        if (l.spec.prunable) {
            const std::size_t n = l.spec.out_channels;
            slots.push_back({pos, n, n - kept_filters(n, r), iota(n - kept_filters(n, r))});
        }
        ++pos;
    }
    auto write_masks = [&] {
        for (const auto& s : slots) {
            auto& keep = plan.layers[s.plan_pos].keep;
            std::fill(keep.begin(), keep.end(), std::uint8_t{1});
            for (auto j : s.combo) keep[j] = 0;
        }
    };
    // Advances one combination in lexicographic order; false when exhausted.
    auto next_combo = [](Slot& s) {
        if (s.drop == 0) return false;
        std::size_t i = s.drop;
        while (i-- > 0) {
            if (s.combo[i] < s.n - s.drop + i) {
                ++s.combo[i];
                for (std::size_t k = i + 1; k < s.drop; ++k) s.combo[k] = s.combo[k - 1] + 1;
                return true;
            }
        }
        return false;
    };

    ExhaustiveResult best;
    bool have = false;
    while (true) {
        write_masks();
        const double loss = masked_loss(net, plan, inputs, targets);
        ++best.evaluated;
        if (!have || loss < best.loss) {
            best.loss = loss;
            best.plan = plan;
            have = true;
        }
        std::size_t k = slots.size();
        bool advanced = false;
        while (k-- > 0) {
            if (next_combo(slots[k])) {
                advanced = true;
                break;
            }
            slots[k].combo = iota(slots[k].drop);
        }
        if (!advanced) break;
    }
    return best;
}

}  // namespace einv
