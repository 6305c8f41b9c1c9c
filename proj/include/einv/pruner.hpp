// SPDX-License-Identifier: Apache-2.0
//
// Structured filter pruning: L1 filter scores, uniform-ratio selection,
// structural application of a plan, and an exhaustive reference solver.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "einv/netgraph.hpp"

namespace einv {

/// A plan or score set does not line up with the network's current widths.
class CongruenceError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The exhaustive solver refused a search space larger than its guard.
class CombinatorialLimitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LayerScores {
    std::size_t layer = 0;  // 1-based layer index
    bool prunable = false;
    std::vector<double> scores;
};

/// One entry per producing layer, in chain order.
struct FilterScores {
    std::vector<LayerScores> layers;
};

struct LayerMask {
    std::size_t layer = 0;
    std::vector<std::uint8_t> keep;  // 1 = keep filter j

    std::size_t kept() const;
};

/// One entry per producing layer, in chain order. Non-prunable layers carry
/// all-ones masks.
struct PruningPlan {
    std::vector<LayerMask> layers;

    bool prunes_anything() const;
    nlohmann::json to_json() const;
    static PruningPlan from_json(const nlohmann::json& j);
};

/// Filters kept out of `n` at ratio r: max(1, round_half_up(n * (1 - r))).
/// A 1e-9 guard absorbs representation error in (1 - r) so that exact halves
/// round up.
std::size_t kept_filters(std::size_t n, double r);

/// Sum of |w| over each filter's weight slab (bias and batchnorm excluded).
/// For transposed convolutions filter j is weights[:, j].
FilterScores l1_scores(const NetworkGraph& net);

/// Per prunable layer, masks out the n - kept lowest-scoring filters; ties
/// prune the lower index first.
PruningPlan select_filters(const FilterScores& scores, double r);

/// All-ones plan for `net`.
PruningPlan identity_plan(const NetworkGraph& net);

/// Removes masked filters (weights, bias, batchnorm entries including running
/// statistics) and the matching input slices of the next producing layer.
NetworkGraph apply_plan(const NetworkGraph& net, const PruningPlan& plan);

/// Eval-mode MAE of `net` with the plan's masked channels zeroed in place of
/// structural removal.
double masked_loss(const NetworkGraph& net, const PruningPlan& plan, const Tensor& inputs, const Tensor& targets);

struct ExhaustiveResult {
    PruningPlan plan;
    double loss = 0.0;
    std::uint64_t evaluated = 0;
};

inline constexpr double kExhaustiveGuard = 1e6;

/// Number of plans exhaustive_plan would evaluate at ratio r.
double plan_space_size(const NetworkGraph& net, double r);

/// Exact minimiser of the batch MAE over every mask combination that satisfies
/// the per-layer cardinality rule. The first minimum in enumeration order wins.
ExhaustiveResult exhaustive_plan(const NetworkGraph& net, double r, const Tensor& inputs, const Tensor& targets);

}  // namespace einv
