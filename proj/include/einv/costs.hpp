// SPDX-License-Identifier: Apache-2.0
//
// Structure-only cost accounting. FLOPs convention: one multiply-accumulate
// counts as 2 FLOPs; bias adds, eval-mode batchnorm (2 per element) and
// activations (1 per element) are included; center crops are free.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "einv/netgraph.hpp"

namespace einv {

inline constexpr const char* kFlopsConvention =
    "1 MAC = 2 FLOPs; bias = 1/output; batchnorm(eval) = 2/element; activation = 1/element; crop = 0";

struct LayerCost {
    std::size_t layer = 0;
    LayerKind kind = LayerKind::conv;
    std::uint64_t params = 0;   // trainable: weights + bias + gamma + beta
    std::uint64_t buffers = 0;  // batchnorm running statistics
    std::uint64_t flops = 0;
    std::optional<double> params_reduction_pct;
    std::optional<double> flops_reduction_pct;
};

struct CostReport {
    std::vector<LayerCost> rows;
    std::uint64_t total_params = 0;
    std::uint64_t total_buffers = 0;
    std::uint64_t total_flops = 0;
    bool has_flops = false;
    std::optional<double> params_reduction_pct;
    std::optional<double> flops_reduction_pct;

    nlohmann::json to_json() const;
    std::string to_table() const;
    std::string to_csv() const;
};

/// Trainable parameter count per layer (running statistics reported as buffers).
CostReport param_count(const NetworkGraph& net);

/// Parameter and FLOP counts for one inference on a single (c, h, w) sample.
CostReport flops_count(const NetworkGraph& net, const Shape& input_shape);
inline CostReport flops_count(const NetworkGraph& net) { return flops_count(net, net.input_shape()); }

/// Percentage reductions of `pruned` relative to `base`, per layer and total.
/// Throws std::invalid_argument if the layer lists do not share a lineage.
CostReport reduction_report(const CostReport& base, const CostReport& pruned);

double reduction_pct(std::uint64_t base, std::uint64_t pruned);

}  // namespace einv
