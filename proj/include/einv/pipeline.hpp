// SPDX-License-Identifier: Apache-2.0
//
// Iterative prune -> finetune compression with a validation-loss gate and an
// optional retrain-from-scratch fallback.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "einv/dataio.hpp"
#include "einv/metrics.hpp"
#include "einv/optim.hpp"
#include "einv/pruner.hpp"

namespace einv {

struct TrainConfig {
    AdamSettings adam;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;  // shuffling order

    nlohmann::json to_json() const;
};

struct DataSplits {
    Dataset train;
    Dataset val;
    std::optional<Dataset> test;
};

struct PipelineConfig {
    double ratio = 0.5;                  // target pruning ratio R in [0, 1)
    std::size_t iterations = 1;          // N >= 1
    std::optional<double> threshold;     // T; defaults to 1.1 x baseline validation loss
    std::size_t total_epochs = 120;      // split across iterations, remainder to the last
    TrainConfig train;
    std::uint64_t retrain_seed = 0x5EED0003;  // stage-3 re-initialisation seed

    void validate() const;
    nlohmann::json to_json() const;
};

enum class Branch { finetuned, retrained };
std::string to_string(Branch b);

struct EvalResult {
    double loss = 0.0;  // validation MAE
    MetricTriple metrics;
    Branch provenance = Branch::finetuned;
};

/// Per-epoch mean training loss.
using TrainingCurve = std::vector<double>;

struct IterationRecord {
    std::size_t iteration = 0;
    double ratio = 0.0;
    std::size_t epochs = 0;
    std::vector<std::size_t> widths;  // out_channels of each producing layer after pruning
    PruningPlan plan;
    TrainingCurve curve;
    std::uint64_t params = 0;
};

struct CompressReport {
    PipelineConfig config;
    double baseline_val_loss = 0.0;
    double threshold = 0.0;
    std::vector<IterationRecord> iterations;
    EvalResult finetuned;
    std::optional<EvalResult> retrained;
    TrainingCurve retrain_curve;
    Branch branch = Branch::finetuned;
    EvalResult final_result;

    nlohmann::json to_json() const;
};

struct CompressResult {
    NetworkGraph net;
    CompressReport report;
};

/// r = 1 - (1 - R)^(1/N).
double iter_ratio(double R, std::size_t N);

/// Epochs for iteration `k` (0-based): total / N, the remainder added to the last.
std::size_t epochs_for_iteration(std::size_t total, std::size_t N, std::size_t k);

/// Called after each epoch with the 1-based epoch and its mean training loss.
using EpochHook = std::function<void(std::size_t epoch, double train_loss)>;

/// Adam on MAE for `epochs` passes over `train` (reshuffled per epoch). Throws
/// NonFiniteError if a batch loss is not finite.
TrainingCurve finetune(NetworkGraph& net, const Dataset& train, std::size_t epochs, const TrainConfig& config,
                       const EpochHook& on_epoch = {});

/// Eval-mode MAE over the dataset (batched, element-weighted).
double evaluate_loss(const NetworkGraph& net, const Dataset& data, std::size_t batch_size = 32);
EvalResult evaluate(const NetworkGraph& net, const Dataset& data, std::size_t batch_size = 32);

/// Same topology, fresh weights from `seed`, trained for `epochs`.
NetworkGraph retrain_from_scratch(const NetworkGraph& topology, const Dataset& train, std::size_t epochs,
                                  const TrainConfig& config, std::uint64_t seed, TrainingCurve* curve = nullptr);

CompressResult compress(const NetworkGraph& net, const DataSplits& data, const PipelineConfig& config);

struct LayerRatio {
    std::size_t layer = 0;
    std::size_t before = 0;
    std::size_t after = 0;
    double achieved = 0.0;  // 1 - after / before
    double target = 0.0;
};

/// Achieved per-layer filter reduction between two nets of the same lineage.
std::vector<LayerRatio> cumulative_ratio_check(const NetworkGraph& before, const NetworkGraph& after, double R);

/// Width after N rounds of kept_filters at iter_ratio(R, N), starting from n.
std::vector<std::size_t> width_schedule(std::size_t n, double R, std::size_t N);

}  // namespace einv
