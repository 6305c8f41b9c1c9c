// SPDX-License-Identifier: Apache-2.0
//
// Velocity-map quality metrics and the inference latency harness.

#pragma once

#include <cstdint>

#include <json.hpp>

#include "einv/netgraph.hpp"

namespace einv {

struct MetricTriple {
    double mae = 0.0;
    double rmse = 0.0;
    double ssim = 1.0;

    nlohmann::json to_json() const;
};

struct SsimOptions {
    std::size_t window = 11;
    double sigma = 1.5;
    double data_range = 2.0;  // maps normalised to [-1, 1]
    double k1 = 0.01;
    double k2 = 0.03;
};

/// MAE and RMSE over all elements; SSIM averaged over every fully-contained
/// Gaussian window of every map. The last two axes are the map, leading axes
/// index the batch. Maps smaller than the window shrink it to the largest
/// odd size that fits.
MetricTriple metrics(const Tensor& pred, const Tensor& truth, const SsimOptions& opts = {});

/// Mean SSIM over the valid windows of one h x w map.
double ssim_map_mean(const float* a, const float* b, std::size_t h, std::size_t w, const SsimOptions& opts = {});

/// 1 - ssim, so that all three reported metrics are lower-is-better.
inline double one_minus_ssim(const MetricTriple& m) { return 1.0 - m.ssim; }
inline double one_minus_ssim(double ssim) { return 1.0 - ssim; }

struct LatencyStats {
    std::size_t runs = 0;
    std::size_t warmup = 0;
    std::size_t threads = 1;
    double mean_ms = 0.0;
    double std_ms = 0.0;  // sample (n - 1) standard deviation; 0 for one run
    double min_ms = 0.0;
    double max_ms = 0.0;

    nlohmann::json to_json() const;
    std::string summary() const;
};

/// Times `runs` eval-mode forwards of a fixed seeded random batch of one after
/// `warmup` untimed ones. The kernel thread count is set for the duration and
/// restored afterwards.
LatencyStats bench_latency(const NetworkGraph& net, const Shape& input_shape, std::size_t runs = 50,
                           std::size_t warmup = 5, std::size_t threads = 1, std::uint64_t seed = 0);

}  // namespace einv
