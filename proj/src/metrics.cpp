// SPDX-License-Identifier: Apache-2.0

#include "einv/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

namespace einv {

using nlohmann::json;

json MetricTriple::to_json() const {
    return json{{"mae", mae}, {"rmse", rmse}, {"ssim", ssim}, {"one_minus_ssim", one_minus_ssim(*this)}};
}

namespace {

std::vector<double> gaussian_weights(std::size_t window, double sigma) {
    std::vector<double> g(window);
    const double centre = (static_cast<double>(window) - 1.0) / 2.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < window; ++i) {
        const double d = static_cast<double>(i) - centre;
        g[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
        sum += g[i];
    }
    for (auto& v : g) v /= sum;
    return g;
}

std::size_t fit_window(std::size_t window, std::size_t h, std::size_t w) {
    std::size_t limit = std::min({window, h, w});
    if (limit % 2 == 0) --limit;
    return std::max<std::size_t>(limit, 1);
}

// Valid-mode separable filtering of `src` (h x w) into (h-k+1) x (w-k+1).
std::vector<double> filter_valid(const std::vector<double>& src, std::size_t h, std::size_t w,
                                 const std::vector<double>& g) {
    const std::size_t k = g.size(), oh = h - k + 1, ow = w - k + 1;
    std::vector<double> tmp(h * ow, 0.0);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double s = 0.0;
            for (std::size_t i = 0; i < k; ++i) s += g[i] * src[y * w + x + i];
            tmp[y * ow + x] = s;
        }
    }
    std::vector<double> out(oh * ow, 0.0);
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double s = 0.0;
            for (std::size_t i = 0; i < k; ++i) s += g[i] * tmp[(y + i) * ow + x];
            out[y * ow + x] = s;
        }
    }
    return out;
}

}  // namespace

double ssim_map_mean(const float* a, const float* b, std::size_t h, std::size_t w, const SsimOptions& opts) {
    const std::size_t window = fit_window(opts.window, h, w);
    const auto g = gaussian_weights(window, opts.sigma);
    const double c1 = (opts.k1 * opts.data_range) * (opts.k1 * opts.data_range);
    const double c2 = (opts.k2 * opts.data_range) * (opts.k2 * opts.data_range);
    const std::size_t n = h * w;
    std::vector<double> va(n), vb(n), aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
        va[i] = a[i];
        vb[i] = b[i];
        aa[i] = va[i] * va[i];
        bb[i] = vb[i] * vb[i];
        ab[i] = va[i] * vb[i];
    }
    const auto mu_a = filter_valid(va, h, w, g);
    const auto mu_b = filter_valid(vb, h, w, g);
    const auto e_aa = filter_valid(aa, h, w, g);
    const auto e_bb = filter_valid(bb, h, w, g);
    const auto e_ab = filter_valid(ab, h, w, g);
    double total = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double ma = mu_a[i], mb = mu_b[i];
        const double var_a = e_aa[i] - ma * ma, var_b = e_bb[i] - mb * mb, cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
    }
    return total / static_cast<double>(mu_a.size());
}

MetricTriple metrics(const Tensor& pred, const Tensor& truth, const SsimOptions& opts) {
    require_same_shape(pred.shape(), truth.shape(), "metrics");
    if (pred.rank() < 2) throw ShapeError("metrics expects at least a 2-D map, got " + shape_str(pred.shape()));
    MetricTriple m;
    double abs_sum = 0.0, sq_sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = static_cast<double>(pred[i]) - static_cast<double>(truth[i]);
        abs_sum += std::abs(d);
        sq_sum += d * d;
    }
    const double count = static_cast<double>(pred.size());
    m.mae = abs_sum / count;
    m.rmse = std::sqrt(sq_sum / count);
    const std::size_t h = pred.dim(pred.rank() - 2), w = pred.dim(pred.rank() - 1);
    const std::size_t maps = pred.size() / (h * w);
    double ssim_sum = 0.0;
    for (std::size_t k = 0; k < maps; ++k) {
        ssim_sum += ssim_map_mean(pred.data() + k * h * w, truth.data() + k * h * w, h, w, opts);
    }
    m.ssim = ssim_sum / static_cast<double>(maps);
    return m;
}

json LatencyStats::to_json() const {
    return json{{"runs", runs},       {"warmup", warmup}, {"threads", threads}, {"mean_ms", mean_ms},
                {"std_ms", std_ms},   {"min_ms", min_ms}, {"max_ms", max_ms}};
}

std::string LatencyStats::summary() const {
    char buf[200];
    std::snprintf(buf, sizeof buf, "latency %.3f ms +- %.3f ms (min %.3f, max %.3f) over %zu runs, %zu warmup, %zu thread(s)",
                  mean_ms, std_ms, min_ms, max_ms, runs, warmup, threads);
    return buf;
}

LatencyStats bench_latency(const NetworkGraph& net, const Shape& input_shape, std::size_t runs, std::size_t warmup,
                           std::size_t threads, std::uint64_t seed) {
    if (runs < 1) throw std::invalid_argument("bench_latency needs runs >= 1");
    if (input_shape.size() != 3) throw ShapeError("bench_latency expects a (c, h, w) input shape");
    Tensor input({1, input_shape[0], input_shape[1], input_shape[2]});
    std::mt19937_64 rng(seed);
    for (auto& v : input.values()) v = static_cast<float>(static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0);

    const std::size_t saved_threads = num_threads();
    set_num_threads(threads);
    for (std::size_t i = 0; i < warmup; ++i) (void)predict(net, input);
    std::vector<double> times;
    times.reserve(runs);
    for (std::size_t i = 0; i < runs; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const Tensor out = predict(net, input);
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        (void)out;
    }
    set_num_threads(saved_threads);

    LatencyStats s;
    s.runs = runs;
    s.warmup = warmup;
    s.threads = std::max<std::size_t>(1, threads);
    double sum = 0.0;
    for (double t : times) sum += t;
    s.mean_ms = sum / static_cast<double>(runs);
    double sq = 0.0;
    for (double t : times) sq += (t - s.mean_ms) * (t - s.mean_ms);
    s.std_ms = runs > 1 ? std::sqrt(sq / static_cast<double>(runs - 1)) : 0.0;
    s.min_ms = *std::min_element(times.begin(), times.end());
    s.max_ms = *std::max_element(times.begin(), times.end());
    // Guard the ordering against rounding in the mean of equal samples.
    s.mean_ms = std::clamp(s.mean_ms, s.min_ms, s.max_ms);
    return s;
}

}  // namespace einv
