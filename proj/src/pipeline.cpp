// SPDX-License-Identifier: Apache-2.0

#include "einv/pipeline.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "einv/costs.hpp"

namespace einv {

using nlohmann::json;

std::string to_string(Branch b) { return b == Branch::finetuned ? "finetuned" : "retrained"; }

json TrainConfig::to_json() const {
    return json{{"lr", adam.lr},       {"beta1", adam.beta1}, {"beta2", adam.beta2},
                {"eps", adam.eps},     {"batch_size", batch_size}, {"seed", seed}};
}

void PipelineConfig::validate() const {
    if (!(ratio >= 0.0 && ratio < 1.0)) throw std::invalid_argument("ratio R must lie in [0, 1)");
    if (iterations < 1) throw std::invalid_argument("iterations N must be >= 1");
    if (train.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (threshold && std::isnan(*threshold)) throw std::invalid_argument("threshold T must not be NaN");
}

json PipelineConfig::to_json() const {
    json j{{"ratio", ratio},
           {"iterations", iterations},
           {"total_epochs", total_epochs},
           {"train", train.to_json()},
           {"retrain_seed", retrain_seed}};
    if (threshold) {
        if (std::isinf(*threshold)) j["threshold"] = *threshold > 0 ? "inf" : "-inf";
        else j["threshold"] = *threshold;
    } else {
        j["threshold"] = nullptr;
    }
    return j;
}

namespace {

json eval_json(const EvalResult& e) {
    return json{{"loss", e.loss}, {"metrics", e.metrics.to_json()}, {"provenance", to_string(e.provenance)}};
}

double json_safe(double v) { return std::isfinite(v) ? v : (v > 0 ? std::numeric_limits<double>::max() : -std::numeric_limits<double>::max()); }

std::vector<std::size_t> producing_widths(const NetworkGraph& net) {
    std::vector<std::size_t> w;
    for (const auto& l : net.layers()) {
        if (l.spec.producing()) w.push_back(l.spec.out_channels);
    }
    return w;
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    return order;
}

}  // namespace

json CompressReport::to_json() const {
    json iters = json::array();
    for (const auto& it : iterations) {
        iters.push_back(json{{"iteration", it.iteration},
                             {"ratio", it.ratio},
                             {"epochs", it.epochs},
                             {"widths", it.widths},
                             {"params", it.params},
                             {"train_loss", it.curve}});
    }
    json j{{"config", config.to_json()},
           {"baseline_val_loss", baseline_val_loss},
           {"threshold", json_safe(threshold)},
           {"iterations", iters},
           {"finetuned", eval_json(finetuned)},
           {"branch", to_string(branch)},
           {"final", eval_json(final_result)}};
    if (retrained) {
        j["retrained"] = eval_json(*retrained);
        j["retrain_train_loss"] = retrain_curve;
    } else {
        j["retrained"] = nullptr;
    }
    return j;
}

double iter_ratio(double R, std::size_t N) {
    if (!(R >= 0.0 && R < 1.0)) throw std::invalid_argument("target ratio R must lie in [0, 1), got " + std::to_string(R));
    if (N < 1) throw std::invalid_argument("iteration count N must be >= 1");
    if (N == 1) return R;
    return 1.0 - std::pow(1.0 - R, 1.0 / static_cast<double>(N));
}

std::size_t epochs_for_iteration(std::size_t total, std::size_t N, std::size_t k) {
    const std::size_t base = total / N;
    return k + 1 == N ? base + total % N : base;
}

TrainingCurve finetune(NetworkGraph& net, const Dataset& train, std::size_t epochs, const TrainConfig& config,
                       const EpochHook& on_epoch) {
    if (train.size() == 0) throw std::invalid_argument("finetune: empty training set");
    TrainingCurve curve;
    AdamStateT<float> state;
    state.settings = config.adam;
    std::mt19937_64 rng(config.seed);
    const std::size_t n = train.size(), bs = std::min(config.batch_size, n);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        const auto order = shuffled(n, rng);
        double weighted = 0.0;
        for (std::size_t start = 0; start < n; start += bs) {
            const std::size_t end = std::min(n, start + bs);
            const std::span<const std::size_t> rows(order.data() + start, end - start);
            const Tensor x = gather_batch(train.inputs, rows);
            const Tensor y = gather_batch(train.targets, rows);
            const auto fwd = forward(net, x, Mode::train);
            const auto loss = mae_loss(fwd.output, y);
            if (!std::isfinite(loss.loss)) {
                throw NonFiniteError("non-finite training loss at epoch " + std::to_string(epoch + 1) + ", batch starting " +
                                     std::to_string(start));
            }
            const auto grads = backward(net, fwd, loss.grad);
            auto params = net.parameters();
            const auto flat = grads.flat();
            adam_step<float>(params, flat, state);
            net.touch();
            weighted += loss.loss * static_cast<double>(end - start);
        }
        curve.push_back(weighted / static_cast<double>(n));
        if (on_epoch) on_epoch(epoch + 1, curve.back());
    }
    return curve;
}

double evaluate_loss(const NetworkGraph& net, const Dataset& data, std::size_t batch_size) {
    if (data.size() == 0) throw std::invalid_argument("evaluate_loss: empty dataset");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const std::size_t end = std::min(data.size(), start + batch_size);
        const Tensor pred = predict(net, slice_batch(data.inputs, start, end));
        const Tensor truth = slice_batch(data.targets, start, end);
        require_same_shape(pred.shape(), truth.shape(), "evaluate_loss");
        for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(static_cast<double>(pred[i]) - truth[i]);
        count += pred.size();
    }
    return sum / static_cast<double>(count);
}

EvalResult evaluate(const NetworkGraph& net, const Dataset& data, std::size_t batch_size) {
    if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
    Tensor pred(data.targets.shape());
    const std::size_t item = data.targets.size() / data.size();
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const std::size_t end = std::min(data.size(), start + batch_size);
        const Tensor p = predict(net, slice_batch(data.inputs, start, end));
        require_same_shape(p.shape(), slice_batch(data.targets, start, end).shape(), "evaluate");
        std::copy(p.data(), p.data() + p.size(), pred.data() + start * item);
    }
    EvalResult r;
    r.metrics = metrics(pred, data.targets);
    r.loss = r.metrics.mae;
    return r;
}

NetworkGraph retrain_from_scratch(const NetworkGraph& topology, const Dataset& train, std::size_t epochs,
                                  const TrainConfig& config, std::uint64_t seed, TrainingCurve* curve) {
    NetworkGraph net = topology;
    init_weights(net, seed);
    auto c = finetune(net, train, epochs, config);
    if (curve) *curve = std::move(c);
    return net;
}

CompressResult compress(const NetworkGraph& net, const DataSplits& data, const PipelineConfig& config) {
    config.validate();
    if (data.train.size() == 0 || data.val.size() == 0) throw std::invalid_argument("compress: empty data split");
    CompressReport report;
    report.config = config;
    report.baseline_val_loss = evaluate_loss(net, data.val);
    report.threshold = config.threshold.value_or(1.1 * report.baseline_val_loss);

    const double r = iter_ratio(config.ratio, config.iterations);
    NetworkGraph current = net;
    for (std::size_t k = 0; k < config.iterations; ++k) {
        IterationRecord rec;
        rec.iteration = k + 1;
        rec.ratio = r;
        rec.plan = select_filters(l1_scores(current), r);
        current = apply_plan(current, rec.plan);
        rec.widths = producing_widths(current);
        rec.params = param_count(current).total_params;
        // Nothing removed means nothing to recover; R = 0 stays an exact no-op.
        rec.epochs = rec.plan.prunes_anything() ? epochs_for_iteration(config.total_epochs, config.iterations, k) : 0;
        TrainConfig tc = config.train;
        tc.seed = config.train.seed + k;
        rec.curve = finetune(current, data.train, rec.epochs, tc);
        report.iterations.push_back(std::move(rec));
    }
    report.finetuned = evaluate(current, data.val);
    report.finetuned.provenance = Branch::finetuned;
    report.branch = Branch::finetuned;
    report.final_result = report.finetuned;

    if (!(report.finetuned.loss <= report.threshold)) {
        NetworkGraph retrained = retrain_from_scratch(current, data.train, config.total_epochs, config.train,
                                                      config.retrain_seed, &report.retrain_curve);
        EvalResult re = evaluate(retrained, data.val);
        re.provenance = Branch::retrained;
        report.retrained = re;
        if (re.loss < report.finetuned.loss) {
            report.branch = Branch::retrained;
            report.final_result = re;
            current = std::move(retrained);
        }
    }
    return CompressResult{std::move(current), std::move(report)};
}

std::vector<LayerRatio> cumulative_ratio_check(const NetworkGraph& before, const NetworkGraph& after, double R) {
    if (before.layers().size() != after.layers().size()) {
        throw std::invalid_argument("cumulative_ratio_check: networks do not share a lineage (layer counts differ)");
    }
    std::vector<LayerRatio> out;
    for (std::size_t i = 0; i < before.layers().size(); ++i) {
        const auto& a = before.layers()[i].spec;
        const auto& b = after.layers()[i].spec;
        if (a.kind != b.kind) throw std::invalid_argument("cumulative_ratio_check: layer kinds differ at " + std::to_string(i + 1));
        if (!a.producing() || !a.prunable) continue;
        out.push_back({a.index, a.out_channels, b.out_channels,
                       1.0 - static_cast<double>(b.out_channels) / static_cast<double>(a.out_channels), R});
    }
    return out;
}

std::vector<std::size_t> width_schedule(std::size_t n, double R, std::size_t N) {
    const double r = iter_ratio(R, N);
    std::vector<std::size_t> widths;
    for (std::size_t k = 0; k < N; ++k) {
        n = kept_filters(n, r);
        widths.push_back(n);
    }
    return widths;
}

}  // namespace einv
