// SPDX-License-Identifier: Apache-2.0

#include "einv/cli.hpp"

#include <sys/utsname.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "einv/costs.hpp"
#include "einv/dataio.hpp"
#include "einv/metrics.hpp"
#include "einv/pipeline.hpp"

namespace einv::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json host_info() {
    char name[256] = {};
    gethostname(name, sizeof name - 1);
    utsname u{};
    uname(&u);
    return json{{"hostname", name},
                {"os", std::string(u.sysname) + " " + u.release},
                {"machine", u.machine},
                {"hardware_threads", std::thread::hardware_concurrency()},
                {"compiler", __VERSION__}};
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f << text;
    if (!f) throw std::runtime_error("failed writing " + path.string());
}

json read_json_file(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("invalid JSON in " + path.string() + ": " + e.what());
    }
}

struct Manifest {
    std::string command;
    fs::path path;  // empty: not written
    json config = json::object();
    json inputs = json::object();
    json outputs = json::object();
    std::optional<std::uint64_t> seed;
    std::string started = utc_now();

    void write(const std::string& status, const std::string& error) const {
        if (path.empty()) return;
        json j{{"command", command},
               {"status", status},
               {"error", error.empty() ? json(nullptr) : json(error)},
               {"config", config},
               {"inputs", inputs},
               {"outputs", outputs},
               {"seed", seed ? json(*seed) : json(nullptr)},
               {"version", kVersion},
               {"host", host_info()},
               {"started_at", started},
               {"finished_at", utc_now()}};
        write_text(path, j.dump(2) + "\n");
    }
};

std::string fmt_double(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

std::string fmt_fixed(double v, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

double parse_threshold(const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || std::isnan(v)) throw UsageError("--threshold must be a number, inf or -inf, got '" + text + "'");
    return v;
}

Dataset load_split(const fs::path& dir, const std::string& split) {
    const fs::path base = dir / split;
    if (!fs::exists(base / "inputs.npy") || !fs::exists(base / "maps.npy")) {
        throw std::runtime_error("data directory " + dir.string() + " has no '" + split + "' split (expected " +
                                 (base / "inputs.npy").string() + " and maps.npy)");
    }
    Dataset d{read_npy(base / "inputs.npy"), read_npy(base / "maps.npy")};
    if (d.inputs.rank() != 4 || d.targets.rank() != 4) {
        throw ShapeError(split + ": inputs and maps must be rank 4, got " + shape_str(d.inputs.shape()) + " and " +
                         shape_str(d.targets.shape()));
    }
    if (d.inputs.dim(0) != d.targets.dim(0)) {
        throw ShapeError(split + ": " + std::to_string(d.inputs.dim(0)) + " inputs but " +
                         std::to_string(d.targets.dim(0)) + " maps");
    }
    return d;
}

void check_compatible(const NetworkGraph& net, const Dataset& d, const std::string& split) {
    const Shape in(d.inputs.shape().begin() + 1, d.inputs.shape().end());
    const Shape out(d.targets.shape().begin() + 1, d.targets.shape().end());
    if (in != net.input_shape()) {
        throw ShapeError(split + " inputs have per-sample shape " + shape_str(in) + " but the network expects " +
                         shape_str(net.input_shape()));
    }
    if (out != net.output_shape()) {
        throw ShapeError(split + " maps have per-sample shape " + shape_str(out) + " but the network produces " +
                         shape_str(net.output_shape()));
    }
}

DataSplits load_splits(const fs::path& dir, const NetworkGraph& net, bool need_test) {
    DataSplits s{load_split(dir, "train"), load_split(dir, "val"), std::nullopt};
    if (need_test || fs::exists(dir / "test" / "inputs.npy")) s.test = load_split(dir, "test");
    check_compatible(net, s.train, "train");
    check_compatible(net, s.val, "val");
    if (s.test) check_compatible(net, *s.test, "test");
    return s;
}

NetworkGraph arch_from_json(const json& j) {
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (name == "tiny") return build_tiny_testnet();
        if (name == "inversionnet") return build_inversionnet_default();
        throw std::invalid_argument("unknown architecture preset '" + name + "' (expected tiny or inversionnet)");
    }
    if (j.contains("preset")) return arch_from_json(j.at("preset"));
    return NetworkGraph::from_config(j);
}

json metrics_json(const MetricTriple& m) {
    json j = m.to_json();
    j["one_minus_ssim"] = one_minus_ssim(m.ssim);
    return j;
}

// Option values shared by train, compress and sweep.
struct TrainFlags {
    std::size_t epochs = 120;
    double lr = 1e-3;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

void add_train_flags(CLI::App& app, TrainFlags& f) {
    app.add_option("--epochs", f.epochs, "Training epochs (total budget for compress)");
    app.add_option("--lr", f.lr, "Adam learning rate");
    app.add_option("--batch-size", f.batch_size, "Minibatch size");
    app.add_option("--seed", f.seed, "Shuffle seed");
    app.add_option("--threads", f.threads, "Worker threads for the GEMM kernels");
}

bool given(const CLI::App& app, const char* flag) {
    const CLI::Option* opt = app.get_option_no_throw(flag);
    return opt != nullptr && opt->count() > 0;
}

// Values from the JSON config file are taken unless the flag was given.
template <typename V>
void merge(const CLI::App& app, const char* flag, const json& file, const char* key, V& value) {
    if (!given(app, flag) && file.contains(key)) value = file.at(key).get<V>();
}

void merge_train_flags(const CLI::App& app, const json& file, TrainFlags& f) {
    merge(app, "--epochs", file, "epochs", f.epochs);
    merge(app, "--lr", file, "lr", f.lr);
    merge(app, "--batch-size", file, "batch_size", f.batch_size);
    merge(app, "--seed", file, "seed", f.seed);
    merge(app, "--threads", file, "threads", f.threads);
    if (f.batch_size < 1) throw UsageError("--batch-size must be >= 1");
    if (!(f.lr >= 0.0) || !std::isfinite(f.lr)) throw UsageError("--lr must be a finite value >= 0");
}

json train_flags_json(const TrainFlags& f) {
    return json{{"epochs", f.epochs}, {"lr", f.lr}, {"batch_size", f.batch_size}, {"seed", f.seed}, {"threads", f.threads}};
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
    std::string config, out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> count;
};

void cmd_synth(const SynthOptions& o, Manifest& m, std::ostream& out) {
    json cfg = o.config.empty() ? json::object() : read_json_file(o.config);
    SyntheticTask task = SyntheticTask::from_json(cfg.value("task", json::object()));
    if (o.seed) task.seed = *o.seed;
    task.validate();
    std::size_t count = o.count ? *o.count : cfg.value("count", std::size_t{600});
    json fr = cfg.value("splits", json{{"train", 0.8}, {"val", 0.1}, {"test", 0.1}});
    const double ftr = fr.value("train", 0.0), fva = fr.value("val", 0.0), fte = fr.value("test", 0.0);
    if (ftr < 0 || fva < 0 || fte < 0 || std::abs(ftr + fva + fte - 1.0) > 1e-9) {
        throw std::invalid_argument("split fractions must be non-negative and sum to 1, got train=" + fmt_double(ftr) +
                                    " val=" + fmt_double(fva) + " test=" + fmt_double(fte));
    }
    const auto ntr = static_cast<std::size_t>(std::floor(ftr * static_cast<double>(count)));
    const auto nva = static_cast<std::size_t>(std::floor(fva * static_cast<double>(count)));
    const std::size_t nte = count - ntr - nva;
    m.seed = task.seed;
    m.config = json{{"task", task.to_json()}, {"count", count}, {"splits", {{"train", ftr}, {"val", fva}, {"test", fte}}}};
    if (!o.config.empty()) m.inputs["config"] = o.config;

    const std::pair<const char*, std::size_t> splits[] = {{"train", ntr}, {"val", nva}, {"test", nte}};
    std::size_t first = 0;
    json counts = json::object();
    for (const auto& [name, n] : splits) {
        if (n == 0) throw std::invalid_argument(std::string("split '") + name + "' would be empty with count " + std::to_string(count));
        const Dataset d = gen_synthetic(task, n, first);
        const fs::path dir = fs::path(o.out) / name;
        fs::create_directories(dir);
        write_npy(d.inputs, dir / "inputs.npy");
        write_npy(d.targets, dir / "maps.npy");
        m.outputs[name] = {{"inputs", (dir / "inputs.npy").string()}, {"maps", (dir / "maps.npy").string()}, {"count", n}};
        counts[name] = n;
        first += n;
    }
    out << json{{"command", "synth"}, {"out", o.out}, {"counts", counts}}.dump() << "\n";
}

// ---------------------------------------------------------------- train

struct TrainOptions {
    std::string arch, data, out, config;
    TrainFlags flags;
    std::uint64_t init_seed = 1;
};

void cmd_train(const CLI::App& app, TrainOptions& o, Manifest& m, std::ostream& out) {
    const json file = o.config.empty() ? json::object() : read_json_file(o.config);
    merge_train_flags(app, file, o.flags);
    merge(app, "--init-seed", file, "init_seed", o.init_seed);
    m.config = train_flags_json(o.flags);
    m.config["init_seed"] = o.init_seed;
    m.seed = o.init_seed;
    m.inputs = json{{"arch", o.arch}, {"data", o.data}};
    if (!o.config.empty()) m.inputs["config"] = o.config;

    NetworkGraph net = arch_from_json(read_json_file(o.arch));
    m.config["architecture"] = net.to_config();
    // Incompatible data must fail before any training work.
    const DataSplits data = load_splits(o.data, net, false);
    set_num_threads(o.flags.threads);
    init_weights(net, o.init_seed);

    TrainConfig tc;
    tc.adam.lr = o.flags.lr;
    tc.batch_size = o.flags.batch_size;
    tc.seed = o.flags.seed;
    std::ostringstream csv;
    csv << "epoch,train_loss,val_loss\n";
    csv << std::setprecision(9);
    finetune(net, data.train, o.flags.epochs, tc, [&](std::size_t epoch, double loss) {
        csv << epoch << "," << loss << "," << evaluate_loss(net, data.val) << "\n";
    });
    const EvalResult val = evaluate(net, data.val);

    const fs::path ckpt(o.out);
    const fs::path curve = fs::path(o.out + ".loss.csv");
    if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
    save_checkpoint(net, ckpt);
    write_text(curve, csv.str());
    m.outputs = json{{"checkpoint", ckpt.string()}, {"loss_curve", curve.string()}, {"val_loss", val.loss}};
    out << json{{"command", "train"}, {"checkpoint", ckpt.string()}, {"val_loss", val.loss}, {"metrics", metrics_json(val.metrics)}}
               .dump()
        << "\n";
}

// ---------------------------------------------------------------- compress

struct CompressOptions {
    std::string checkpoint, data, out, config, threshold;
    double ratio = 0.5;
    std::size_t iterations = 1;
    TrainFlags flags;
    std::uint64_t retrain_seed = 0x5EED0003;
};

PipelineConfig resolve_pipeline(const CLI::App& app, CompressOptions& o, Manifest& m) {
    const json file = o.config.empty() ? json::object() : read_json_file(o.config);
    merge_train_flags(app, file, o.flags);
    merge(app, "--ratio", file, "ratio", o.ratio);
    merge(app, "--iters", file, "iterations", o.iterations);
    merge(app, "--retrain-seed", file, "retrain_seed", o.retrain_seed);
    if (!given(app, "--threshold") && file.contains("threshold") && !file.at("threshold").is_null()) {
        const auto& t = file.at("threshold");
        o.threshold = t.is_string() ? t.get<std::string>() : fmt_double(t.get<double>());
    }
    if (!(o.ratio >= 0.0 && o.ratio < 1.0)) throw UsageError("--ratio must lie in [0, 1), got " + fmt_double(o.ratio));
    if (o.iterations < 1) throw UsageError("--iters must be >= 1");

    PipelineConfig pc;
    pc.ratio = o.ratio;
    pc.iterations = o.iterations;
    if (!o.threshold.empty()) pc.threshold = parse_threshold(o.threshold);
    pc.total_epochs = o.flags.epochs;
    pc.train.adam.lr = o.flags.lr;
    pc.train.batch_size = o.flags.batch_size;
    pc.train.seed = o.flags.seed;
    pc.retrain_seed = o.retrain_seed;
    m.config = pc.to_json();
    m.config["threads"] = o.flags.threads;
    m.seed = o.flags.seed;
    return pc;
}

json write_compress_outputs(const NetworkGraph& base, const CompressResult& r, const std::optional<Dataset>& test,
                            const fs::path& dir) {
    fs::create_directories(dir);
    json outputs{{"checkpoint", (dir / "pruned.einv").string()}, {"report", (dir / "report.json").string()}};
    save_checkpoint(r.net, dir / "pruned.einv");
    json plans = json::array();
    for (const auto& it : r.report.iterations) {
        const fs::path p = dir / ("plan_iter" + std::to_string(it.iteration) + ".json");
        write_text(p, it.plan.to_json().dump(2) + "\n");
        plans.push_back(p.string());
    }
    outputs["plans"] = plans;
    json report = r.report.to_json();
    report["costs"] = reduction_report(flops_count(base), flops_count(r.net)).to_json();
    if (test) report["test"] = metrics_json(evaluate(r.net, *test).metrics);
    write_text(dir / "report.json", report.dump(2) + "\n");
    return outputs;
}

void cmd_compress(const CLI::App& app, CompressOptions& o, Manifest& m, std::ostream& out) {
    const PipelineConfig pc = resolve_pipeline(app, o, m);
    m.inputs = json{{"checkpoint", o.checkpoint}, {"data", o.data}};
    if (!o.config.empty()) m.inputs["config"] = o.config;
    const NetworkGraph base = load_checkpoint(o.checkpoint);
    const DataSplits data = load_splits(o.data, base, false);
    set_num_threads(o.flags.threads);
    const CompressResult r = compress(base, data, pc);
    m.outputs = write_compress_outputs(base, r, data.test, o.out);
    out << json{{"command", "compress"},
                {"branch", to_string(r.report.branch)},
                {"baseline_val_loss", r.report.baseline_val_loss},
                {"val_loss", r.report.final_result.loss},
                {"params", param_count(r.net).total_params},
                {"out", o.out}}
               .dump()
        << "\n";
}

// ---------------------------------------------------------------- cost

struct CostOptions {
    std::string checkpoint, baseline, out;
};

void cmd_cost(const CostOptions& o, Manifest& m, std::ostream& out) {
    m.inputs = json{{"checkpoint", o.checkpoint}};
    const NetworkGraph net = load_checkpoint(o.checkpoint);
    CostReport report = flops_count(net);
    if (!o.baseline.empty()) {
        m.inputs["baseline"] = o.baseline;
        report = reduction_report(flops_count(load_checkpoint(o.baseline)), report);
    }
    const json j = report.to_json();
    out << report.to_table() << "\n" << j.dump(2) << "\n";
    if (!o.out.empty()) {
        write_text(fs::path(o.out) / "cost.json", j.dump(2) + "\n");
        m.outputs = json{{"report", (fs::path(o.out) / "cost.json").string()}};
    }
}

// ---------------------------------------------------------------- bench

struct BenchOptions {
    std::string checkpoint, baseline, out;
    std::size_t runs = 50, warmup = 5, threads = 1;
    std::uint64_t seed = 0;
};

void cmd_bench(const BenchOptions& o, Manifest& m, std::ostream& out) {
    if (o.runs < 1) throw UsageError("--runs must be >= 1");
    m.config = json{{"runs", o.runs}, {"warmup", o.warmup}, {"threads", o.threads}, {"seed", o.seed}};
    m.seed = o.seed;
    m.inputs = json{{"checkpoint", o.checkpoint}};
    const NetworkGraph net = load_checkpoint(o.checkpoint);
    const LatencyStats stats = bench_latency(net, net.input_shape(), o.runs, o.warmup, o.threads, o.seed);
    json j{{"latency", stats.to_json()}};
    out << stats.summary() << "\n";
    if (!o.baseline.empty()) {
        m.inputs["baseline"] = o.baseline;
        const NetworkGraph base = load_checkpoint(o.baseline);
        const LatencyStats b = bench_latency(base, base.input_shape(), o.runs, o.warmup, o.threads, o.seed);
        out << "baseline " << b.summary() << "\n";
        j["baseline"] = b.to_json();
        j["faster_than_baseline"] = stats.mean_ms < b.mean_ms;
        j["latency_saving_pct"] = 100.0 * (1.0 - stats.mean_ms / b.mean_ms);
    }
    out << j.dump(2) << "\n";
    if (!o.out.empty()) {
        write_text(fs::path(o.out) / "bench.json", j.dump(2) + "\n");
        m.outputs = json{{"report", (fs::path(o.out) / "bench.json").string()}};
    }
}

// ---------------------------------------------------------------- sweep

struct SweepOptions {
    CompressOptions base;
    std::vector<double> ratios{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::vector<std::size_t> iters{1, 3, 5};
    std::size_t runs = 50, warmup = 5;
    bool parallel = false;
    std::size_t jobs = 0;
};

struct SweepCell {
    double ratio = 0.0;
    std::size_t iterations = 1;
    std::string dir;
    std::string error;
    std::uint64_t params = 0, flops = 0;
    std::optional<double> latency_ms;
    MetricTriple metrics;
};

void cmd_sweep(const CLI::App& app, SweepOptions& o, Manifest& m, std::ostream& out) {
    // Validate the grid before doing any work.
    for (double r : o.ratios) {
        if (!(r >= 0.0 && r < 1.0)) throw UsageError("--ratios entries must lie in [0, 1), got " + fmt_double(r));
    }
    for (std::size_t n : o.iters) {
        if (n < 1) throw UsageError("--iters entries must be >= 1");
    }
    if (o.ratios.empty() || o.iters.empty()) throw UsageError("--ratios and --iters must be non-empty");
    PipelineConfig pc = resolve_pipeline(app, o.base, m);
    m.config.erase("ratio");
    m.config.erase("iterations");
    m.config["ratios"] = o.ratios;
    m.config["iters"] = o.iters;
    m.config["parallel"] = o.parallel;
    m.config["bench"] = o.parallel ? json(nullptr) : json{{"runs", o.runs}, {"warmup", o.warmup}, {"threads", 1}};
    m.inputs = json{{"checkpoint", o.base.checkpoint}, {"data", o.base.data}};

    const NetworkGraph base = load_checkpoint(o.base.checkpoint);
    const DataSplits data = load_splits(o.base.data, base, false);
    const Dataset& scored = data.test ? *data.test : data.val;
    m.config["metric_split"] = data.test ? "test" : "val";
    set_num_threads(o.base.flags.threads);

    std::vector<SweepCell> cells;
    for (double r : o.ratios) {
        for (std::size_t n : o.iters) {
            SweepCell c;
            c.ratio = r;
            c.iterations = n;
            c.dir = "R" + fmt_double(r) + "_N" + std::to_string(n);
            cells.push_back(c);
        }
    }
    auto run_cell = [&](SweepCell& c) {
        try {
            PipelineConfig cfg = pc;
            cfg.ratio = c.ratio;
            cfg.iterations = c.iterations;
            const CompressResult r = compress(base, data, cfg);
            write_compress_outputs(base, r, data.test, fs::path(o.base.out) / c.dir);
            const CostReport cost = flops_count(r.net);
            c.params = cost.total_params;
            c.flops = cost.total_flops;
            c.metrics = evaluate(r.net, scored).metrics;
            if (!o.parallel) c.latency_ms = bench_latency(r.net, r.net.input_shape(), o.runs, o.warmup, 1).mean_ms;
        } catch (const std::exception& e) {
            c.error = e.what();
        }
    };
    if (o.parallel) {
        std::atomic<std::size_t> next{0};
        const std::size_t jobs = std::max<std::size_t>(1, o.jobs ? o.jobs : std::thread::hardware_concurrency());
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::min(jobs, cells.size()); ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(cells[i]);
            });
        }
    } else {
        for (auto& c : cells) run_cell(c);
    }

    std::ostringstream csv;
    csv << "R,N,params,flops,latency_ms,MAE,RMSE,1-SSIM,report,status\n";
    json failed = json::array();
    for (const auto& c : cells) {
        csv << fmt_double(c.ratio) << "," << c.iterations << ",";
        if (c.error.empty()) {
            csv << c.params << "," << c.flops << "," << (c.latency_ms ? fmt_fixed(*c.latency_ms, 4) : "") << ","
                << fmt_fixed(c.metrics.mae, 6) << "," << fmt_fixed(c.metrics.rmse, 6) << ","
                << fmt_fixed(one_minus_ssim(c.metrics.ssim), 6) << "," << c.dir << "/report.json,ok\n";
        } else {
            csv << ",,,,,,,failed\n";
            failed.push_back(json{{"R", c.ratio}, {"N", c.iterations}, {"error", c.error}});
        }
    }
    const fs::path csv_path = fs::path(o.base.out) / "sweep.csv";
    write_text(csv_path, csv.str());
    m.outputs = json{{"csv", csv_path.string()}, {"cells", cells.size()}, {"failed", failed}};
    out << json{{"command", "sweep"}, {"csv", csv_path.string()}, {"cells", cells.size()}, {"failed", failed.size()}}.dump()
        << "\n";
    if (!failed.empty()) throw std::runtime_error(std::to_string(failed.size()) + " sweep cell(s) failed");
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
    std::string checkpoint, data, split = "val", out;
    std::size_t threads = 1;
};

void cmd_eval(const EvalOptions& o, Manifest& m, std::ostream& out) {
    m.config = json{{"split", o.split}, {"threads", o.threads}};
    m.inputs = json{{"checkpoint", o.checkpoint}, {"data", o.data}};
    const NetworkGraph net = load_checkpoint(o.checkpoint);
    const Dataset d = load_split(o.data, o.split);
    check_compatible(net, d, o.split);
    set_num_threads(o.threads);
    const EvalResult r = evaluate(net, d);
    json j = metrics_json(r.metrics);
    j["split"] = o.split;
    j["count"] = d.size();
    out << j.dump(2) << "\n";
    if (!o.out.empty()) {
        write_text(fs::path(o.out) / "eval.json", j.dump(2) + "\n");
        m.outputs = json{{"report", (fs::path(o.out) / "eval.json").string()}};
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"einv: structured filter pruning for seismic inversion networks"};
    app.name("einv");
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    SynthOptions synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic seismic/velocity dataset");
    s->add_option("--config", synth.config, "JSON config with task, count and splits")->check(CLI::ExistingFile);
    s->add_option("--out", synth.out, "Output directory")->required();
    s->add_option("--seed", synth.seed, "Override the task seed");
    s->add_option("--count", synth.count, "Override the total sample count");

    TrainOptions train;
    auto* t = app.add_subcommand("train", "Train a network from scratch");
    t->add_option("--arch", train.arch, "Architecture JSON (netgraph config or {\"preset\": ...})")->required()->check(CLI::ExistingFile);
    t->add_option("--data", train.data, "Dataset directory with train/ and val/")->required();
    t->add_option("--out", train.out, "Output checkpoint path")->required();
    t->add_option("--config", train.config, "JSON training config; flags override it")->check(CLI::ExistingFile);
    t->add_option("--init-seed", train.init_seed, "Weight initialisation seed");
    add_train_flags(*t, train.flags);

    CompressOptions comp;
    auto* c = app.add_subcommand("compress", "Prune, finetune and optionally retrain a checkpoint");
    auto add_compress_common = [](CLI::App* sub, CompressOptions& o) {
        sub->add_option("--checkpoint", o.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
        sub->add_option("--data", o.data, "Dataset directory with train/ and val/")->required();
        sub->add_option("--out", o.out, "Output directory")->required();
        sub->add_option("--config", o.config, "JSON pipeline config; flags override it")->check(CLI::ExistingFile);
        sub->add_option("--threshold", o.threshold, "Validation-loss threshold T (number, inf or -inf)");
        sub->add_option("--retrain-seed", o.retrain_seed, "Seed for retraining from scratch");
        add_train_flags(*sub, o.flags);
    };
    add_compress_common(c, comp);
    c->add_option("--ratio", comp.ratio, "Target pruning ratio R in [0, 1)");
    c->add_option("--iters", comp.iterations, "Prune/finetune iterations N >= 1");

    CostOptions cost;
    auto* co = app.add_subcommand("cost", "Parameter and FLOPs report");
    co->add_option("--checkpoint", cost.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
    co->add_option("--baseline", cost.baseline, "Baseline checkpoint for reduction percentages")->check(CLI::ExistingFile);
    co->add_option("--out", cost.out, "Directory for cost.json and manifest.json");

    BenchOptions bench;
    auto* b = app.add_subcommand("bench", "Single-sample inference latency");
    b->add_option("--checkpoint", bench.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
    b->add_option("--baseline", bench.baseline, "Baseline checkpoint to compare against")->check(CLI::ExistingFile);
    b->add_option("--runs", bench.runs, "Timed runs");
    b->add_option("--warmup", bench.warmup, "Untimed warmup runs");
    b->add_option("--threads", bench.threads, "Worker threads");
    b->add_option("--seed", bench.seed, "Seed of the random input");
    b->add_option("--out", bench.out, "Directory for bench.json and manifest.json");

    SweepOptions sweep;
    auto* sw = app.add_subcommand("sweep", "Compress over a grid of ratios and iteration counts");
    add_compress_common(sw, sweep.base);
    sw->add_option("--ratios", sweep.ratios, "Comma-separated ratios")->delimiter(',');
    sw->add_option("--iters", sweep.iters, "Comma-separated iteration counts")->delimiter(',');
    sw->add_option("--runs", sweep.runs, "Latency runs per cell");
    sw->add_option("--warmup", sweep.warmup, "Latency warmup runs per cell");
    sw->add_flag("--parallel", sweep.parallel, "Run cells concurrently (skips latency)");
    sw->add_option("--jobs", sweep.jobs, "Concurrent cells with --parallel (0 = all cores)");

    EvalOptions ev;
    auto* e = app.add_subcommand("eval", "Metrics of a checkpoint on a dataset split");
    e->add_option("--checkpoint", ev.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
    e->add_option("--data", ev.data, "Dataset directory")->required();
    e->add_option("--split", ev.split, "Split to score")->check(CLI::IsMember({"train", "val", "test"}));
    e->add_option("--threads", ev.threads, "Worker threads");
    e->add_option("--out", ev.out, "Directory for eval.json and manifest.json");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& pe) {
        err << "error: " << pe.what() << "\n\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    Manifest m;
    m.command = sub->get_name();
    const auto manifest_in = [&](const std::string& dir) { m.path = dir.empty() ? fs::path{} : fs::path(dir) / "manifest.json"; };
    try {
        if (sub == s) {
            manifest_in(synth.out);
            cmd_synth(synth, m, out);
        } else if (sub == t) {
            m.path = fs::path(train.out + ".manifest.json");
            cmd_train(*t, train, m, out);
        } else if (sub == c) {
            manifest_in(comp.out);
            cmd_compress(*c, comp, m, out);
        } else if (sub == co) {
            manifest_in(cost.out);
            cmd_cost(cost, m, out);
        } else if (sub == b) {
            manifest_in(bench.out);
            cmd_bench(bench, m, out);
        } else if (sub == sw) {
            manifest_in(sweep.base.out);
            cmd_sweep(*sw, sweep, m, out);
        } else {
            manifest_in(ev.out);
            cmd_eval(ev, m, out);
        }
        m.write("ok", "");
        return 0;
    } catch (const UsageError& ue) {
        err << "error: " << ue.what() << "\n\n" << sub->help();
        try {
            m.write("error", ue.what());
        } catch (const std::exception&) {
        }
        return 2;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << "\n";
        try {
            m.write("error", ex.what());
        } catch (const std::exception& wex) {
            err << "error: could not write manifest: " << wex.what() << "\n";
        }
        return 1;
    }
}

}  // namespace einv::cli
