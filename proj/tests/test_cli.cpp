// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>
#include <iterator>
#include <sstream>

#include "einv/cli.hpp"
#include "einv/costs.hpp"
#include "einv/dataio.hpp"
#include "einv/pipeline.hpp"
#include "support.hpp"

using namespace einv;
using namespace einv::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run einv_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

void put_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(); }

std::vector<std::size_t> widths_of(const NetworkGraph& net) {
    std::vector<std::size_t> w;
    for (const auto& l : net.layers())
        if (l.spec.producing()) w.push_back(l.spec.out_channels);
    return w;
}

// A small dataset and a briefly trained tiny checkpoint shared by the cases.
struct Workspace {
    TempDir dir{"cli"};
    fs::path data, ckpt, arch;

    Workspace() {
        data = dir.path() / "data";
        arch = dir.path() / "arch.json";
        ckpt = dir.path() / "model" / "base.einv";
        put_json(dir.path() / "synth.json", {{"task", {{"seed", 3}}}, {"count", 60}, {"splits", {{"train", 0.8}, {"val", 0.1}, {"test", 0.1}}}});
        put_json(arch, {{"preset", "tiny"}});
        REQUIRE(einv_cli({"synth", "--config", (dir.path() / "synth.json").string(), "--out", data.string()}).code == 0);
        const Run r = einv_cli({"train", "--arch", arch.string(), "--data", data.string(), "--out", ckpt.string(), "--epochs", "2"});
        REQUIRE(r.code == 0);
    }
};

Workspace& ws() {
    static Workspace w;
    return w;
}

}  // namespace

TEST_CASE("synth writes deterministic splits") {
    const auto& w = ws();
    CHECK(read_npy(w.data / "train" / "inputs.npy").shape() == Shape{48, 3, 64, 16});
    CHECK(read_npy(w.data / "val" / "maps.npy").shape() == Shape{6, 1, 16, 16});
    CHECK(read_npy(w.data / "test" / "maps.npy").shape() == Shape{6, 1, 16, 16});
    TempDir again("cli_synth");
    REQUIRE(einv_cli({"synth", "--config", (w.dir.path() / "synth.json").string(), "--out", again.path().string()}).code == 0);
    for (const char* split : {"train", "val", "test"}) {
        for (const char* f : {"inputs.npy", "maps.npy"}) {
            CHECK(slurp(again.path() / split / f) == slurp(w.data / split / f));
        }
    }
    CHECK(read_json(again.path() / "manifest.json").at("status") == "ok");
    // The validation split continues where the training split ends.
    SyntheticTask task;
    task.seed = 3;
    CHECK(read_npy(w.data / "val" / "maps.npy") == gen_synthetic(task, 6, 48).targets);

    TempDir bad("cli_synth_bad");
    put_json(bad.path() / "c.json", {{"count", 20}, {"splits", {{"train", 0.8}, {"val", 0.1}, {"test", 0.2}}}});
    const Run r = einv_cli({"synth", "--config", (bad.path() / "c.json").string(), "--out", (bad.path() / "o").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("sum to 1") != std::string::npos);
}

TEST_CASE("train with zero learning rate keeps the initial weights") {
    const auto& w = ws();
    TempDir t("cli_train");
    const fs::path ck = t.path() / "lr0.einv";
    const Run r = einv_cli({"train", "--arch", w.arch.string(), "--data", w.data.string(), "--out", ck.string(), "--epochs", "1",
                       "--lr", "0", "--init-seed", "5"});
    REQUIRE(r.code == 0);
    NetworkGraph ref = build_tiny_testnet();
    init_weights(ref, 5);
    const NetworkGraph got = load_checkpoint(ck);
    for (std::size_t i = 0; i < ref.layers().size(); ++i) {
        if (ref.layers()[i].conv) CHECK(got.layers()[i].conv->weights == ref.layers()[i].conv->weights);
    }
    const json printed = json::parse(r.out);
    Dataset val{read_npy(w.data / "val" / "inputs.npy"), read_npy(w.data / "val" / "maps.npy")};
    CHECK(printed.at("val_loss").get<double>() == doctest::Approx(evaluate_loss(got, val)).epsilon(1e-12));
    const std::string curve = slurp(fs::path(ck.string() + ".loss.csv"));
    CHECK(curve.rfind("epoch,train_loss,val_loss\n1,", 0) == 0);
    const json man = read_json(ck.string() + ".manifest.json");
    CHECK(man.at("status") == "ok");
    CHECK(man.at("config").at("lr") == 0.0);
}

TEST_CASE("train rejects data that does not fit the architecture before training") {
    const auto& w = ws();
    TempDir t("cli_train_bad");
    put_json(t.path() / "big.json", {{"preset", "inversionnet"}});
    const Run r = einv_cli({"train", "--arch", (t.path() / "big.json").string(), "--data", w.data.string(), "--out",
                       (t.path() / "x.einv").string()});
    CHECK(r.code == 1);
    CHECK_FALSE(fs::exists(t.path() / "x.einv"));
    CHECK(read_json(t.path() / "x.einv.manifest.json").at("status") == "error");
}

TEST_CASE("compress: R = 0 keeps widths, R = 0.5 halves them") {
    const auto& w = ws();
    const NetworkGraph base = load_checkpoint(w.ckpt);
    TempDir t("cli_compress");
    Run r = einv_cli({"compress", "--checkpoint", w.ckpt.string(), "--data", w.data.string(), "--out", (t.path() / "r0").string(),
                 "--ratio", "0", "--iters", "2", "--epochs", "2"});
    REQUIRE(r.code == 0);
    CHECK(widths_of(load_checkpoint(t.path() / "r0" / "pruned.einv")) == widths_of(base));

    r = einv_cli({"compress", "--checkpoint", w.ckpt.string(), "--data", w.data.string(), "--out", (t.path() / "r5").string(),
             "--ratio", "0.5", "--iters", "1", "--epochs", "1", "--threshold", "inf"});
    REQUIRE(r.code == 0);
    const auto widths = widths_of(load_checkpoint(t.path() / "r5" / "pruned.einv"));
    const auto before = widths_of(base);
    for (std::size_t i = 0; i + 1 < before.size(); ++i) CHECK(widths[i] == kept_filters(before[i], 0.5));
    const json report = read_json(t.path() / "r5" / "report.json");
    CHECK(report.at("branch") == "finetuned");
    CHECK(report.at("retrained").is_null());
    CHECK(report.contains("test"));
    CHECK(report.at("costs").at("reduction").at("params_pct").get<double>() > 50.0);
    const auto plan = PruningPlan::from_json(read_json(t.path() / "r5" / "plan_iter1.json"));
    CHECK(plan.prunes_anything());
    CHECK(read_json(t.path() / "r5" / "manifest.json").at("config").at("threshold") == "inf");
}

TEST_CASE("compress argument errors are usage errors") {
    const auto& w = ws();
    TempDir t("cli_compress_bad");
    const fs::path out = t.path() / "o";
    fs::create_directories(out);
    Run r = einv_cli({"compress", "--checkpoint", w.ckpt.string(), "--data", w.data.string(), "--out", out.string(), "--ratio", "1"});
    CHECK(r.code == 2);
    CHECK(r.err.find("[0, 1)") != std::string::npos);
    const json man = read_json(out / "manifest.json");
    CHECK(man.at("status") == "error");
    CHECK(man.at("error").get<std::string>().find("ratio") != std::string::npos);
    r = einv_cli({"compress", "--checkpoint", w.ckpt.string(), "--data", w.data.string(), "--out", out.string(), "--iters", "0"});
    CHECK(r.code == 2);
    r = einv_cli({"compress", "--data", w.data.string(), "--out", out.string()});
    CHECK(r.code == 2);
    CHECK(einv_cli({"frobnicate"}).code == 2);
    CHECK(einv_cli({}).code == 2);
    const Run v = einv_cli({"--version"});
    CHECK(v.code == 0);
    CHECK(v.out == std::string(cli::kVersion) + "\n");
}

TEST_CASE("cost against itself reports no reduction") {
    const auto& w = ws();
    TempDir t("cli_cost");
    const Run r = einv_cli({"cost", "--checkpoint", w.ckpt.string(), "--baseline", w.ckpt.string(), "--out", t.path().string()});
    REQUIRE(r.code == 0);
    const json j = read_json(t.path() / "cost.json");
    CHECK(j.at("reduction").at("params_pct") == 0.0);
    CHECK(j.at("reduction").at("flops_pct") == 0.0);
    CHECK(j.at("totals").at("params") == 26931);
    CHECK(j.at("totals").at("flops") == 1965056);
}

TEST_CASE("bench statistics and manifest") {
    const auto& w = ws();
    TempDir t("cli_bench");
    Run r = einv_cli({"bench", "--checkpoint", w.ckpt.string(), "--runs", "1", "--warmup", "0", "--out", t.path().string()});
    REQUIRE(r.code == 0);
    CHECK(read_json(t.path() / "bench.json").at("latency").at("std_ms") == 0.0);
    r = einv_cli({"bench", "--checkpoint", w.ckpt.string(), "--baseline", w.ckpt.string(), "--out", t.path().string()});
    REQUIRE(r.code == 0);
    const json man = read_json(t.path() / "manifest.json");
    CHECK(man.at("config").at("runs") == 50);
    CHECK(man.at("config").at("warmup") == 5);
    CHECK(man.at("config").at("threads") == 1);
    const json lat = read_json(t.path() / "bench.json").at("latency");
    CHECK(lat.at("min_ms").get<double>() <= lat.at("mean_ms").get<double>());
    CHECK(lat.at("mean_ms").get<double>() <= lat.at("max_ms").get<double>());
    CHECK(einv_cli({"bench", "--checkpoint", w.ckpt.string(), "--runs", "0"}).code == 2);
}

TEST_CASE("sweep writes one row per cell; R = 0 matches the baseline") {
    const auto& w = ws();
    TempDir t("cli_sweep");
    const Run r = einv_cli({"sweep", "--checkpoint", w.ckpt.string(), "--data", w.data.string(), "--out", t.path().string(),
                       "--ratios", "0,0.5,0.9", "--iters", "1,2", "--epochs", "1", "--runs", "2", "--warmup", "0",
                       "--threshold", "inf"});
    REQUIRE(r.code == 0);
    std::istringstream csv(slurp(t.path() / "sweep.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "R,N,params,flops,latency_ms,MAE,RMSE,1-SSIM,report,status");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(csv, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        rows.push_back(cells);
    }
    REQUIRE(rows.size() == 6);
    for (const auto& row : rows) {
        REQUIRE(row.size() == 10);
        CHECK(row[9] == "ok");
        CHECK_FALSE(row[4].empty());
        CHECK(fs::exists(t.path() / row[8]));
    }
    CHECK(std::stoull(rows[0][2]) == 26931);
    CHECK(std::stoull(rows[2][2]) < std::stoull(rows[0][2]));
    CHECK(std::stoull(rows[4][2]) < std::stoull(rows[2][2]));
    // The R = 0 cell scores the untouched checkpoint.
    Dataset test{read_npy(w.data / "test" / "inputs.npy"), read_npy(w.data / "test" / "maps.npy")};
    const auto m = evaluate(load_checkpoint(w.ckpt), test).metrics;
    CHECK(std::stod(rows[0][5]) == doctest::Approx(m.mae).epsilon(1e-5));
    CHECK(read_json(t.path() / "manifest.json").at("config").at("metric_split") == "test");
}

TEST_CASE("sweep records failed cells and exits nonzero") {
    const auto& w = ws();
    TempDir t("cli_sweep_fail");
    // An absurd learning rate drives finetuning to non-finite losses; R = 0 never trains.
    const Run r = einv_cli({"sweep", "--checkpoint", w.ckpt.string(), "--data", w.data.string(), "--out", t.path().string(),
                       "--ratios", "0,0.5", "--iters", "1", "--epochs", "2", "--lr", "1e30", "--parallel", "--jobs", "2"});
    CHECK(r.code == 1);
    const std::string csv = slurp(t.path() / "sweep.csv");
    CHECK(csv.find(",ok\n") != std::string::npos);
    CHECK(csv.find(",failed\n") != std::string::npos);
    const json man = read_json(t.path() / "manifest.json");
    CHECK(man.at("status") == "error");
    CHECK(man.at("outputs").at("failed").size() == 1);
    CHECK(einv_cli({"sweep", "--checkpoint", w.ckpt.string(), "--data", w.data.string(), "--out", t.path().string(), "--ratios",
               "1.5"})
              .code == 2);
}

TEST_CASE("eval reports metrics for the requested split") {
    const auto& w = ws();
    const Run r = einv_cli({"eval", "--checkpoint", w.ckpt.string(), "--data", w.data.string(), "--split", "test"});
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    Dataset test{read_npy(w.data / "test" / "inputs.npy"), read_npy(w.data / "test" / "maps.npy")};
    const auto m = evaluate(load_checkpoint(w.ckpt), test).metrics;
    CHECK(j.at("split") == "test");
    CHECK(j.at("count") == 6);
    CHECK(j.at("mae").get<double>() == doctest::Approx(m.mae).epsilon(1e-12));
    CHECK(j.at("one_minus_ssim").get<double>() == doctest::Approx(1.0 - m.ssim).epsilon(1e-12));
    CHECK(einv_cli({"eval", "--checkpoint", w.ckpt.string(), "--data", w.data.string(), "--split", "bogus"}).code == 2);
}
