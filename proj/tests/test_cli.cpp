#include "ringcorr/cli.hpp"
#include "ringcorr/ingest.hpp"
#include "ringcorr/simulator.hpp"

#include "support.hpp"

#include "doctest.h"
#include "json.hpp"

#include <cmath>
#include <functional>

using nlohmann::json;
using ringcorr::cli::run;
using testutil::slurp;
using testutil::spit;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

const char* kConfig =
    R"({"seed":5,"total_blocks":3000,"agents":[{"name":"w","count":30,"spend_rate":4.0}]})";

int run_args(std::vector<std::string> args) {
    args.insert(args.begin(), "ringcorr");
    return run(args);
}

json without_duration(const fs::path& p) {
    auto j = json::parse(slurp(p));
    j.erase("duration_seconds");
    return j;
}

// Simulates the small test chain into dir; returns the chain path.
std::string simulate_into(const TempDir& dir, const std::string& seed = "5") {
    spit(dir / "c.json", kConfig);
    const auto chain = (dir / "chain.jsonl").string();
    REQUIRE(run_args({"simulate", "--config", (dir / "c.json").string(), "--seed", seed, "--out", chain,
                      "--truth", (dir / "truth.jsonl").string(), "--raw-out", (dir / "raw.jsonl").string()}) == 0);
    return chain;
}

} // namespace

TEST_CASE("simulate is reproducible") {
    TempDir a("cli_a"), b("cli_b");
    simulate_into(a);
    simulate_into(b);
    for (const char* f : {"chain.jsonl", "truth.jsonl", "raw.jsonl"})
        CHECK(slurp(a / f) == slurp(b / f));
    auto ma = without_duration(a / "chain.jsonl.manifest.json");
    auto mb = without_duration(b / "chain.jsonl.manifest.json");
    // paths differ between the two directories
    for (auto* m : {&ma, &mb}) {
        m->erase("inputs");
        m->erase("outputs");
    }
    CHECK(ma == mb);
    CHECK(ma["seed"] == 5);
    CHECK(ma["subcommand"] == "simulate");
}

TEST_CASE("usage errors exit 2") {
    TempDir dir("cli_usage");
    CHECK(run_args({"simulate", "--bogus"}) == 2);
    CHECK(run_args({"analyze", "pairs", "--chain", (dir / "missing.jsonl").string(), "--out-dir",
                    (dir / "o").string()}) == 2);
    CHECK(run_args({"frobnicate"}) == 2);
    CHECK(run_args({}) == 2);
    CHECK(run_args({"--help"}) == 0);
}

TEST_CASE("domain errors exit 1") {
    TempDir dir("cli_domain");
    spit(dir / "bad.json", R"({"agents":[{"name":"x","self_cluster":1.5}]})");
    CHECK(run_args({"simulate", "--config", (dir / "bad.json").string(), "--out", (dir / "c").string(), "--truth",
                    (dir / "t").string()}) == 1);
    spit(dir / "chain.jsonl", "{not json\n");
    CHECK(run_args({"analyze", "pairs", "--chain", (dir / "chain.jsonl").string(), "--out-dir",
                    (dir / "o").string()}) == 1);
}

TEST_CASE("pairs analysis writes surfaces and a manifest without touching the input") {
    TempDir dir("cli_pairs");
    const auto chain = simulate_into(dir);
    const auto before = std::hash<std::string>{}(slurp(chain));
    const auto out = dir / "pairs";
    REQUIRE(run_args({"analyze", "pairs", "--chain", chain, "--chunk-blocks", "1000", "--out-dir", out.string()}) == 0);
    CHECK(std::hash<std::string>{}(slurp(chain)) == before);

    const auto m = json::parse(slurp(out / "manifest.json"));
    CHECK(m["config"]["binning"]["bin_width"] == 1382400.0);
    CHECK(m["config"]["binning"]["bins"] == 64);
    CHECK(m["config"]["marginals"] == "shared");
    CHECK(m["tool_version"] == ringcorr::cli::kToolVersion);
    for (const char* f : {"foreground_joint.json", "background_marginal.json", "ratio.json", "ratio.csv",
                          "diagonal.json", "diagonal_ratio.csv"})
        CHECK(fs::exists(out / f));

    const auto fg = json::parse(slurp(out / "foreground_joint.json"));
    const auto& counts = fg["counts"];
    for (std::size_t i = 0; i < counts.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            REQUIRE(counts[i][j] == counts[j][i]);

    REQUIRE(run_args({"analyze", "pairs", "--chain", chain, "--binning", "gamma-cdf", "--out-dir",
                      (dir / "g").string()}) == 0);
    const auto g = json::parse(slurp(dir / "g" / "manifest.json"));
    CHECK(g["config"]["binning"]["bins"] == 50);
    // a single chunk cannot give error bars
    CHECK(g["outputs"]["diagonal"].get<std::string>().rfind("skipped", 0) == 0);
}

TEST_CASE("scoring with a flat surface leaves the uniform prior") {
    TempDir dir("cli_score");
    const auto chain = simulate_into(dir);
    REQUIRE(run_args({"analyze", "pairs", "--chain", chain, "--out-dir", (dir / "p").string()}) == 0);
    auto surface = json::parse(slurp(dir / "p" / "ratio.json"));
    for (auto& row : surface["values"])
        for (auto& v : row)
            v = 1.0;
    for (auto& row : surface["valid"])
        for (auto& v : row)
            v = true;
    spit(dir / "flat.json", surface.dump());

    const auto scores = (dir / "scores.jsonl").string();
    REQUIRE(run_args({"score", "--chain", chain, "--surface", (dir / "flat.json").string(), "--out", scores}) == 0);
    std::istringstream in(slurp(scores));
    std::string line;
    std::size_t rings = 0;
    while (std::getline(in, line)) {
        const auto j = json::parse(line);
        for (const auto& r : j["rings"]) {
            for (const auto& p : r["posterior"])
                REQUIRE(std::abs(p.get<double>() - 1.0 / 11.0) < 1e-12);
            REQUIRE_FALSE(r["clamped"].get<bool>());
            ++rings;
        }
    }
    CHECK(rings == ringcorr::sim::read_truth(dir / "truth.jsonl").size());

    const auto metrics = (dir / "metrics.json").string();
    REQUIRE(run_args({"evaluate", "--scores", scores, "--truth", (dir / "truth.jsonl").string(), "--out",
                      metrics}) == 0);
    const auto m = json::parse(slurp(metrics));
    CHECK(m["rings"] == rings);
    CHECK(std::abs(m["mean_true_mass"].get<double>() - 1.0 / 11.0) < 1e-15);
}

TEST_CASE("tod analysis") {
    TempDir dir("cli_tod");
    const auto chain = simulate_into(dir);
    REQUIRE(run_args({"analyze", "tod", "--chain", chain, "--background-seed", "3", "--out-dir",
                      (dir / "t").string()}) == 0);
    for (const char* f : {"ring_ring.json", "ring_tx.csv", "ring_ring_background.json", "ring_ring_ratio.json"})
        CHECK(fs::exists(dir / "t" / f));
    const auto s = json::parse(slurp(dir / "t" / "ring_tx.json"));
    CHECK(s["values"].size() == 24);
}

TEST_CASE("ingest resolves raw exports and fetches from a daemon") {
    TempDir dir("cli_ingest");
    const auto chain = simulate_into(dir);

    const auto resolved = (dir / "resolved.jsonl").string();
    REQUIRE(run_args({"ingest", "--raw", (dir / "raw.jsonl").string(), "--out", resolved}) == 0);
    CHECK(fs::exists(resolved + ".manifest.json"));
    {
        ringcorr::ingest::JsonlReader a(chain), b(resolved);
        std::size_t n = 0;
        while (auto ta = a.next_resolved()) {
            auto tb = b.next_resolved();
            REQUIRE(tb);
            REQUIRE(ta->tx_id == tb->tx_id);
            REQUIRE(ta->inputs.size() == tb->inputs.size());
            ++n;
        }
        CHECK_FALSE(b.next_resolved());
        CHECK(n > 3000);
    }

    std::vector<ringcorr::ingest::RawTransactionRecord> records;
    {
        ringcorr::ingest::JsonlReader r(dir / "raw.jsonl");
        while (auto rec = r.next_raw())
            if (rec->height < 200)
                records.push_back(*rec);
    }
    testutil::MockDaemon daemon(records);
    const auto fetched = (dir / "fetched.jsonl").string();
    REQUIRE(run_args({"ingest", "--rpc-url", daemon.url(), "--from-height", "0", "--to-height", "199", "--out",
                      fetched}) == 0);
    ringcorr::ingest::JsonlReader r(fetched);
    std::size_t k = 0;
    while (auto rec = r.next_raw()) {
        REQUIRE(k < records.size());
        CHECK(*rec == records[k]);
        ++k;
    }
    CHECK(k == records.size());
    const auto m = json::parse(slurp(fetched + ".manifest.json"));
    CHECK(m["subcommand"] == "ingest");
}
