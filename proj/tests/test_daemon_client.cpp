#include "ringcorr/daemon_client.hpp"
#include "ringcorr/errors.hpp"
#include "ringcorr/simulator.hpp"

#include "support.hpp"

#include "doctest.h"

using namespace ringcorr;
using namespace ringcorr::ingest;
using testutil::MockDaemon;
using testutil::slurp;
using testutil::TempDir;

namespace {

const sim::SimResult& chain() {
    static const sim::SimResult res = [] {
        sim::SimConfig c;
        c.total_blocks = 60;
        c.seed = 4;
        sim::AgentProfile a;
        a.name = "a";
        a.count = 30;
        a.spend_rate = 40.0;
        c.agents.push_back(a);
        return sim::simulate_chain(c);
    }();
    return res;
}

RetryPolicy fast_retry(int attempts = 4) {
    RetryPolicy p;
    p.max_attempts = attempts;
    p.base_delay = std::chrono::milliseconds(1);
    p.max_delay = std::chrono::milliseconds(4);
    p.timeout = std::chrono::seconds(5);
    return p;
}

std::vector<RawTransactionRecord> records_between(std::int64_t from, std::int64_t to) {
    std::vector<RawTransactionRecord> out;
    for (const auto& r : chain().raw)
        if (r.height >= from && r.height <= to)
            out.push_back(r);
    return out;
}

} // namespace

TEST_CASE("key offsets decode to absolute indices") {
    CHECK(decode_key_offsets({5, 1, 3}) == std::vector<std::uint64_t>{5, 6, 9});
    CHECK(decode_key_offsets({}).empty());
    CHECK(decode_key_offsets({7}) == std::vector<std::uint64_t>{7});
}

TEST_CASE("tip and single blocks") {
    MockDaemon d(chain().raw);
    DaemonClient c(d.url(), fast_retry());
    CHECK(c.tip_height() == 59);

    const auto b = c.fetch_block(10);
    CHECK(b.block.height == 10);
    CHECK(b.records == records_between(10, 10));
    CHECK(b.records.front().rings.empty()); // miner tx first

    std::vector<RawTransactionRecord> got;
    const auto s = fetch_range(c, 10, 10, [&](const RawTransactionRecord& r) { got.push_back(r); });
    CHECK(s.blocks == 1);
    CHECK(got == records_between(10, 10));

    CHECK_THROWS_AS(c.fetch_block(500), SchemaError);
}

TEST_CASE("range fetch reproduces the chain") {
    MockDaemon d(chain().raw);
    DaemonClient c(d.url(), fast_retry());
    std::vector<RawTransactionRecord> got;
    const auto s = fetch_range(c, 0, 59, [&](const RawTransactionRecord& r) { got.push_back(r); });
    CHECK(s.blocks == 60);
    CHECK(got == chain().raw);
}

TEST_CASE("invalid ranges") {
    MockDaemon d(chain().raw);
    DaemonClient c(d.url(), fast_retry());
    auto sink = [](const RawTransactionRecord&) {};
    CHECK_THROWS_AS(fetch_range(c, 5, 4, sink), RangeError);
    CHECK_THROWS_AS(fetch_range(c, 0, 60, sink), RangeError);
    CHECK_THROWS_AS(fetch_range(c, -1, 3, sink), RangeError);
}

TEST_CASE("transient failures are retried") {
    MockDaemon d(chain().raw);
    DaemonClient c(d.url(), fast_retry(4));
    d.fail_next(3);
    CHECK(c.tip_height() == 59);
    CHECK(d.requests() == 4);

    d.fail_next(10);
    CHECK_THROWS_AS(c.tip_height(), ConnectionError);
}

TEST_CASE("unreachable daemon") {
    std::string url;
    {
        MockDaemon d(chain().raw);
        url = d.url();
    }
    DaemonClient c(url, fast_retry(2));
    CHECK_THROWS_AS(c.tip_height(), ConnectionError);
}

TEST_CASE("export header records the first output index") {
    MockDaemon d(chain().raw);
    DaemonClient c(d.url(), fast_retry());
    TempDir dir("fetch");
    fetch_to_file(c, 20, 30, dir / "raw.jsonl");
    std::uint64_t before = 0;
    for (const auto& r : chain().raw)
        if (r.height < 20)
            before += r.outputs_created;
    JsonlReader rd(dir / "raw.jsonl");
    CHECK(rd.header().start_index == before);
    CHECK(read_raw_file(dir / "raw.jsonl") == records_between(20, 30));
}

TEST_CASE("interrupted fetch resumes from its checkpoint") {
    MockDaemon d(chain().raw);
    TempDir dir("resume");
    FetchOptions opts;
    opts.checkpoint = dir / "cp.json";
    opts.checkpoint_every = 7;

    DaemonClient ref_client(d.url(), fast_retry());
    fetch_to_file(ref_client, 0, 59, dir / "ref.jsonl");

    d.fail_from_height(33);
    DaemonClient c(d.url(), fast_retry(2));
    CHECK_THROWS_AS(fetch_to_file(c, 0, 59, dir / "out.jsonl", opts), ConnectionError);
    REQUIRE(std::filesystem::exists(dir / "cp.json"));
    const auto cp = nlohmann::json::parse(slurp(dir / "cp.json"));
    CHECK(cp["next_height"] == 28);
    CHECK(std::filesystem::file_size(dir / "out.jsonl") >= cp["bytes"].get<std::uint64_t>());

    d.fail_from_height(-1);
    const auto s = fetch_to_file(c, 0, 59, dir / "out.jsonl", opts);
    CHECK(s.resumed);
    CHECK(s.blocks == 32);
    CHECK(slurp(dir / "out.jsonl") == slurp(dir / "ref.jsonl"));
}
