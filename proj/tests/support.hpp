#pragma once

#include "ringcorr/chain_model.hpp"
#include "ringcorr/ingest.hpp"

#include "httplib.h"
#include "json.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace testutil {

namespace fs = std::filesystem;

// Ring whose members were created at the given timestamps (height = timestamp / 120).
inline ringcorr::RingInput ring_at(const std::vector<std::int64_t>& origin_ts) {
    ringcorr::RingInput r;
    for (auto ts : origin_ts)
        r.members.push_back({{ts / 120, ts}, std::nullopt});
    return r;
}

inline ringcorr::Transaction make_tx(std::string id, std::int64_t height, std::int64_t ts,
                                     const std::vector<std::vector<std::int64_t>>& rings) {
    ringcorr::Transaction tx{std::move(id), {height, ts}, {}};
    for (const auto& r : rings)
        tx.inputs.push_back(ring_at(r));
    return tx;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("ringcorr_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const noexcept { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

// Serves a fixed chain through the monerod endpoints the client uses.
// Records must be in block order with the miner transaction first in each
// block; output indices are assigned consecutively from `start_index`.
class MockDaemon {
public:
    explicit MockDaemon(const std::vector<ringcorr::ingest::RawTransactionRecord>& records,
                        std::uint64_t start_index = 0) {
        std::uint64_t next = start_index;
        for (const auto& r : records) {
            auto& b = blocks_[r.height];
            b.height = r.height;
            b.timestamp = r.timestamp;
            b.hashes.push_back(r.tx_id);
            std::vector<std::uint64_t> idx(r.outputs_created);
            for (auto& i : idx)
                i = next++;
            txs_[r.tx_id] = {r, std::move(idx)};
        }
        server_.Post("/json_rpc", [this](const httplib::Request& req, httplib::Response& res) {
            handle_rpc(req, res);
        });
        server_.Post("/get_transactions", [this](const httplib::Request& req, httplib::Response& res) {
            handle_txs(req, res);
        });
        server_.set_tcp_nodelay(true);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockDaemon() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

    // The next n requests answer 503.
    void fail_next(int n) { fail_next_ = n; }
    // get_block answers 500 for heights >= h until cleared with -1.
    void fail_from_height(std::int64_t h) { fail_from_ = h; }
    int requests() const { return requests_; }
    std::int64_t tip() const { return blocks_.empty() ? -1 : blocks_.rbegin()->first; }

private:
    struct Block {
        std::int64_t height = 0;
        std::int64_t timestamp = 0;
        std::vector<std::string> hashes;
    };
    struct Tx {
        ringcorr::ingest::RawTransactionRecord record;
        std::vector<std::uint64_t> output_indices;
    };

    bool injected_failure(httplib::Response& res) {
        ++requests_;
        if (fail_next_ > 0) {
            --fail_next_;
            res.status = 503;
            return true;
        }
        return false;
    }

    void handle_rpc(const httplib::Request& req, httplib::Response& res) {
        using nlohmann::json;
        if (injected_failure(res))
            return;
        const auto body = json::parse(req.body);
        const auto method = body.at("method").get<std::string>();
        json out{{"jsonrpc", "2.0"}, {"id", body.value("id", json("0"))}};
        if (method == "get_block_count") {
            out["result"] = {{"count", blocks_.empty() ? 0 : blocks_.rbegin()->first + 1}, {"status", "OK"}};
        } else if (method == "get_block") {
            const auto h = body.at("params").at("height").get<std::int64_t>();
            if (fail_from_ >= 0 && h >= fail_from_) {
                res.status = 500;
                return;
            }
            auto it = blocks_.find(h);
            if (it == blocks_.end()) {
                out["error"] = {{"code", -2}, {"message", "height out of range"}};
            } else {
                const auto& b = it->second;
                json hashes = json::array();
                for (std::size_t k = 1; k < b.hashes.size(); ++k)
                    hashes.push_back(b.hashes[k]);
                out["result"] = {{"block_header", {{"height", b.height}, {"timestamp", b.timestamp}}},
                                 {"miner_tx_hash", b.hashes.front()},
                                 {"tx_hashes", hashes},
                                 {"status", "OK"}};
            }
        } else {
            out["error"] = {{"code", -32601}, {"message", "Method not found"}};
        }
        res.set_content(out.dump(), "application/json");
    }

    void handle_txs(const httplib::Request& req, httplib::Response& res) {
        using nlohmann::json;
        if (injected_failure(res))
            return;
        const auto body = json::parse(req.body);
        json txs = json::array();
        for (const auto& h : body.at("txs_hashes")) {
            const auto& t = txs_.at(h.get<std::string>());
            json vin = json::array();
            if (t.record.rings.empty())
                vin.push_back({{"gen", {{"height", t.record.height}}}});
            for (const auto& ring : t.record.rings) {
                std::vector<std::uint64_t> rel;
                for (std::size_t i = 0; i < ring.size(); ++i)
                    rel.push_back(i == 0 ? ring[i] : ring[i] - ring[i - 1]);
                vin.push_back({{"key", {{"amount", 0}, {"key_offsets", rel}, {"k_image", "00"}}}});
            }
            json vout = json::array();
            for (std::uint64_t k = 0; k < t.record.outputs_created; ++k)
                vout.push_back({{"amount", 0}, {"target", {{"key", "00"}}}});
            const json as_json{{"version", 2}, {"vin", vin}, {"vout", vout}};
            txs.push_back({{"tx_hash", h}, {"as_json", as_json.dump()}, {"output_indices", t.output_indices}});
        }
        res.set_content(json{{"status", "OK"}, {"txs", txs}}.dump(), "application/json");
    }

    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::map<std::int64_t, Block> blocks_;
    std::map<std::string, Tx> txs_;
    std::atomic<int> fail_next_{0};
    std::atomic<std::int64_t> fail_from_{-1};
    std::atomic<int> requests_{0};
};

} // namespace testutil
