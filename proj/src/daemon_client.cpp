#include "ringcorr/daemon_client.hpp"

#include "ringcorr/errors.hpp"

#include "httplib.h"
#include "json.hpp"

#include <fstream>
#include <map>
#include <thread>

namespace ringcorr::ingest {

using nlohmann::json;

struct DaemonClient::Impl {
    explicit Impl(const std::string& url) : client(url) {}
    httplib::Client client;
};

DaemonClient::DaemonClient(std::string base_url, RetryPolicy retry)
    : impl_(std::make_unique<Impl>(base_url)), retry_(retry) {
    if (!impl_->client.is_valid())
        throw ConnectionError("invalid daemon URL '" + base_url + "'");
    const auto t = std::chrono::duration_cast<std::chrono::seconds>(retry_.timeout).count();
    impl_->client.set_connection_timeout(t, 0);
    impl_->client.set_read_timeout(t, 0);
    impl_->client.set_keep_alive(true);
    impl_->client.set_tcp_nodelay(true);
}

DaemonClient::~DaemonClient() = default;

std::string DaemonClient::post(const std::string& path, const std::string& body) {
    std::string last_error;
    const int attempts = std::max(1, retry_.max_attempts);
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) {
            const std::chrono::milliseconds delay = retry_.base_delay * (1LL << std::min(attempt - 1, 20));
            std::this_thread::sleep_for(std::min(delay, retry_.max_delay));
        }
        auto res = impl_->client.Post(path, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw SchemaError(path + " returned HTTP " + std::to_string(res->status));
        return res->body;
    }
    throw ConnectionError(path + " failed after " + std::to_string(attempts) +
                          " attempts: " + last_error);
}

namespace {

json parse_body(const std::string& body, const std::string& what) {
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        throw SchemaError(what + ": response is not JSON (" + e.what() + ")");
    }
}

json rpc_request(const std::string& method, json params = json::object()) {
    return json{{"jsonrpc", "2.0"}, {"id", "0"}, {"method", method}, {"params", std::move(params)}};
}

const json& rpc_result(const json& j, const std::string& method) {
    if (auto err = j.find("error"); err != j.end()) {
        const auto msg = err->value("message", std::string("unknown error"));
        throw SchemaError(method + ": daemon error: " + msg);
    }
    auto it = j.find("result");
    if (it == j.end() || !it->is_object())
        throw SchemaError(method + ": response lacks a 'result' object");
    return *it;
}

template <typename T>
T field(const json& j, const char* key, const std::string& what) {
    auto it = j.find(key);
    if (it == j.end())
        throw SchemaError(what + ": missing '" + key + "'");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw SchemaError(what + ": '" + key + "' has an unexpected type");
    }
}

RawTransactionRecord record_from_tx_json(const std::string& tx_hash, const json& tx,
                                         const BlockRef& block) {
    const std::string what = "tx " + tx_hash;
    RawTransactionRecord r;
    r.tx_id = tx_hash;
    r.height = block.height;
    r.timestamp = block.timestamp;
    for (const auto& in : field<json>(tx, "vin", what)) {
        if (in.contains("gen"))
            continue;
        auto key = in.find("key");
        if (key == in.end())
            throw SchemaError(what + ": unsupported input type");
        if (field<std::uint64_t>(*key, "amount", what) != 0)
            throw SchemaError(what + ": pre-RingCT input (non-zero amount) is not supported");
        r.rings.push_back(decode_key_offsets(field<std::vector<std::uint64_t>>(*key, "key_offsets", what)));
    }
    r.outputs_created = field<json>(tx, "vout", what).size();
    return r;
}

} // namespace

std::vector<std::uint64_t> decode_key_offsets(const std::vector<std::uint64_t>& offsets) {
    std::vector<std::uint64_t> out;
    out.reserve(offsets.size());
    std::uint64_t acc = 0;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        acc = (i == 0) ? offsets[i] : acc + offsets[i];
        out.push_back(acc);
    }
    return out;
}

std::int64_t DaemonClient::tip_height() {
    const auto j = parse_body(post("/json_rpc", rpc_request("get_block_count").dump()), "get_block_count");
    const auto count = field<std::int64_t>(rpc_result(j, "get_block_count"), "count", "get_block_count");
    return count - 1;
}

FetchedBlock DaemonClient::fetch_block(std::int64_t height) {
    const std::string what = "get_block(" + std::to_string(height) + ")";
    const auto j = parse_body(post("/json_rpc", rpc_request("get_block", {{"height", height}}).dump()), what);
    const auto& result = rpc_result(j, what);
    const auto header = field<json>(result, "block_header", what);

    FetchedBlock fb;
    fb.block.height = field<std::int64_t>(header, "height", what);
    fb.block.timestamp = field<std::int64_t>(header, "timestamp", what);
    if (fb.block.height != height)
        throw SchemaError(what + ": daemon returned height " + std::to_string(fb.block.height));

    std::vector<std::string> hashes{field<std::string>(result, "miner_tx_hash", what)};
    if (auto it = result.find("tx_hashes"); it != result.end() && !it->is_null())
        for (const auto& h : *it)
            hashes.push_back(h.get<std::string>());

    const json req{{"txs_hashes", hashes}, {"decode_as_json", true}};
    const auto txj = parse_body(post("/get_transactions", req.dump()), "get_transactions");
    if (auto st = txj.find("status"); st != txj.end() && *st != "OK")
        throw SchemaError("get_transactions: status " + st->dump());

    const auto txs = field<json>(txj, "txs", "get_transactions");
    std::map<std::string, const json*> by_hash;
    for (const auto& t : txs)
        by_hash[field<std::string>(t, "tx_hash", "get_transactions")] = &t;

    for (const auto& h : hashes) {
        auto it = by_hash.find(h);
        if (it == by_hash.end())
            throw SchemaError("get_transactions: tx " + h + " missing from response");
        const json& entry = *it->second;
        const auto tx = parse_body(field<std::string>(entry, "as_json", "tx " + h), "tx " + h);
        auto rec = record_from_tx_json(h, tx, fb.block);
        if (!fb.first_output_index && rec.outputs_created > 0) {
            if (auto oi = entry.find("output_indices"); oi != entry.end() && oi->is_array() && !oi->empty())
                fb.first_output_index = (*oi)[0].get<std::uint64_t>();
        }
        fb.records.push_back(std::move(rec));
    }
    return fb;
}

namespace {

void check_range(DaemonClient& client, std::int64_t from, std::int64_t to) {
    if (from < 0)
        throw RangeError("from-height must be non-negative");
    if (from > to)
        throw RangeError("from-height " + std::to_string(from) + " exceeds to-height " + std::to_string(to));
    const auto tip = client.tip_height();
    if (to > tip)
        throw RangeError("to-height " + std::to_string(to) + " is beyond the chain tip " + std::to_string(tip));
}

struct Checkpoint {
    std::int64_t from_height = 0;
    std::int64_t to_height = 0;
    std::int64_t next_height = 0;
    std::uint64_t bytes = 0;
    std::uint64_t records = 0;
};

std::optional<Checkpoint> load_checkpoint(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in)
        return std::nullopt;
    try {
        const auto j = json::parse(in);
        return Checkpoint{j.at("from_height"), j.at("to_height"), j.at("next_height"), j.at("bytes"),
                          j.at("records")};
    } catch (const json::exception&) {
        throw SchemaError("unreadable checkpoint file " + p.string());
    }
}

void save_checkpoint(const std::filesystem::path& p, const Checkpoint& c) {
    const auto tmp = std::filesystem::path(p.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << json{{"from_height", c.from_height}, {"to_height", c.to_height},
                    {"next_height", c.next_height}, {"bytes", c.bytes}, {"records", c.records}}
                   .dump()
            << '\n';
        if (!out)
            throw IOError("cannot write checkpoint " + tmp.string());
    }
    std::filesystem::rename(tmp, p);
}

} // namespace

FetchSummary fetch_range(DaemonClient& client, std::int64_t from_height, std::int64_t to_height,
                         const std::function<void(const RawTransactionRecord&)>& sink) {
    check_range(client, from_height, to_height);
    FetchSummary s;
    for (auto h = from_height; h <= to_height; ++h) {
        for (const auto& r : client.fetch_block(h).records) {
            sink(r);
            ++s.records;
        }
        ++s.blocks;
    }
    return s;
}

FetchSummary fetch_to_file(DaemonClient& client, std::int64_t from_height, std::int64_t to_height,
                           const std::filesystem::path& out, const FetchOptions& opts) {
    check_range(client, from_height, to_height);

    FetchSummary summary;
    Checkpoint cp{from_height, to_height, from_height, 0, 0};
    std::ofstream file;

    std::optional<Checkpoint> saved;
    if (opts.checkpoint)
        saved = load_checkpoint(*opts.checkpoint);
    if (saved && saved->from_height == from_height && saved->to_height == to_height &&
        std::filesystem::exists(out) && std::filesystem::file_size(out) >= saved->bytes && saved->bytes > 0) {
        cp = *saved;
        std::filesystem::resize_file(out, cp.bytes);
        file.open(out, std::ios::binary | std::ios::app);
        summary.resumed = true;
    }

    auto write_line = [&](const std::string& line) {
        file << line << '\n';
        cp.bytes += line.size() + 1;
    };

    std::int64_t since_checkpoint = 0;
    for (auto h = cp.next_height; h <= to_height; ++h) {
        auto block = client.fetch_block(h);
        if (!file.is_open()) {
            file.open(out, std::ios::binary | std::ios::trunc);
            if (!file)
                throw IOError("cannot write " + out.string());
            write_line(header_line({RecordFormat::raw, 1, block.first_output_index}));
        }
        for (const auto& r : block.records) {
            write_line(to_jsonl(r));
            ++cp.records;
            ++summary.records;
        }
        ++summary.blocks;
        cp.next_height = h + 1;
        if (opts.checkpoint && (++since_checkpoint >= opts.checkpoint_every || h == to_height)) {
            file.flush();
            if (!file)
                throw IOError("write failed for " + out.string());
            save_checkpoint(*opts.checkpoint, cp);
            since_checkpoint = 0;
        }
    }
    file.flush();
    if (!file)
        throw IOError("write failed for " + out.string());
    return summary;
}

} // namespace ringcorr::ingest
