#pragma once

#include "ringcorr/ingest.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ringcorr::ingest {

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{250};
    std::chrono::milliseconds max_delay{8000};
    std::chrono::seconds timeout{30};
};

struct FetchedBlock {
    BlockRef block;
    // miner transaction first, then the block's transactions in order
    std::vector<RawTransactionRecord> records;
    // global index of the block's first output, when the daemon reports it
    std::optional<std::uint64_t> first_output_index;
};

// Minimal client for a monerod-style daemon: JSON-RPC `get_block_count` and
// `get_block` on /json_rpc, plus the /get_transactions lookup endpoint.
class DaemonClient {
public:
    explicit DaemonClient(std::string base_url, RetryPolicy retry = {});
    ~DaemonClient();
    DaemonClient(const DaemonClient&) = delete;
    DaemonClient& operator=(const DaemonClient&) = delete;

    // Height of the chain tip (block count - 1).
    std::int64_t tip_height();
    FetchedBlock fetch_block(std::int64_t height);

private:
    std::string post(const std::string& path, const std::string& body);

    struct Impl;
    std::unique_ptr<Impl> impl_;
    RetryPolicy retry_;
};

// Relative key offsets as stored on the wire -> absolute global indices.
std::vector<std::uint64_t> decode_key_offsets(const std::vector<std::uint64_t>& offsets);

struct FetchOptions {
    std::optional<std::filesystem::path> checkpoint;
    std::int64_t checkpoint_every = 1000; // blocks
};

struct FetchSummary {
    std::int64_t blocks = 0;
    std::uint64_t records = 0;
    bool resumed = false;
};

// Streams [from_height, to_height] through `sink` in block order. RangeError
// for an inverted range or one past the chain tip.
FetchSummary fetch_range(DaemonClient& client, std::int64_t from_height, std::int64_t to_height,
                         const std::function<void(const RawTransactionRecord&)>& sink);

// Writes a raw export for the range. With a checkpoint file the output is
// resumable: an interrupted run restarts at the recorded height after
// truncating the export to the recorded byte length.
FetchSummary fetch_to_file(DaemonClient& client, std::int64_t from_height, std::int64_t to_height,
                           const std::filesystem::path& out, const FetchOptions& opts = {});

} // namespace ringcorr::ingest
