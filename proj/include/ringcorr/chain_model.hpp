#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ringcorr {

inline constexpr std::int64_t kSecondsPerHour = 3600;
inline constexpr std::int64_t kSecondsPerDay = 86400;
// Mainnet target block time since v2.
inline constexpr std::int64_t kMoneroBlockSeconds = 120;
// 10 decoys + 1 real on current mainnet.
inline constexpr std::size_t kDefaultRingSize = 11;

struct BlockRef {
    std::int64_t height = 0;
    std::int64_t timestamp = 0; // seconds since Unix epoch, UTC

    friend bool operator==(const BlockRef&, const BlockRef&) = default;
};

struct ResolvedMember {
    BlockRef origin;                          // block that created the referenced output
    std::optional<std::uint64_t> global_index; // in memory only; never serialized

    friend bool operator==(const ResolvedMember&, const ResolvedMember&) = default;
};

struct RingInput {
    std::vector<ResolvedMember> members;

    std::size_t size() const noexcept { return members.size(); }
    friend bool operator==(const RingInput&, const RingInput&) = default;
};

// A spend event. Coinbase transactions have no inputs.
struct Transaction {
    std::string tx_id;
    BlockRef block;
    std::vector<RingInput> inputs;

    std::size_t ring_count() const noexcept { return inputs.size(); }
    friend bool operator==(const Transaction&, const Transaction&) = default;
};

struct AgeSample {
    std::int64_t age_seconds = 0;
    int hour = 0;

    friend bool operator==(const AgeSample&, const AgeSample&) = default;
};

struct RingAges {
    std::size_t ring_index = 0;
    std::vector<AgeSample> members;
};

using RingPair = std::pair<std::size_t, std::size_t>;

// floor(timestamp / 3600) mod 24, UTC.
int hour_of(std::int64_t timestamp);

// Age of an output when spent by `tx`; miner timestamp skew clamps to 0.
std::int64_t age_at(const Transaction& tx, const ResolvedMember& member);

std::vector<RingAges> resolve_ages(const Transaction& tx);

// All unordered pairs (i, j), i < j, in lexicographic order.
std::vector<RingPair> enumerate_ring_pairs(std::size_t ring_count);
inline std::vector<RingPair> enumerate_ring_pairs(const Transaction& tx) {
    return enumerate_ring_pairs(tx.ring_count());
}

} // namespace ringcorr
