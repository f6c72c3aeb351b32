#include "ringcorr/chain_model.hpp"

#include <algorithm>

namespace ringcorr {

int hour_of(std::int64_t timestamp) {
    return static_cast<int>((timestamp / kSecondsPerHour) % 24);
}

std::int64_t age_at(const Transaction& tx, const ResolvedMember& member) {
    return std::max<std::int64_t>(0, tx.block.timestamp - member.origin.timestamp);
}

std::vector<RingAges> resolve_ages(const Transaction& tx) {
    std::vector<RingAges> out;
    out.reserve(tx.inputs.size());
    for (std::size_t r = 0; r < tx.inputs.size(); ++r) {
        RingAges ring{r, {}};
        ring.members.reserve(tx.inputs[r].members.size());
        for (const auto& m : tx.inputs[r].members)
            ring.members.push_back({age_at(tx, m), hour_of(m.origin.timestamp)});
        out.push_back(std::move(ring));
    }
    return out;
}

std::vector<RingPair> enumerate_ring_pairs(std::size_t ring_count) {
    std::vector<RingPair> pairs;
    if (ring_count < 2)
        return pairs;
    pairs.reserve(ring_count * (ring_count - 1) / 2);
    for (std::size_t i = 0; i < ring_count; ++i)
        for (std::size_t j = i + 1; j < ring_count; ++j)
            pairs.emplace_back(i, j);
    return pairs;
}

} // namespace ringcorr
