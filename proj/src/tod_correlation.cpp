#include "ringcorr/tod_correlation.hpp"

#include "ringcorr/errors.hpp"

#include <thread>

namespace ringcorr {

namespace {

HourSurface from_pairs(PairHistograms h, SurfaceKind kind) {
    HourSurface out;
    out.kind = kind;
    out.surface = correlation(h.joint, h.marginal, h.marginal, kind);
    out.row_marginal = h.marginal;
    out.col_marginal = std::move(h.marginal);
    out.joint = std::move(h.joint);
    return out;
}

} // namespace

HourSurface accumulate_ring_ring_hours(std::span<const Transaction> txs, std::size_t shards) {
    if (eligible_for_pairs(txs).empty())
        throw InsufficientData("ring-ring hours need a transaction with >= 2 rings");
    const auto edges = Binning::hours().edges();
    return from_pairs(accumulate_foreground(txs, edges, hour_bins(), shards), SurfaceKind::ring_ring);
}

HourSurface accumulate_ring_ring_hours_background(std::span<const Transaction> txs,
                                                  std::uint64_t seed, std::size_t shards) {
    const auto edges = Binning::hours().edges();
    auto h = from_pairs(accumulate_background(txs, edges, hour_bins(), seed, shards),
                        SurfaceKind::ring_ring);
    h.surface.kind = SurfaceKind::background;
    h.surface.meta.seed = seed;
    return h;
}

HourSurface accumulate_ring_tx_hours(std::span<const Transaction> txs, std::size_t shards) {
    const auto edges = Binning::hours().edges();
    const auto ranges = shard_ranges(txs.size(), shards);
    std::vector<Histogram2D> parts(ranges.size(), Histogram2D(edges));

    auto body = [&](std::size_t s) {
        auto& joint = parts[s];
        for (std::size_t k = ranges[s].first; k < ranges[s].second; ++k) {
            const auto& tx = txs[k];
            const auto tx_hour = static_cast<std::size_t>(hour_of(tx.block.timestamp));
            for (const auto& ring : tx.inputs)
                for (const auto& m : ring.members)
                    joint.fill(static_cast<std::size_t>(hour_of(m.origin.timestamp)), tx_hour);
        }
    };
    if (ranges.size() == 1) {
        body(0);
    } else {
        std::vector<std::jthread> workers;
        for (std::size_t s = 0; s < ranges.size(); ++s)
            workers.emplace_back(body, s);
    }

    Histogram2D joint(edges);
    for (const auto& p : parts)
        joint.merge(p);
    if (joint.total() == 0)
        throw InsufficientData("ring-tx hours need at least one ring member");

    HourSurface out;
    out.kind = SurfaceKind::ring_tx;
    // one fill per member on each axis, so the marginals are the joint's sums
    out.row_marginal = joint.row_sums();
    out.col_marginal = joint.col_sums();
    out.surface = correlation(joint, out.row_marginal, out.col_marginal, SurfaceKind::ring_tx);
    out.joint = std::move(joint);
    return out;
}

} // namespace ringcorr
