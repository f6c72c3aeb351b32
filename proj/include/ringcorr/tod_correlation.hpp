#pragma once

#include "ringcorr/correlation.hpp"

#include <cstdint>
#include <span>

namespace ringcorr {

// Hour-of-day correlation with its underlying counts. Rows are ring-member
// hours; columns are member hours (ring_ring) or transaction hours (ring_tx).
struct HourSurface {
    SurfaceKind kind = SurfaceKind::ring_ring;
    Histogram2D joint;
    Histogram1D row_marginal;
    Histogram1D col_marginal;
    CorrelationSurface surface;

    double standard_error(std::size_t i, std::size_t j) const {
        return independence_standard_error(joint, row_marginal, col_marginal, i, j);
    }
};

// Cross-ring member hour pairs, same pairing as the age foreground.
HourSurface accumulate_ring_ring_hours(std::span<const Transaction> txs, std::size_t shards = 1);

// Same pairing as the age background, over hour stamps.
HourSurface accumulate_ring_ring_hours_background(std::span<const Transaction> txs,
                                                  std::uint64_t seed, std::size_t shards = 1);

// One (member hour, tx hour) fill per ring member; the tx-hour marginal is
// weighted by member count. Not symmetrized.
HourSurface accumulate_ring_tx_hours(std::span<const Transaction> txs, std::size_t shards = 1);

} // namespace ringcorr
