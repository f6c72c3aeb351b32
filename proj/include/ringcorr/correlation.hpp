#pragma once

#include "ringcorr/chain_model.hpp"
#include "ringcorr/histogram.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace ringcorr {

enum class SurfaceKind { foreground, background, ratio, ring_ring, ring_tx };

std::string_view to_string(SurfaceKind k);
SurfaceKind parse_surface_kind(std::string_view s);

struct SurfaceMeta {
    std::optional<std::int64_t> from_height;
    std::optional<std::int64_t> to_height;
    std::optional<std::uint64_t> seed;
    nlohmann::json binning = nlohmann::json::object();

    friend bool operator==(const SurfaceMeta&, const SurfaceMeta&) = default;
};

// Per-bin C(t1, t2) = P(t1, t2) / (P(t1) P(t2)) with a validity mask. A bin
// is invalid exactly where a denominator probability is zero.
struct CorrelationSurface {
    SurfaceKind kind = SurfaceKind::foreground;
    std::vector<double> edges;  // rows
    std::vector<double> edges2; // columns
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;      // row-major
    std::vector<std::uint8_t> valid; // row-major, 0/1
    SurfaceMeta meta;

    double value(std::size_t i, std::size_t j) const { return values.at(i * cols + j); }
    bool is_valid(std::size_t i, std::size_t j) const { return valid.at(i * cols + j) != 0; }

    friend bool operator==(const CorrelationSurface&, const CorrelationSurface&) = default;
};

// Joint over member pairs plus the marginal accumulated over the same pair
// population.
struct PairHistograms {
    Histogram2D joint;
    Histogram1D marginal;

    explicit PairHistograms(const std::vector<double>& edges) : joint(edges), marginal(edges) {}
    PairHistograms(Histogram2D j, Histogram1D m) : joint(std::move(j)), marginal(std::move(m)) {}

    void merge(const PairHistograms& other) {
        joint.merge(other.joint);
        marginal.merge(other.marginal);
    }
    friend bool operator==(const PairHistograms&, const PairHistograms&) = default;
};

// Maps a ring member (in the context of its spending tx) to a bin.
using MemberBinFn = std::function<std::size_t(const Transaction&, const ResolvedMember&)>;

MemberBinFn age_bins(const Binning& binning);
MemberBinFn hour_bins();

// Fills joint/marginal from cross-ring member pairs. Every (a, b) fills the
// joint at (a, b) and (b, a); every member of both rings fills the marginal
// once per ring pair.
class PairAccumulator {
public:
    PairAccumulator(std::vector<double> edges, MemberBinFn bin_of);

    // All unordered ring pairs within `tx`; no-op below 2 rings.
    void add_foreground(const Transaction& tx);
    // Ring `ra` of `a` against ring `rb` of `b`.
    void add_ring_pair(const Transaction& a, std::size_t ra, const Transaction& b, std::size_t rb);

    const PairHistograms& histograms() const noexcept { return hist_; }
    PairHistograms take() && { return std::move(hist_); }

private:
    MemberBinFn bin_of_;
    PairHistograms hist_;
    std::vector<std::size_t> scratch_a_;
    std::vector<std::size_t> scratch_b_;
};

// Transactions with at least two rings, in block order.
std::vector<const Transaction*> eligible_for_pairs(std::span<const Transaction> txs);

// Splits `n` items into `shards` contiguous ranges [begin, end).
std::vector<std::pair<std::size_t, std::size_t>> shard_ranges(std::size_t n, std::size_t shards);

PairHistograms accumulate_foreground(std::span<const Transaction> txs, const Binning& binning,
                                     std::size_t shards = 1);
PairHistograms accumulate_foreground(std::span<const Transaction> txs,
                                     const std::vector<double>& edges, const MemberBinFn& bin_of,
                                     std::size_t shards = 1);

// Seeded derangement of {0..n-1} (Sattolo's algorithm yields a single cycle,
// so no element maps to itself). n must be >= 2.
std::vector<std::size_t> seeded_derangement(std::size_t n, std::uint64_t seed);

// Mixed-event background: eligible tx k is matched with tx sigma(k); for every
// ring pair (r, s) of tx k, ring r of tx k is paired with ring s mod R of
// tx sigma(k). InsufficientData below 2 eligible txs.
PairHistograms accumulate_background(std::span<const Transaction> txs, const Binning& binning,
                                     std::uint64_t seed, std::size_t shards = 1);
PairHistograms accumulate_background(std::span<const Transaction> txs,
                                     const std::vector<double>& edges, const MemberBinFn& bin_of,
                                     std::uint64_t seed, std::size_t shards = 1);

// Maximum-likelihood correlation of a joint against two marginals.
CorrelationSurface correlation(const Histogram2D& joint, const Histogram1D& m1,
                               const Histogram1D& m2, SurfaceKind kind = SurfaceKind::foreground);

enum class MarginalMode {
    shared,   // accumulated pair-participation marginal on both axes
    per_axis, // row and column sums of the joint
};
CorrelationSurface correlation(const PairHistograms& h, SurfaceKind kind,
                               MarginalMode mode = MarginalMode::shared);

// fg / bg where both are valid and bg > 0.
CorrelationSurface ratio(const CorrelationSurface& fg, const CorrelationSurface& bg);

// Standard error of an Eq.-style correlation cell under independence, from
// multinomial counts: sqrt(N q (1 - q)) / (N q), q = P1(i) P2(j).
double independence_standard_error(const Histogram2D& joint, const Histogram1D& m1,
                                   const Histogram1D& m2, std::size_t i, std::size_t j);

enum class DiagonalStatistic { foreground, ratio, log_ratio };

struct DiagonalProfile {
    std::vector<double> edges;
    std::vector<double> mean;
    std::vector<double> std_error;
    std::vector<std::size_t> valid_chunks; // chunks in which the bin was valid
    std::vector<std::uint8_t> valid;       // valid in >= 2 chunks
    std::vector<std::vector<double>> chunk_values; // [chunk][bin], NaN where invalid
    std::size_t chunk_count = 0;
    DiagonalStatistic statistic = DiagonalStatistic::foreground;
};

// Number of consecutive chunks covering the half-open height range.
std::size_t chunk_count(std::int64_t from_height, std::int64_t to_height_exclusive,
                        std::int64_t chunk_blocks);

struct DiagonalSummary {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t bins = 0;   // bins valid in every chunk and below the limit
    std::size_t chunks = 0;
};

// Per chunk, the weighted mean of the log diagonal over bins valid in every
// chunk (bin < bin_limit); then mean and std / sqrt(k) across the k chunks.
// Requires a ratio or log_ratio profile. InsufficientData when no bin
// qualifies or fewer than 2 chunks exist.
DiagonalSummary summarize_log_diagonal(const DiagonalProfile& profile, std::span<const double> weights,
                                       std::size_t bin_limit = static_cast<std::size_t>(-1));

// Partitions txs by height into chunks of `chunk_blocks` (anchored at the
// lowest height or at `origin_height`), computes the statistic's diagonal in
// each chunk, and reports mean and std / sqrt(k) across the k chunks where a
// bin is valid. Background pairing for ratio statistics is redrawn inside
// each chunk from (seed, chunk index). InsufficientData below 2 chunks.
DiagonalProfile chunked_diagonal(std::span<const Transaction> txs, const Binning& binning,
                                 std::int64_t chunk_blocks, DiagonalStatistic statistic,
                                 std::uint64_t seed = 0,
                                 std::optional<std::int64_t> origin_height = std::nullopt);

inline DiagonalProfile diagonal_with_errors(std::span<const Transaction> txs, const Binning& binning,
                                            std::int64_t chunk_blocks = 10000) {
    return chunked_diagonal(txs, binning, chunk_blocks, DiagonalStatistic::foreground);
}

} // namespace ringcorr
