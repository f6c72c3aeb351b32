#include "ringcorr/correlation.hpp"

#include "ringcorr/errors.hpp"
#include "ringcorr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <thread>

namespace ringcorr {

std::string_view to_string(SurfaceKind k) {
    switch (k) {
    case SurfaceKind::foreground: return "foreground";
    case SurfaceKind::background: return "background";
    case SurfaceKind::ratio: return "ratio";
    case SurfaceKind::ring_ring: return "ring_ring";
    case SurfaceKind::ring_tx: return "ring_tx";
    }
    return "foreground";
}

SurfaceKind parse_surface_kind(std::string_view s) {
    for (auto k : {SurfaceKind::foreground, SurfaceKind::background, SurfaceKind::ratio,
                   SurfaceKind::ring_ring, SurfaceKind::ring_tx})
        if (to_string(k) == s)
            return k;
    throw SchemaError("unknown surface kind '" + std::string(s) + "'");
}

MemberBinFn age_bins(const Binning& binning) {
    return [binning](const Transaction& tx, const ResolvedMember& m) {
        return binning.bin_of_age(age_at(tx, m));
    };
}

MemberBinFn hour_bins() {
    return [](const Transaction&, const ResolvedMember& m) {
        return static_cast<std::size_t>(hour_of(m.origin.timestamp));
    };
}

PairAccumulator::PairAccumulator(std::vector<double> edges, MemberBinFn bin_of)
    : bin_of_(std::move(bin_of)), hist_(edges) {}

void PairAccumulator::add_foreground(const Transaction& tx) {
    for (const auto& [r, s] : enumerate_ring_pairs(tx))
        add_ring_pair(tx, r, tx, s);
}

void PairAccumulator::add_ring_pair(const Transaction& a, std::size_t ra, const Transaction& b,
                                    std::size_t rb) {
    scratch_a_.clear();
    scratch_b_.clear();
    for (const auto& m : a.inputs.at(ra).members)
        scratch_a_.push_back(bin_of_(a, m));
    for (const auto& m : b.inputs.at(rb).members)
        scratch_b_.push_back(bin_of_(b, m));

    for (auto i : scratch_a_) {
        for (auto j : scratch_b_) {
            hist_.joint.fill(i, j);
            hist_.joint.fill(j, i);
        }
    }
    for (auto i : scratch_a_)
        hist_.marginal.fill(i);
    for (auto j : scratch_b_)
        hist_.marginal.fill(j);
}

std::vector<const Transaction*> eligible_for_pairs(std::span<const Transaction> txs) {
    std::vector<const Transaction*> out;
    for (const auto& tx : txs)
        if (tx.ring_count() >= 2)
            out.push_back(&tx);
    std::stable_sort(out.begin(), out.end(), [](const Transaction* a, const Transaction* b) {
        return a->block.height < b->block.height;
    });
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> shard_ranges(std::size_t n, std::size_t shards) {
    shards = std::max<std::size_t>(1, shards);
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    ranges.reserve(shards);
    for (std::size_t s = 0; s < shards; ++s)
        ranges.emplace_back(n * s / shards, n * (s + 1) / shards);
    return ranges;
}

namespace {

// Runs `body(accumulator, begin, end)` on each shard in its own thread and
// merges the shard results in shard order.
template <typename Body>
PairHistograms run_sharded(std::size_t n, std::size_t shards, const std::vector<double>& edges,
                           const MemberBinFn& bin_of, Body body) {
    const auto ranges = shard_ranges(n, shards);
    std::vector<PairAccumulator> accs;
    accs.reserve(ranges.size());
    for (std::size_t s = 0; s < ranges.size(); ++s)
        accs.emplace_back(edges, bin_of);

    if (ranges.size() == 1) {
        body(accs[0], ranges[0].first, ranges[0].second);
    } else {
        std::vector<std::jthread> workers;
        workers.reserve(ranges.size());
        for (std::size_t s = 0; s < ranges.size(); ++s)
            workers.emplace_back([&, s] { body(accs[s], ranges[s].first, ranges[s].second); });
    }

    PairHistograms out(edges);
    for (const auto& acc : accs)
        out.merge(acc.histograms());
    return out;
}

} // namespace

PairHistograms accumulate_foreground(std::span<const Transaction> txs,
                                     const std::vector<double>& edges, const MemberBinFn& bin_of,
                                     std::size_t shards) {
    return run_sharded(txs.size(), shards, edges, bin_of,
                       [&](PairAccumulator& acc, std::size_t begin, std::size_t end) {
                           for (std::size_t k = begin; k < end; ++k)
                               acc.add_foreground(txs[k]);
                       });
}

PairHistograms accumulate_foreground(std::span<const Transaction> txs, const Binning& binning,
                                     std::size_t shards) {
    return accumulate_foreground(txs, binning.edges(), age_bins(binning), shards);
}

std::vector<std::size_t> seeded_derangement(std::size_t n, std::uint64_t seed) {
    if (n < 2)
        throw InsufficientData("a derangement needs at least 2 elements, got " + std::to_string(n));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng = make_rng(seed, 0xB6u);
    for (std::size_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(perm[i], perm[j]);
    }
    return perm;
}

PairHistograms accumulate_background(std::span<const Transaction> txs,
                                     const std::vector<double>& edges, const MemberBinFn& bin_of,
                                     std::uint64_t seed, std::size_t shards) {
    const auto eligible = eligible_for_pairs(txs);
    if (eligible.size() < 2)
        throw InsufficientData("background needs at least 2 transactions with >= 2 rings, got " +
                               std::to_string(eligible.size()));
    // drawn once, before sharding, so the pairing is shard-independent
    const auto sigma = seeded_derangement(eligible.size(), seed);

    return run_sharded(eligible.size(), shards, edges, bin_of,
                       [&](PairAccumulator& acc, std::size_t begin, std::size_t end) {
                           for (std::size_t k = begin; k < end; ++k) {
                               const Transaction& self = *eligible[k];
                               const Transaction& other = *eligible[sigma[k]];
                               for (const auto& [r, s] : enumerate_ring_pairs(self))
                                   acc.add_ring_pair(self, r, other, s % other.ring_count());
                           }
                       });
}

PairHistograms accumulate_background(std::span<const Transaction> txs, const Binning& binning,
                                     std::uint64_t seed, std::size_t shards) {
    return accumulate_background(txs, binning.edges(), age_bins(binning), seed, shards);
}

CorrelationSurface correlation(const Histogram2D& joint, const Histogram1D& m1,
                               const Histogram1D& m2, SurfaceKind kind) {
    if (joint.edges() != m1.edges() || joint.edges2() != m2.edges())
        throw EdgeMismatch("joint and marginal edges differ");

    CorrelationSurface s;
    s.kind = kind;
    s.edges = joint.edges();
    s.edges2 = joint.edges2();
    s.rows = joint.rows();
    s.cols = joint.cols();
    s.values.assign(s.rows * s.cols, 0.0);
    s.valid.assign(s.rows * s.cols, 0);

    if (joint.total() == 0 || m1.total() == 0 || m2.total() == 0)
        return s;

    const double nj = static_cast<double>(joint.total());
    const double n1 = static_cast<double>(m1.total());
    const double n2 = static_cast<double>(m2.total());
    for (std::size_t i = 0; i < s.rows; ++i) {
        const double p1 = static_cast<double>(m1.count(i)) / n1;
        if (p1 == 0.0)
            continue;
        for (std::size_t j = 0; j < s.cols; ++j) {
            const double p2 = static_cast<double>(m2.count(j)) / n2;
            if (p2 == 0.0)
                continue;
            const double p12 = static_cast<double>(joint.at(i, j)) / nj;
            s.values[i * s.cols + j] = p12 / (p1 * p2);
            s.valid[i * s.cols + j] = 1;
        }
    }
    return s;
}

CorrelationSurface correlation(const PairHistograms& h, SurfaceKind kind, MarginalMode mode) {
    if (mode == MarginalMode::per_axis)
        return correlation(h.joint, h.joint.row_sums(), h.joint.col_sums(), kind);
    return correlation(h.joint, h.marginal, h.marginal, kind);
}

CorrelationSurface ratio(const CorrelationSurface& fg, const CorrelationSurface& bg) {
    if (fg.edges != bg.edges || fg.edges2 != bg.edges2 || fg.rows != bg.rows || fg.cols != bg.cols)
        throw EdgeMismatch("foreground and background surfaces have different edges");
    CorrelationSurface s = fg;
    s.kind = SurfaceKind::ratio;
    for (std::size_t k = 0; k < s.values.size(); ++k) {
        if (fg.valid[k] && bg.valid[k] && bg.values[k] > 0.0) {
            s.values[k] = fg.values[k] / bg.values[k];
            s.valid[k] = 1;
        } else {
            s.values[k] = 0.0;
            s.valid[k] = 0;
        }
    }
    return s;
}

double independence_standard_error(const Histogram2D& joint, const Histogram1D& m1,
                                   const Histogram1D& m2, std::size_t i, std::size_t j) {
    const double q = (static_cast<double>(m1.count(i)) / static_cast<double>(m1.total())) *
                     (static_cast<double>(m2.count(j)) / static_cast<double>(m2.total()));
    const double n = static_cast<double>(joint.total());
    if (q <= 0.0 || n <= 0.0)
        return std::numeric_limits<double>::infinity();
    return std::sqrt(n * q * (1.0 - q)) / (n * q);
}

std::size_t chunk_count(std::int64_t from_height, std::int64_t to_height_exclusive,
                        std::int64_t chunk_blocks) {
    if (chunk_blocks <= 0)
        throw DomainError("chunk size must be positive");
    if (to_height_exclusive <= from_height)
        return 0;
    const auto span = to_height_exclusive - from_height;
    return static_cast<std::size_t>((span + chunk_blocks - 1) / chunk_blocks);
}

DiagonalProfile chunked_diagonal(std::span<const Transaction> txs, const Binning& binning,
                                 std::int64_t chunk_blocks, DiagonalStatistic statistic,
                                 std::uint64_t seed, std::optional<std::int64_t> origin_height) {
    if (chunk_blocks <= 0)
        throw DomainError("chunk size must be positive");

    const auto eligible = eligible_for_pairs(txs);
    if (eligible.empty())
        throw InsufficientData("no transactions with >= 2 rings");
    const std::int64_t origin = origin_height.value_or(eligible.front()->block.height);

    std::map<std::int64_t, std::vector<Transaction>> chunks;
    for (const auto* tx : eligible) {
        const auto offset = tx->block.height - origin;
        if (offset < 0)
            continue;
        chunks[offset / chunk_blocks].push_back(*tx);
    }
    if (chunks.size() < 2)
        throw InsufficientData("diagonal error bars need transactions in at least 2 chunks, got " +
                               std::to_string(chunks.size()));

    const std::size_t n = binning.size();
    std::vector<std::vector<double>> per_bin(n);
    std::vector<std::vector<double>> chunk_values;
    for (const auto& [index, chunk_txs] : chunks) {
        auto& row = chunk_values.emplace_back(n, std::numeric_limits<double>::quiet_NaN());
        const auto fg = correlation(accumulate_foreground(chunk_txs, binning), SurfaceKind::foreground);
        CorrelationSurface s = fg;
        if (statistic != DiagonalStatistic::foreground) {
            if (chunk_txs.size() < 2)
                continue;
            const auto bg = correlation(
                accumulate_background(chunk_txs, binning, seed + static_cast<std::uint64_t>(index)),
                SurfaceKind::background);
            s = ratio(fg, bg);
        }
        for (std::size_t b = 0; b < n; ++b) {
            if (!s.is_valid(b, b))
                continue;
            double v = s.value(b, b);
            if (statistic == DiagonalStatistic::log_ratio) {
                if (!(v > 0.0))
                    continue;
                v = std::log(v);
            }
            per_bin[b].push_back(v);
            row[b] = v;
        }
    }

    DiagonalProfile p;
    p.edges = binning.edges();
    p.statistic = statistic;
    p.chunk_count = chunks.size();
    p.chunk_values = std::move(chunk_values);
    p.mean.assign(n, 0.0);
    p.std_error.assign(n, 0.0);
    p.valid_chunks.assign(n, 0);
    p.valid.assign(n, 0);
    for (std::size_t b = 0; b < n; ++b) {
        const auto& xs = per_bin[b];
        p.valid_chunks[b] = xs.size();
        if (xs.size() < 2)
            continue;
        const double k = static_cast<double>(xs.size());
        const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / k;
        double ss = 0.0;
        for (double x : xs)
            ss += (x - mean) * (x - mean);
        p.mean[b] = mean;
        p.std_error[b] = std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
        p.valid[b] = 1;
    }
    return p;
}

DiagonalSummary summarize_log_diagonal(const DiagonalProfile& profile, std::span<const double> weights,
                                       std::size_t bin_limit) {
    if (profile.statistic == DiagonalStatistic::foreground)
        throw DomainError("log diagonal summary needs a ratio profile");
    const auto& rows = profile.chunk_values;
    if (rows.size() < 2)
        throw InsufficientData("need at least 2 chunks");
    const std::size_t n = std::min({bin_limit, rows.front().size(), weights.size()});

    std::vector<std::size_t> bins;
    double total_weight = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
        const bool everywhere = std::all_of(rows.begin(), rows.end(), [&](const auto& r) {
            return profile.statistic == DiagonalStatistic::log_ratio ? std::isfinite(r[b]) : r[b] > 0.0;
        });
        if (everywhere && weights[b] > 0.0) {
            bins.push_back(b);
            total_weight += weights[b];
        }
    }
    if (bins.empty())
        throw InsufficientData("no diagonal bin is valid in every chunk");

    std::vector<double> per_chunk;
    for (const auto& r : rows) {
        double acc = 0.0;
        for (auto b : bins)
            acc += weights[b] * (profile.statistic == DiagonalStatistic::log_ratio ? r[b] : std::log(r[b]));
        per_chunk.push_back(acc / total_weight);
    }
    const double k = static_cast<double>(per_chunk.size());
    const double mean = std::accumulate(per_chunk.begin(), per_chunk.end(), 0.0) / k;
    double ss = 0.0;
    for (double x : per_chunk)
        ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (k - 1.0)) / std::sqrt(k), bins.size(), per_chunk.size()};
}

} // namespace ringcorr
