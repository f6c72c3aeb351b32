#include "ringcorr/ring_scorer.hpp"

#include "ringcorr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ringcorr::scoring {

std::vector<double> MemberCorrelations::with_neutral_substitution() const {
    std::vector<double> c;
    c.reserve(values.size());
    for (const auto& v : values)
        c.push_back(v.value_or(1.0));
    return c;
}

// Neumaier summation, so the check reflects the entries and not the adder.
double UpdateMatrix::column_sum(std::size_t j) const {
    double s = 0.0;
    double comp = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        const double x = at(i, j);
        const double t = s + x;
        comp += std::fabs(s) >= std::fabs(x) ? (s - t) + x : (x - t) + s;
        s = t;
    }
    return s + comp;
}

UpdateMatrix build_update_matrix(std::span<const double> c) {
    const std::size_t n = c.size();
    if (n < 2)
        throw DomainError("update matrix needs a ring of at least 2 members, got " + std::to_string(n));
    UpdateMatrix m(n);
    const double spread = 1.0 / static_cast<double>(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
        const double off = (1.0 - c[j]) * spread;
        for (std::size_t i = 0; i < n; ++i)
            m.at(i, j) = (i == j) ? c[j] : off;
    }
    return m;
}

std::vector<double> update_probabilities(const UpdateMatrix& m, std::span<const double> prior) {
    const std::size_t n = m.size();
    if (prior.size() != n)
        throw DimensionMismatch("matrix is " + std::to_string(n) + "x" + std::to_string(n) +
                                " but prior has " + std::to_string(prior.size()) + " entries");
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            s += m.at(i, j) * prior[j];
        out[i] = s;
    }
    return out;
}

ClampResult clamp_normalize(std::span<const double> p) {
    ClampResult r;
    r.p.assign(p.begin(), p.end());
    double sum = 0.0;
    for (auto& x : r.p) {
        if (x < 0.0) {
            x = 0.0;
            r.clamped = true;
        }
        sum += x;
    }
    if (!(sum > 0.0))
        throw DegenerateError("no positive probability mass left after clamping");
    if (r.clamped)
        for (auto& x : r.p)
            x /= sum;
    return r;
}

SurfaceLookup::SurfaceLookup(CorrelationSurface surface) : surface_(std::move(surface)) {
    if (surface_.kind == SurfaceKind::foreground || surface_.kind == SurfaceKind::background ||
        surface_.kind == SurfaceKind::ratio) {
        auto space = VariableSpace::age;
        if (auto it = surface_.meta.binning.find("space"); it != surface_.meta.binning.end())
            space = parse_variable_space(it->get<std::string>());
        age_binning_.emplace(surface_.edges, space);
    } else if (surface_.rows != 24 || surface_.cols != 24) {
        throw SchemaError("hour surfaces must be 24x24");
    }
}

std::optional<double> SurfaceLookup::cell(std::size_t i, std::size_t j) const {
    if (i >= surface_.rows || j >= surface_.cols || !surface_.is_valid(i, j))
        return std::nullopt;
    const double v = surface_.value(i, j);
    if (!(v > 0.0) || !std::isfinite(v))
        return std::nullopt;
    return v;
}

std::size_t SurfaceLookup::age_bin(const Transaction& tx, const ResolvedMember& m) const {
    return age_binning_->bin_of_age(age_at(tx, m));
}

MemberCorrelations SurfaceLookup::lookup(const Transaction& tx, std::size_t ring) const {
    const auto& members = tx.inputs.at(ring).members;
    MemberCorrelations out;
    out.values.reserve(members.size());

    if (surface_.kind == SurfaceKind::ring_tx) {
        const auto tx_hour = static_cast<std::size_t>(hour_of(tx.block.timestamp));
        for (const auto& m : members)
            out.values.push_back(cell(static_cast<std::size_t>(hour_of(m.origin.timestamp)), tx_hour));
        return out;
    }

    const bool by_hour = surface_.kind == SurfaceKind::ring_ring;
    auto key = [&](const ResolvedMember& m) {
        return by_hour ? static_cast<std::size_t>(hour_of(m.origin.timestamp)) : age_bin(tx, m);
    };
    for (const auto& m : members) {
        const auto ki = key(m);
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t r = 0; r < tx.inputs.size(); ++r) {
            if (r == ring)
                continue;
            for (const auto& other : tx.inputs[r].members) {
                if (auto v = cell(ki, key(other))) {
                    sum += *v;
                    ++n;
                }
            }
        }
        out.values.push_back(n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt);
    }
    return out;
}

std::vector<double> make_prior(const Transaction& tx, std::size_t ring, const ScoreOptions& opts) {
    const auto& members = tx.inputs.at(ring).members;
    const std::size_t n = members.size();
    std::vector<double> prior(n, 1.0 / static_cast<double>(n));
    if (opts.prior == PriorMode::uniform || n == 0)
        return prior;

    // Real member flat in log-age, decoys from the gamma law: the odds that
    // member i is real scale as 1 / f_decoy(log age_i).
    constexpr double kFloor = 1e-12;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto age = std::max<std::int64_t>(1, age_at(tx, members[i]));
        const double f = std::max(kFloor, gamma::pdf(opts.gamma, std::log(static_cast<double>(age))));
        prior[i] = 1.0 / f;
        sum += prior[i];
    }
    for (auto& p : prior)
        p /= sum;
    return prior;
}

std::vector<RingScore> score_transaction(const Transaction& tx,
                                         std::span<const SurfaceLookup> surfaces,
                                         const ScoreOptions& opts) {
    std::vector<RingScore> scores;
    scores.reserve(tx.inputs.size());
    for (std::size_t r = 0; r < tx.inputs.size(); ++r) {
        RingScore s;
        s.prior = make_prior(tx, r, opts);
        s.posterior = s.prior;
        s.raw_posterior = s.prior;
        if (s.prior.size() < 2) {
            scores.push_back(std::move(s));
            continue;
        }
        for (const auto& surface : surfaces) {
            const auto corr = surface.lookup(tx, r);
            const auto c = corr.with_neutral_substitution();
            s.neutral_members += static_cast<std::size_t>(
                std::count(corr.values.begin(), corr.values.end(), std::nullopt));
            if (std::all_of(c.begin(), c.end(), [](double v) { return v == 1.0; }))
                continue; // identity update
            const auto m = build_update_matrix(c);
            for (std::size_t j = 0; j < m.size(); ++j)
                s.max_column_sum_error = std::max(s.max_column_sum_error, std::fabs(m.column_sum(j) - 1.0));
            s.raw_posterior = update_probabilities(m, s.posterior);
            s.negative_entries = static_cast<std::size_t>(std::count_if(
                s.raw_posterior.begin(), s.raw_posterior.end(), [](double v) { return v < 0.0; }));
            if (opts.clamp) {
                auto clamped = clamp_normalize(s.raw_posterior);
                s.clamped = s.clamped || clamped.clamped;
                s.posterior = std::move(clamped.p);
            } else {
                s.posterior = s.raw_posterior;
            }
        }
        scores.push_back(std::move(s));
    }
    return scores;
}

} // namespace ringcorr::scoring
