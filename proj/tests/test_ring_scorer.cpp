#include "ringcorr/errors.hpp"
#include "ringcorr/ring_scorer.hpp"

#include "support.hpp"

#include "doctest.h"

#include <cmath>
#include <numeric>
#include <random>

using namespace ringcorr;
using namespace ringcorr::scoring;
using testutil::make_tx;

namespace {

CorrelationSurface hour_surface(SurfaceKind kind, double fill) {
    CorrelationSurface s;
    s.kind = kind;
    s.rows = s.cols = 24;
    for (int i = 0; i <= 24; ++i)
        s.edges.push_back(i);
    s.edges2 = s.edges;
    s.values.assign(576, fill);
    s.valid.assign(576, 1);
    return s;
}

constexpr std::int64_t kMidnight = 1'500'000'000 - (1'500'000'000 % 86400);

// Ring of 11 members created at hours 0..10; tx at hour 15.
Transaction eleven_member_tx() {
    std::vector<std::int64_t> r;
    for (int m = 0; m < 11; ++m)
        r.push_back(kMidnight + m * 3600 + 60);
    return make_tx("t", 100, kMidnight + 86400 + 15 * 3600, {r});
}

} // namespace

TEST_CASE("neutral correlations give the identity") {
    const std::vector<double> c(7, 1.0);
    const auto m = build_update_matrix(c);
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 7; ++j)
            CHECK(m.at(i, j) == (i == j ? 1.0 : 0.0));
}

TEST_CASE("one boosted member") {
    std::vector<double> c(11, 1.0);
    c[0] = 1.1;
    const auto m = build_update_matrix(c);
    CHECK(m.at(0, 0) == 1.1);
    for (std::size_t i = 1; i < 11; ++i)
        CHECK(m.at(i, 0) == doctest::Approx(-0.01).epsilon(1e-13));

    const std::vector<double> prior(11, 1.0 / 11.0);
    const auto p = update_probabilities(m, prior);
    CHECK(p[0] == doctest::Approx(0.1).epsilon(1e-13));
    for (std::size_t i = 1; i < 11; ++i)
        CHECK(p[i] == doctest::Approx(0.09).epsilon(1e-13));
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-12);
}

TEST_CASE("columns sum to one for random correlations") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    std::uniform_int_distribution<std::size_t> size(2, 40);
    for (int t = 0; t < 1000; ++t) {
        std::vector<double> c(size(rng));
        for (auto& x : c)
            x = u(rng);
        const auto m = build_update_matrix(c);
        for (std::size_t j = 0; j < c.size(); ++j)
            REQUIRE(std::abs(m.column_sum(j) - 1.0) <= 1e-15);

        std::vector<double> prior(c.size());
        for (auto& x : prior)
            x = u(rng);
        const double total = std::accumulate(prior.begin(), prior.end(), 0.0);
        for (auto& x : prior)
            x /= total;
        const auto p = update_probabilities(m, prior);
        REQUIRE(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-12);
    }
}

TEST_CASE("update preconditions") {
    CHECK_THROWS_AS(build_update_matrix(std::vector<double>{1.2}), DomainError);
    const auto m = build_update_matrix(std::vector<double>{1.0, 1.0, 1.0});
    CHECK_THROWS_AS(update_probabilities(m, std::vector<double>{0.5, 0.5}), DimensionMismatch);
    const auto id = update_probabilities(m, std::vector<double>{0.2, 0.3, 0.5});
    CHECK(id == std::vector<double>{0.2, 0.3, 0.5});
}

TEST_CASE("clamp and renormalize") {
    auto r = clamp_normalize(std::vector<double>{0.25, 0.75});
    CHECK_FALSE(r.clamped);
    CHECK(r.p == std::vector<double>{0.25, 0.75});

    r = clamp_normalize(std::vector<double>{1.05, -0.05});
    CHECK(r.clamped);
    CHECK(r.p == std::vector<double>{1.0, 0.0});

    r = clamp_normalize(std::vector<double>{-0.1, -0.2, 1.3});
    CHECK(r.clamped);
    CHECK(r.p == std::vector<double>{0.0, 0.0, 1.0});

    CHECK_THROWS_AS(clamp_normalize(std::vector<double>{-0.5, -0.5}), DegenerateError);
}

TEST_CASE("flat surface leaves the prior unchanged") {
    const SurfaceLookup flat(hour_surface(SurfaceKind::ring_tx, 1.0));
    const auto scores = score_transaction(eleven_member_tx(), std::span(&flat, 1));
    REQUIRE(scores.size() == 1);
    for (double p : scores[0].posterior)
        CHECK(p == doctest::Approx(1.0 / 11.0).epsilon(1e-15));
    CHECK_FALSE(scores[0].clamped);
}

TEST_CASE("a single boosted cell moves one member to 0.1") {
    auto s = hour_surface(SurfaceKind::ring_tx, 1.0);
    s.values[3 * 24 + 15] = 1.1; // member hour 3, tx hour 15
    const SurfaceLookup lookup(s);
    const auto tx = eleven_member_tx();
    const auto scores = score_transaction(tx, std::span(&lookup, 1));
    const auto& p = scores[0].posterior;
    for (std::size_t i = 0; i < 11; ++i)
        CHECK(p[i] == doctest::Approx(i == 3 ? 0.1 : 0.09).epsilon(1e-13));
    CHECK(scores[0].max_column_sum_error <= 1e-15);
}

TEST_CASE("invalid bins are neutral") {
    auto s = hour_surface(SurfaceKind::ring_tx, 1.0);
    s.values[3 * 24 + 15] = 5.0;
    s.valid[3 * 24 + 15] = 0;
    const SurfaceLookup lookup(s);
    const auto tx = eleven_member_tx();
    const auto corr = lookup.lookup(tx, 0);
    CHECK_FALSE(corr.values[3].has_value());
    CHECK(corr.with_neutral_substitution()[3] == 1.0);
    const auto scores = score_transaction(tx, std::span(&lookup, 1));
    CHECK(scores[0].neutral_members == 1);
    for (double p : scores[0].posterior)
        CHECK(p == doctest::Approx(1.0 / 11.0).epsilon(1e-15));
}

TEST_CASE("clamping and the unclamped option") {
    auto s = hour_surface(SurfaceKind::ring_tx, 1.0);
    s.values[0 * 24 + 15] = 13.0; // pushes the other members negative
    const SurfaceLookup lookup(s);
    const auto tx = eleven_member_tx();

    const auto clamped = score_transaction(tx, std::span(&lookup, 1));
    CHECK(clamped[0].clamped);
    CHECK(clamped[0].negative_entries == 10);
    CHECK(clamped[0].posterior[0] == 1.0);

    ScoreOptions opts;
    opts.clamp = false;
    const auto raw = score_transaction(tx, std::span(&lookup, 1), opts);
    CHECK_FALSE(raw[0].clamped);
    CHECK(raw[0].posterior[1] < 0.0);
    CHECK(std::abs(std::accumulate(raw[0].posterior.begin(), raw[0].posterior.end(), 0.0) - 1.0) < 1e-12);
}

TEST_CASE("surfaces chain in order") {
    auto a = hour_surface(SurfaceKind::ring_tx, 1.0);
    a.values[3 * 24 + 15] = 1.1;
    auto b = hour_surface(SurfaceKind::ring_tx, 1.0);
    b.values[3 * 24 + 15] = 1.1;
    const std::vector<SurfaceLookup> both{SurfaceLookup(a), SurfaceLookup(b)};
    const auto p = score_transaction(eleven_member_tx(), both)[0].posterior;
    // second update: 1.1 * 0.1 on member 3
    CHECK(p[3] == doctest::Approx(0.11).epsilon(1e-13));
}

TEST_CASE("ring-ring lookup averages over the other rings") {
    auto s = hour_surface(SurfaceKind::ring_ring, 1.0);
    s.values[2 * 24 + 7] = 2.0;
    s.values[2 * 24 + 8] = 4.0;
    const SurfaceLookup lookup(s);
    const auto tx = make_tx("t", 1, kMidnight + 86400,
                            {{kMidnight + 2 * 3600, kMidnight + 5 * 3600}, {kMidnight + 7 * 3600, kMidnight + 8 * 3600}});
    const auto c = lookup.lookup(tx, 0);
    CHECK(*c.values[0] == 3.0);
    CHECK(*c.values[1] == 1.0);
}

TEST_CASE("hour surfaces must be 24 by 24") {
    CorrelationSurface s;
    s.kind = SurfaceKind::ring_tx;
    s.rows = s.cols = 2;
    s.edges = s.edges2 = {0, 1, 2};
    s.values.assign(4, 1.0);
    s.valid.assign(4, 1);
    CHECK_THROWS_AS(SurfaceLookup{s}, SchemaError);
}

TEST_CASE("gamma-likelihood prior favours ages the decoy law rarely picks") {
    // member 0 is one month old, the rest about one day
    std::vector<std::int64_t> r{kMidnight - 30 * 86400};
    for (int m = 1; m < 11; ++m)
        r.push_back(kMidnight - 86400 + m * 60);
    const auto tx = make_tx("t", 1, kMidnight, {r});
    ScoreOptions opts;
    opts.prior = PriorMode::gamma_likelihood;
    const auto prior = make_prior(tx, 0, opts);
    CHECK(std::abs(std::accumulate(prior.begin(), prior.end(), 0.0) - 1.0) < 1e-12);
    for (std::size_t i = 1; i < 11; ++i)
        CHECK(prior[0] > prior[i]);
}
