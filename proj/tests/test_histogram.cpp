#include "ringcorr/errors.hpp"
#include "ringcorr/histogram.hpp"

#include "doctest.h"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <limits>

using namespace ringcorr;

TEST_CASE("sixteen-day linear layout") {
    const auto b = Binning::from_spec(BinningSpec::linear_days(16.0));
    REQUIRE(b.size() == 64);
    CHECK(b.edges()[1] == 1'382'400.0);
    CHECK(b.edges()[63] == 63 * 1'382'400.0);
    CHECK(std::isinf(b.edges().back()));
    CHECK(b.bin_of_age(0) == 0);
    CHECK(b.bin_of_age(1'382'399) == 0);
    CHECK(b.bin_of_age(1'382'400) == 1);
    CHECK(b.bin_of_age(63LL * 1'382'400) == 63);
    CHECK(b.bin_of_age(std::numeric_limits<std::int64_t>::max()) == 63);
    CHECK(BinningSpec{}.bin_width == kSixteenDaysSeconds);
}

TEST_CASE("linear layout in log-age space") {
    BinningSpec s{BinningMode::linear, 10, 2.0, {}, VariableSpace::log_age};
    const auto b = Binning::from_spec(s);
    CHECK(b.bin_of_age(1) == 0); // log 1 = 0
    CHECK(b.bin_of_age(static_cast<std::int64_t>(std::exp(2.5))) == 1);
    CHECK(b.bin_of_age(0) == 0);  // log 0 clamps into the first bin
}

TEST_CASE("gamma-cdf edges") {
    const gamma::GammaParams g;
    const auto two = cdf_bin_edges(g, 2);
    REQUIRE(two.size() == 3);
    CHECK(two[1] == doctest::Approx(gamma::quantile(g, 0.5)).epsilon(1e-14));
    CHECK(two.front() == -std::numeric_limits<double>::infinity());
    CHECK(two.back() == std::numeric_limits<double>::infinity());

    const auto age = cdf_bin_edges(g, 4, VariableSpace::age);
    CHECK(age.front() == 0.0);
    CHECK(age[2] == doctest::Approx(std::exp(gamma::quantile(g, 0.5))).epsilon(1e-12));

    const auto many = cdf_bin_edges(g, 10000);
    REQUIRE(many.size() == 10001);
    for (std::size_t i = 1; i < many.size(); ++i)
        REQUIRE(many[i - 1] < many[i]);

    CHECK_THROWS_AS(cdf_bin_edges(g, 1), DomainError);
}

TEST_CASE("gamma-cdf bins are equally likely") {
    const gamma::GammaParams g;
    const auto b = Binning::from_spec(BinningSpec::gamma_cdf(50));
    auto rng = make_rng(5);
    std::vector<double> counts(50, 0.0);
    const int n = 200000;
    for (int i = 0; i < n; ++i)
        counts[b.bin_of_value(gamma::sample_log_age(g, rng))] += 1.0;
    const double expected = n / 50.0;
    const double sd = std::sqrt(expected * (1.0 - 1.0 / 50.0));
    double chi2 = 0.0;
    for (double c : counts) {
        CHECK(std::abs(c - expected) < 4.0 * sd);
        chi2 += (c - expected) * (c - expected) / expected;
    }
    const boost::math::chi_squared dist(49);
    CHECK(boost::math::cdf(boost::math::complement(dist, chi2)) > 0.001);
}

TEST_CASE("binning validation") {
    CHECK_THROWS_AS(Binning({0.0, 1.0}, VariableSpace::age), BinningError);
    CHECK_THROWS_AS(Binning({0.0, 1.0, 1.0}, VariableSpace::age), BinningError);
    CHECK_THROWS_AS(Binning({0.0, 2.0, 1.0}, VariableSpace::age), BinningError);
    CHECK_THROWS_AS(Binning({0.0, std::nan(""), 1.0}, VariableSpace::age), BinningError);
    CHECK_THROWS_AS(Binning::from_spec(BinningSpec::linear_days(0.0)), BinningError);
    CHECK_THROWS_AS(Binning::from_spec(BinningSpec::linear_days(1.0, 1)), BinningError);
    CHECK_THROWS_AS(parse_binning_mode("quadratic"), BinningError);
    CHECK(parse_binning_mode("gamma-cdf") == BinningMode::gamma_cdf);
    CHECK(parse_variable_space("log-age") == VariableSpace::log_age);
    CHECK(to_string(BinningMode::linear) == "linear");
}

TEST_CASE("hour binning") {
    const auto h = Binning::hours();
    CHECK(h.size() == 24);
    for (int k = 0; k < 24; ++k)
        CHECK(h.bin_of_value(k + 0.5) == static_cast<std::size_t>(k));
    CHECK(h.bin_of_value(23.0) == 23);
}

TEST_CASE("values outside the edges land in the end bins") {
    const Binning b({0.0, 1.0, 2.0, 3.0}, VariableSpace::age);
    CHECK(b.bin_of_value(-5.0) == 0);
    CHECK(b.bin_of_value(0.0) == 0);
    CHECK(b.bin_of_value(0.999) == 0);
    CHECK(b.bin_of_value(1.0) == 1);
    CHECK(b.bin_of_value(2.999) == 2);
    CHECK(b.bin_of_value(3.0) == 2);
    CHECK(b.bin_of_value(1e9) == 2);
}

TEST_CASE("1D histogram fill and merge") {
    Histogram1D a({0, 1, 2, 3});
    a.fill(0);
    a.fill(2, 5);
    CHECK(a.total() == 6);
    CHECK(a.count(2) == 5);
    Histogram1D b({0, 1, 2, 3});
    b.fill(1, 3);
    a.merge(b);
    CHECK(a.counts() == std::vector<std::uint64_t>{1, 3, 5});
    CHECK(a.total() == 9);
    CHECK_THROWS_AS(a.merge(Histogram1D({0, 1, 2, 4})), EdgeMismatch);
    CHECK(Histogram1D::from_counts({0, 1, 2, 3}, {1, 3, 5}) == a);
    CHECK_THROWS_AS(Histogram1D::from_counts({0, 1, 2}, {1, 3, 5}), DimensionMismatch);
}

TEST_CASE("2D histogram") {
    Histogram2D h({0, 1, 2});
    h.fill(0, 1);
    CHECK_FALSE(h.is_symmetric());
    h.fill(1, 0);
    CHECK(h.is_symmetric());
    h.fill(1, 1, 4);
    CHECK(h.total() == 6);
    CHECK(h.row_sums().counts() == std::vector<std::uint64_t>{1, 5});
    CHECK(h.col_sums().counts() == std::vector<std::uint64_t>{1, 5});

    Histogram2D rect({0, 1, 2}, {0, 1, 2, 3});
    CHECK(rect.rows() == 2);
    CHECK(rect.cols() == 3);
    rect.fill(1, 2, 7);
    CHECK(rect.at(1, 2) == 7);
    CHECK_THROWS_AS(h.merge(rect), EdgeMismatch);

    auto copy = Histogram2D::from_counts({0, 1, 2}, {0, 1, 2}, h.counts());
    CHECK(copy == h);
    copy.merge(h);
    CHECK(copy.total() == 12);
}
