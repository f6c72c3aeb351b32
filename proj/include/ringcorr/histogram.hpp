#pragma once

#include "ringcorr/gamma_model.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ringcorr {

enum class BinningMode { linear, gamma_cdf };
enum class VariableSpace { age, log_age };

std::string_view to_string(BinningMode m);
std::string_view to_string(VariableSpace s);
BinningMode parse_binning_mode(std::string_view s);
VariableSpace parse_variable_space(std::string_view s);

inline constexpr double kSixteenDaysSeconds = 16.0 * 86400.0; // 1,382,400 s

struct BinningSpec {
    BinningMode mode = BinningMode::linear;
    std::size_t bin_count = 64;
    // linear mode: width in seconds (age space) or log-seconds (log_age space)
    double bin_width = kSixteenDaysSeconds;
    gamma::GammaParams gamma;
    VariableSpace space = VariableSpace::age;

    static BinningSpec linear_days(double days, std::size_t bins = 64) {
        return {BinningMode::linear, bins, days * 86400.0, {}, VariableSpace::age};
    }
    static BinningSpec gamma_cdf(std::size_t bins = 50, gamma::GammaParams g = {},
                                 VariableSpace space = VariableSpace::log_age) {
        return {BinningMode::gamma_cdf, bins, 0.0, g, space};
    }
};

// Edges at gamma quantiles k/n, k = 1..n-1, bracketed by the open ends of the
// support. In log_age space the ends are -inf/+inf; in age space the interior
// edges are exponentiated and the ends are 0/+inf.
std::vector<double> cdf_bin_edges(const gamma::GammaParams& params, std::size_t n,
                                  VariableSpace space = VariableSpace::log_age);

// Immutable bin geometry. Bin k covers [edges[k], edges[k+1]); values outside
// [edges.front(), edges.back()) land in the first or last bin, so the last
// bin of a linear layout doubles as the overflow bin.
class Binning {
public:
    Binning(std::vector<double> edges, VariableSpace space);

    static Binning from_spec(const BinningSpec& spec);
    // Integer bins [0,1), ..., [23,24) for hour stamps.
    static Binning hours();

    std::size_t size() const noexcept { return edges_.size() - 1; }
    const std::vector<double>& edges() const noexcept { return edges_; }
    VariableSpace space() const noexcept { return space_; }

    std::size_t bin_of_value(double v) const noexcept;
    std::size_t bin_of_age(std::int64_t age_seconds) const noexcept;

    friend bool operator==(const Binning&, const Binning&) = default;

private:
    std::vector<double> edges_;
    VariableSpace space_;
};

class Histogram1D {
public:
    Histogram1D() = default;
    explicit Histogram1D(std::vector<double> edges);

    void fill(std::size_t bin, std::uint64_t n = 1) {
        counts_[bin] += n;
        total_ += n;
    }
    // EdgeMismatch if the edges differ.
    void merge(const Histogram1D& other);

    std::size_t size() const noexcept { return counts_.size(); }
    const std::vector<double>& edges() const noexcept { return edges_; }
    const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
    std::uint64_t count(std::size_t bin) const { return counts_.at(bin); }
    std::uint64_t total() const noexcept { return total_; }

    static Histogram1D from_counts(std::vector<double> edges, std::vector<std::uint64_t> counts);

    friend bool operator==(const Histogram1D&, const Histogram1D&) = default;

private:
    std::vector<double> edges_;
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

// Row-major counts; rows follow `edges`, columns follow `edges2`.
class Histogram2D {
public:
    Histogram2D() = default;
    explicit Histogram2D(std::vector<double> edges) : Histogram2D(edges, edges) {}
    Histogram2D(std::vector<double> edges, std::vector<double> edges2);

    void fill(std::size_t i, std::size_t j, std::uint64_t n = 1) {
        counts_[i * cols_ + j] += n;
        total_ += n;
    }
    void merge(const Histogram2D& other);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    const std::vector<double>& edges() const noexcept { return edges_; }
    const std::vector<double>& edges2() const noexcept { return edges2_; }
    std::uint64_t at(std::size_t i, std::size_t j) const { return counts_.at(i * cols_ + j); }
    const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
    std::uint64_t total() const noexcept { return total_; }

    bool is_symmetric() const;
    Histogram1D row_sums() const;
    Histogram1D col_sums() const;

    static Histogram2D from_counts(std::vector<double> edges, std::vector<double> edges2,
                                   std::vector<std::uint64_t> counts);

    friend bool operator==(const Histogram2D&, const Histogram2D&) = default;

private:
    std::vector<double> edges_;
    std::vector<double> edges2_;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

} // namespace ringcorr
