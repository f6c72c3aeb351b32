#include "ringcorr/histogram.hpp"

#include "ringcorr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ringcorr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_edges(const std::vector<double>& edges) {
    if (edges.size() < 3)
        throw BinningError("at least 2 bins required, got " +
                           std::to_string(edges.empty() ? 0 : edges.size() - 1));
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (std::isnan(edges[i]))
            throw BinningError("NaN edge at position " + std::to_string(i));
        if (i > 0 && !(edges[i] > edges[i - 1]))
            throw BinningError("edges not strictly increasing at position " + std::to_string(i));
    }
}

} // namespace

std::string_view to_string(BinningMode m) {
    return m == BinningMode::linear ? "linear" : "gamma-cdf";
}

std::string_view to_string(VariableSpace s) {
    return s == VariableSpace::age ? "age" : "log-age";
}

BinningMode parse_binning_mode(std::string_view s) {
    if (s == "linear") return BinningMode::linear;
    if (s == "gamma-cdf" || s == "gamma_cdf") return BinningMode::gamma_cdf;
    throw BinningError("unknown binning mode '" + std::string(s) + "'");
}

VariableSpace parse_variable_space(std::string_view s) {
    if (s == "age") return VariableSpace::age;
    if (s == "log-age" || s == "log_age") return VariableSpace::log_age;
    throw BinningError("unknown variable space '" + std::string(s) + "'");
}

std::vector<double> cdf_bin_edges(const gamma::GammaParams& params, std::size_t n,
                                  VariableSpace space) {
    if (n < 2)
        throw DomainError("gamma-cdf binning needs at least 2 bins, got " + std::to_string(n));
    params.validate();
    std::vector<double> edges;
    edges.reserve(n + 1);
    edges.push_back(space == VariableSpace::log_age ? -kInf : 0.0);
    for (std::size_t k = 1; k < n; ++k) {
        const double q = gamma::quantile(params, static_cast<double>(k) / static_cast<double>(n));
        edges.push_back(space == VariableSpace::log_age ? q : std::exp(q));
    }
    edges.push_back(kInf);
    return edges;
}

Binning::Binning(std::vector<double> edges, VariableSpace space)
    : edges_(std::move(edges)), space_(space) {
    check_edges(edges_);
}

Binning Binning::from_spec(const BinningSpec& spec) {
    if (spec.bin_count < 2)
        throw BinningError("bin_count must be >= 2, got " + std::to_string(spec.bin_count));
    if (spec.mode == BinningMode::gamma_cdf)
        return Binning(cdf_bin_edges(spec.gamma, spec.bin_count, spec.space), spec.space);

    if (!(spec.bin_width > 0.0) || !std::isfinite(spec.bin_width))
        throw BinningError("linear bin width must be positive");
    std::vector<double> edges;
    edges.reserve(spec.bin_count + 1);
    for (std::size_t k = 0; k < spec.bin_count; ++k)
        edges.push_back(static_cast<double>(k) * spec.bin_width);
    edges.push_back(kInf); // overflow
    return Binning(std::move(edges), spec.space);
}

Binning Binning::hours() {
    std::vector<double> edges(25);
    for (int h = 0; h <= 24; ++h)
        edges[h] = h;
    return Binning(std::move(edges), VariableSpace::age);
}

std::size_t Binning::bin_of_value(double v) const noexcept {
    const auto first = edges_.begin() + 1;
    const auto last = edges_.end() - 1;
    return static_cast<std::size_t>(std::upper_bound(first, last, v) - first);
}

std::size_t Binning::bin_of_age(std::int64_t age_seconds) const noexcept {
    const double a = static_cast<double>(age_seconds);
    return bin_of_value(space_ == VariableSpace::log_age ? std::log(a) : a);
}

Histogram1D::Histogram1D(std::vector<double> edges)
    : edges_(std::move(edges)), counts_(edges_.empty() ? 0 : edges_.size() - 1, 0) {}

void Histogram1D::merge(const Histogram1D& other) {
    if (edges_ != other.edges_)
        throw EdgeMismatch("cannot merge 1D histograms with different edges");
    for (std::size_t i = 0; i < counts_.size(); ++i)
        counts_[i] += other.counts_[i];
    total_ += other.total_;
}

Histogram1D Histogram1D::from_counts(std::vector<double> edges, std::vector<std::uint64_t> counts) {
    Histogram1D h(std::move(edges));
    if (counts.size() != h.counts_.size())
        throw DimensionMismatch("1D counts length does not match edges");
    h.counts_ = std::move(counts);
    for (auto c : h.counts_)
        h.total_ += c;
    return h;
}

Histogram2D::Histogram2D(std::vector<double> edges, std::vector<double> edges2)
    : edges_(std::move(edges)), edges2_(std::move(edges2)),
      rows_(edges_.empty() ? 0 : edges_.size() - 1),
      cols_(edges2_.empty() ? 0 : edges2_.size() - 1),
      counts_(rows_ * cols_, 0) {}

void Histogram2D::merge(const Histogram2D& other) {
    if (edges_ != other.edges_ || edges2_ != other.edges2_)
        throw EdgeMismatch("cannot merge 2D histograms with different edges");
    for (std::size_t i = 0; i < counts_.size(); ++i)
        counts_[i] += other.counts_[i];
    total_ += other.total_;
}

bool Histogram2D::is_symmetric() const {
    if (rows_ != cols_ || edges_ != edges2_)
        return false;
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = i + 1; j < cols_; ++j)
            if (counts_[i * cols_ + j] != counts_[j * cols_ + i])
                return false;
    return true;
}

Histogram1D Histogram2D::row_sums() const {
    std::vector<std::uint64_t> sums(rows_, 0);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j)
            sums[i] += counts_[i * cols_ + j];
    return Histogram1D::from_counts(edges_, std::move(sums));
}

Histogram1D Histogram2D::col_sums() const {
    std::vector<std::uint64_t> sums(cols_, 0);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j)
            sums[j] += counts_[i * cols_ + j];
    return Histogram1D::from_counts(edges2_, std::move(sums));
}

Histogram2D Histogram2D::from_counts(std::vector<double> edges, std::vector<double> edges2,
                                     std::vector<std::uint64_t> counts) {
    Histogram2D h(std::move(edges), std::move(edges2));
    if (counts.size() != h.counts_.size())
        throw DimensionMismatch("2D counts size does not match edges");
    h.counts_ = std::move(counts);
    for (auto c : h.counts_)
        h.total_ += c;
    return h;
}

} // namespace ringcorr
