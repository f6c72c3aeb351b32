#pragma once

#include "ringcorr/chain_model.hpp"
#include "ringcorr/correlation.hpp"
#include "ringcorr/gamma_model.hpp"

#include <optional>
#include <span>
#include <vector>

namespace ringcorr::scoring {

// Correlation value per ring member; nullopt where the surface had no valid
// bin for the member.
struct MemberCorrelations {
    std::vector<std::optional<double>> values;

    std::size_t size() const noexcept { return values.size(); }
    // Absent lookups become 1, the no-information value.
    std::vector<double> with_neutral_substitution() const;
};

// Dense n x n matrix, row-major.
class UpdateMatrix {
public:
    explicit UpdateMatrix(std::size_t n) : n_(n), m_(n * n, 0.0) {}

    std::size_t size() const noexcept { return n_; }
    double& at(std::size_t i, std::size_t j) { return m_[i * n_ + j]; }
    double at(std::size_t i, std::size_t j) const { return m_[i * n_ + j]; }
    double column_sum(std::size_t j) const;

private:
    std::size_t n_;
    std::vector<double> m_;
};

// M[j][j] = c_j, M[i][j] = (1 - c_j) / (n - 1) for i != j. The gain on member
// j is paid for by spreading its complement evenly over the other members, so
// every column sums to 1. DomainError for n < 2.
UpdateMatrix build_update_matrix(std::span<const double> c);

// p' = M p, without clamping. DimensionMismatch on size disagreement.
std::vector<double> update_probabilities(const UpdateMatrix& m, std::span<const double> prior);

struct ClampResult {
    std::vector<double> p;
    bool clamped = false;
};

// Zeroes negative entries and renormalizes. DegenerateError if nothing
// positive remains.
ClampResult clamp_normalize(std::span<const double> p);

enum class PriorMode { uniform, gamma_likelihood };

struct RingScore {
    std::vector<double> prior;
    std::vector<double> raw_posterior; // unclamped output of the final update
    std::vector<double> posterior;
    bool clamped = false;
    // condition report for the applied matrices
    double max_column_sum_error = 0.0;
    std::size_t negative_entries = 0;
    std::size_t neutral_members = 0; // lookups that fell back to c = 1
};

// Reads per-member correlations out of a surface. ring_tx surfaces key on
// (member hour, tx hour); ring_ring surfaces average C(member hour, other
// hour) over members of the transaction's other rings; age surfaces
// (foreground/background/ratio) do the same over age bins.
class SurfaceLookup {
public:
    explicit SurfaceLookup(CorrelationSurface surface);

    MemberCorrelations lookup(const Transaction& tx, std::size_t ring) const;
    const CorrelationSurface& surface() const noexcept { return surface_; }

private:
    std::optional<double> cell(std::size_t i, std::size_t j) const;
    std::size_t age_bin(const Transaction& tx, const ResolvedMember& m) const;

    CorrelationSurface surface_;
    std::optional<Binning> age_binning_;
};

struct ScoreOptions {
    PriorMode prior = PriorMode::uniform;
    bool clamp = true;
    gamma::GammaParams gamma; // only for PriorMode::gamma_likelihood
};

std::vector<double> make_prior(const Transaction& tx, std::size_t ring, const ScoreOptions& opts);

// One score per ring. Surfaces are applied in order, each posterior feeding
// the next update as its prior.
std::vector<RingScore> score_transaction(const Transaction& tx,
                                         std::span<const SurfaceLookup> surfaces,
                                         const ScoreOptions& opts = {});

} // namespace ringcorr::scoring
