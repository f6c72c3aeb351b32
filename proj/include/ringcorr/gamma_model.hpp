#pragma once

#include "ringcorr/rng.hpp"

#include <cstdint>

namespace ringcorr::gamma {

// Decoy-age law used by Monero's wallet output selection. The variable is the
// natural log of the output age in seconds.
struct GammaParams {
    double shape = 19.28;
    double scale = 1.0 / 1.61;

    double mean() const noexcept { return shape * scale; }
    double mode() const noexcept { return shape > 1.0 ? (shape - 1.0) * scale : 0.0; }

    // Throws DomainError unless shape > 0 and scale > 0.
    void validate() const;

    friend bool operator==(const GammaParams&, const GammaParams&) = default;
};

double pdf(const GammaParams& p, double x);
double log_pdf(const GammaParams& p, double x);

// Regularized lower incomplete gamma P(shape, x / scale).
double cdf(const GammaParams& p, double x);

// Inverse of cdf for p in (0, 1); DomainError otherwise. Bracketed bisection
// followed by Newton polish, accurate to 1e-10 absolute in x.
double quantile(const GammaParams& p, double prob);

// One draw from the gamma law, in log-seconds.
double sample_log_age(const GammaParams& p, Rng& rng);

// round(exp(x)) for a log-age x, saturating at INT64_MAX.
std::int64_t log_age_to_seconds(double log_age);

// round(exp(x)) with x ~ Gamma(shape, scale).
std::int64_t sample_decoy_age(const GammaParams& p, Rng& rng);

// Regularized lower incomplete gamma function P(a, x).
double regularized_lower_gamma(double a, double x);

} // namespace ringcorr::gamma
