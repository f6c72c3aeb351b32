#include "ringcorr/gamma_model.hpp"

#include "ringcorr/errors.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace ringcorr::gamma {

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 10000;

// P(a, x) by its power series; converges quickly for x < a + 1.
double lower_series(double a, double x) {
    double ap = a;
    double term = 1.0 / a;
    double sum = term;
    for (int n = 0; n < kMaxIter; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * kEps)
            break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Q(a, x) = 1 - P(a, x) by modified Lentz continued fraction, for x >= a + 1.
double upper_continued_fraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < kEps)
            break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

} // namespace

void GammaParams::validate() const {
    if (!(shape > 0.0) || !std::isfinite(shape))
        throw DomainError("gamma shape must be positive, got " + std::to_string(shape));
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw DomainError("gamma scale must be positive, got " + std::to_string(scale));
}

double regularized_lower_gamma(double a, double x) {
    if (x <= 0.0)
        return 0.0;
    if (std::isinf(x))
        return 1.0;
    if (x < a + 1.0)
        return lower_series(a, x);
    return 1.0 - upper_continued_fraction(a, x);
}

double log_pdf(const GammaParams& p, double x) {
    if (x <= 0.0)
        return -std::numeric_limits<double>::infinity();
    return (p.shape - 1.0) * std::log(x) - x / p.scale - std::lgamma(p.shape) -
           p.shape * std::log(p.scale);
}

double pdf(const GammaParams& p, double x) {
    if (x <= 0.0)
        return 0.0;
    return std::exp(log_pdf(p, x));
}

double cdf(const GammaParams& p, double x) {
    return regularized_lower_gamma(p.shape, x / p.scale);
}

double quantile(const GammaParams& p, double prob) {
    if (!(prob > 0.0 && prob < 1.0))
        throw DomainError("quantile probability must lie in (0, 1), got " + std::to_string(prob));
    p.validate();

    double lo = 0.0;
    double hi = std::max(1.0, p.mean());
    while (cdf(p, hi) < prob)
        hi *= 2.0;

    while (hi - lo > 1e-7 * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(p, mid) < prob)
            lo = mid;
        else
            hi = mid;
    }

    double x = 0.5 * (lo + hi);
    for (int i = 0; i < 50; ++i) {
        const double f = cdf(p, x) - prob;
        const double d = pdf(p, x);
        if (d <= 0.0)
            break;
        double next = x - f / d;
        // stay inside the bracket found by bisection
        if (next <= lo || next >= hi)
            next = 0.5 * (lo + hi);
        if (f < 0.0) lo = x; else hi = x;
        const double step = std::fabs(next - x);
        x = next;
        if (step < 1e-13 * std::max(1.0, x))
            break;
    }
    return x;
}

double sample_log_age(const GammaParams& p, Rng& rng) {
    std::gamma_distribution<double> dist(p.shape, p.scale);
    return dist(rng);
}

std::int64_t log_age_to_seconds(double log_age) {
    const double s = std::exp(log_age);
    if (!(s < 9.2e18))
        return std::numeric_limits<std::int64_t>::max();
    return static_cast<std::int64_t>(std::llround(s));
}

std::int64_t sample_decoy_age(const GammaParams& p, Rng& rng) {
    return log_age_to_seconds(sample_log_age(p, rng));
}

} // namespace ringcorr::gamma
