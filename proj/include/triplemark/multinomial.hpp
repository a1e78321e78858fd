#pragma once

// Multinomial likelihood of the incomplete 2x2x2 table with unknown index N,
// shared by every model that is expressed through cell probabilities. The
// constant sum of log x_ijk! is dropped throughout.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string_view>

#include "triplemark/core.hpp"

namespace triplemark {

/// How log(N!) is evaluated when N is treated as continuous.
enum class LogFactorial {
    exact,     // lgamma(N + 1)
    stirling,  // N log N - N
};

inline double log_factorial(double n, LogFactorial policy = LogFactorial::exact) {
    if (policy == LogFactorial::stirling) return n > 0.0 ? n * std::log(n) - n : 0.0;
    return std::lgamma(n + 1.0);
}

inline std::optional<LogFactorial> parse_log_factorial(std::string_view s) {
    if (s == "exact" || s == "lgamma") return LogFactorial::exact;
    if (s == "stirling") return LogFactorial::stirling;
    return std::nullopt;
}

namespace detail {

// x log p with the 0 log 0 = 0 convention; -inf when p == 0 < x.
inline double xlogp(double x, double p) {
    if (x == 0.0) return 0.0;
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    return x * std::log(p);
}

}  // namespace detail

/// log[N!/(N-x0)!] + sum x_ijk log p_ijk + (N - x0) log p000.
/// Throws DomainError when N < x0.
inline double multinomial_log_likelihood(double n, const CellDistribution::Probs& cells,
                                         const TripleRecordTable& table,
                                         LogFactorial policy = LogFactorial::exact) {
    const double x0 = static_cast<double>(table.total());
    if (!(n >= x0)) throw DomainError("population size N is below the observed total x0");
    double ll = log_factorial(n, policy) - log_factorial(n - x0, policy);
    for (std::size_t c = 0; c < kObservedCells; ++c)
        ll += detail::xlogp(static_cast<double>(table.counts()[c]), cells[c]);
    ll += detail::xlogp(n - x0, cells[kUnobservedIndex]);
    return ll;
}

/// G^2 deviance of a fitted cell distribution against the saturated fit on
/// the observed cells: cell probabilities x_ijk / x0 conditional on capture and
/// capture probability x0 / N-hat for the unconditional part. Always >= 0.
inline double g2_deviance(const TripleRecordTable& table, double n_hat,
                          const CellDistribution::Probs& cells) {
    const double x0 = static_cast<double>(table.total());
    const double captured = x0 / n_hat;
    double gap = 0.0;
    for (std::size_t c = 0; c < kObservedCells; ++c) {
        const double x = static_cast<double>(table.counts()[c]);
        if (x == 0.0) continue;
        gap += x * (std::log(x / x0 * captured) - std::log(cells[c]));
    }
    const double missed = n_hat - x0;
    if (missed > 0.0)
        gap += missed * (std::log1p(-captured) - std::log(cells[kUnobservedIndex]));
    return std::max(0.0, 2.0 * gap);  // negative only through rounding
}

}  // namespace triplemark
