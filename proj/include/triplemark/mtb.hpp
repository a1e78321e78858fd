#pragma once

// Time plus behavioural-response model M_tb. First-capture probability f_l
// in list l, recapture probability c_l = phi * f_l for l = 2, 3. The
// likelihood depends on the table only through the time-ordered first
// capture and recapture counts.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

#include "triplemark/core.hpp"
#include "triplemark/mle.hpp"
#include "triplemark/multinomial.hpp"
#include "triplemark/optimize.hpp"

namespace triplemark::mtb {

struct MtbSufficientStats {
    std::int64_t u1 = 0, u2 = 0, u3 = 0;  // first captures per list
    std::int64_t m2 = 0, m3 = 0;          // recaptures
    std::int64_t M2 = 0, M3 = 0;          // captured at least once before list l
    std::int64_t x0 = 0;

    friend bool operator==(const MtbSufficientStats&, const MtbSufficientStats&) = default;
};

inline MtbSufficientStats mtb_stats(const TripleRecordTable& t) {
    MtbSufficientStats s;
    s.u1 = t.count(1, 1, 1) + t.count(1, 1, 0) + t.count(1, 0, 1) + t.count(1, 0, 0);
    s.u2 = t.count(0, 1, 1) + t.count(0, 1, 0);
    s.u3 = t.count(0, 0, 1);
    s.m2 = t.count(1, 1, 1) + t.count(1, 1, 0);
    s.m3 = t.count(1, 0, 1) + t.count(0, 1, 1) + t.count(1, 1, 1);
    s.M2 = s.u1;
    s.M3 = s.u1 + s.u2;
    s.x0 = s.u1 + s.u2 + s.u3;
    return s;
}

struct MtbParams {
    double n = 1.0;
    std::array<double, 3> f{0.5, 0.5, 0.5};
    double phi = 1.0;
};

inline void validate(const MtbParams& p) {
    if (!(p.n > 0.0) || !std::isfinite(p.n)) throw ConstraintViolation("N must be positive and finite");
    for (std::size_t l = 0; l < 3; ++l)
        if (!(p.f[l] > 0.0 && p.f[l] < 1.0))
            throw ConstraintViolation("f" + std::to_string(l + 1) + " must lie in (0,1)");
    if (!(p.phi > 0.0) || !std::isfinite(p.phi)) throw ConstraintViolation("phi must be positive");
    if (!(p.phi * p.f[1] < 1.0) || !(p.phi * p.f[2] < 1.0))
        throw DomainError("recapture probability phi * f_l must be below 1");
}

/// log L(N, f, phi) = log N!/(N-x0)! + u1 log f1 + (N-u1) log(1-f1) + (m2+m3) log phi
///   + sum_{l=2,3} (u_l+m_l) log f_l + (N-M_{l+1}) log(1-f_l) + (M_l-m_l) log(1-phi f_l),
/// with M_4 = x0.
inline double mtb_log_likelihood(const MtbParams& p, const MtbSufficientStats& s,
                                 LogFactorial policy = LogFactorial::exact) {
    validate(p);
    const double x0 = static_cast<double>(s.x0);
    if (p.n < x0) throw DomainError("population size N is below the observed total x0");
    using triplemark::detail::xlogp;
    const double n = p.n;
    double ll = log_factorial(n, policy) - log_factorial(n - x0, policy);
    ll += xlogp(static_cast<double>(s.u1), p.f[0]) + xlogp(n - static_cast<double>(s.u1), 1.0 - p.f[0]);
    ll += xlogp(static_cast<double>(s.m2 + s.m3), p.phi);
    const double u[2] = {static_cast<double>(s.u2), static_cast<double>(s.u3)};
    const double m[2] = {static_cast<double>(s.m2), static_cast<double>(s.m3)};
    const double prior[2] = {static_cast<double>(s.M2), static_cast<double>(s.M3)};
    const double after[2] = {static_cast<double>(s.M3), x0};
    for (int l = 0; l < 2; ++l) {
        const double f = p.f[static_cast<std::size_t>(l) + 1];
        ll += xlogp(u[l] + m[l], f) + xlogp(n - after[l], 1.0 - f) + xlogp(prior[l] - m[l], 1.0 - p.phi * f);
    }
    return ll;
}

/// Profile probabilities implied by M_tb (used for deviance comparisons).
inline CellDistribution mtb_cell_distribution(const MtbParams& p) {
    validate(p);
    const double f1 = p.f[0], f2 = p.f[1], f3 = p.f[2];
    const double c2 = p.phi * f2, c3 = p.phi * f3;
    CellDistribution::Probs probs{};
    probs[CaptureProfile(1, 1, 1).index()] = f1 * c2 * c3;
    probs[CaptureProfile(1, 1, 0).index()] = f1 * c2 * (1 - c3);
    probs[CaptureProfile(1, 0, 1).index()] = f1 * (1 - c2) * c3;
    probs[CaptureProfile(1, 0, 0).index()] = f1 * (1 - c2) * (1 - c3);
    probs[CaptureProfile(0, 1, 1).index()] = (1 - f1) * f2 * c3;
    probs[CaptureProfile(0, 1, 0).index()] = (1 - f1) * f2 * (1 - c3);
    probs[CaptureProfile(0, 0, 1).index()] = (1 - f1) * (1 - f2) * f3;
    probs[CaptureProfile(0, 0, 0).index()] = (1 - f1) * (1 - f2) * (1 - f3);
    return CellDistribution(probs);
}

struct UmleOptions {
    LogFactorial log_factorial = LogFactorial::exact;
    double ci_level = 0.95;
    bool compute_se = true;
    optimize::OptimizeOptions optimizer{};
    /// N-hat beyond this multiple of x0 is treated as a divergent UMLE.
    double divergence_ratio = 100.0;
};

namespace detail {

inline std::vector<optimize::Vector> start_fan(const MtbSufficientStats& s) {
    std::vector<optimize::Vector> starts;
    const double x0 = static_cast<double>(s.x0);
    auto clamp = [](double v) { return std::clamp(v, 0.02, 0.95); };
    for (double capture : {0.9, 0.7, 0.5, 0.8, 0.6}) {
        const double n = x0 / capture;
        const double f1 = clamp(static_cast<double>(s.u1) / n);
        const double f2 = clamp(static_cast<double>(s.u2) / (n - static_cast<double>(s.M2)));
        const double f3 = clamp(static_cast<double>(s.u3) / (n - static_cast<double>(s.M3)));
        const double c2 = s.M2 > 0 ? static_cast<double>(s.m2) / static_cast<double>(s.M2) : f2;
        const double c3 = s.M3 > 0 ? static_cast<double>(s.m3) / static_cast<double>(s.M3) : f3;
        double phi = 0.5 * (std::max(c2, 0.02) / f2 + std::max(c3, 0.02) / f3);
        phi = std::min(phi, 0.95 / std::max(f2, f3));
        starts.push_back({n, f1, f2, f3, phi});
    }
    return starts;
}

}  // namespace detail

/// Unconditional MLE over (N, f1, f2, f3, phi). Throws ConvergenceError when
/// the likelihood keeps increasing in N (no finite UMLE).
inline FitReport mtb_umle(const TripleRecordTable& table, const UmleOptions& opt = {}) {
    const auto s = mtb_stats(table);
    if (s.x0 < 1) throw InputError("no observed captures");
    const double x0 = static_cast<double>(s.x0);
    const double n_cap = x0 * opt.divergence_ratio * 100.0;

    optimize::Objective loglik = [&](std::span<const double> v) {
        if (v[0] > n_cap) return -std::numeric_limits<double>::infinity();
        MtbParams p{v[0], {v[1], v[2], v[3]}, v[4]};
        if (!(p.phi * std::max(p.f[1], p.f[2]) < 1.0)) return -std::numeric_limits<double>::infinity();
        try {
            return mtb_log_likelihood(p, s, opt.log_factorial);
        } catch (const Error&) {
            return -std::numeric_limits<double>::infinity();
        }
    };
    optimize::ParamTransform transform;
    transform.add_offset_log(x0).add_logit(3).add_log(1);
    const auto starts = detail::start_fan(s);
    const auto result = optimize::maximize(loglik, transform, starts, opt.optimizer);

    const double n_hat = result.argmax[0];
    if (n_hat > opt.divergence_ratio * x0)
        throw ConvergenceError("M_tb likelihood increases without bound in N (search reached N = " +
                               std::to_string(n_hat) + "); the UMLE does not exist for this table");

    FitReport r;
    r.model = ModelId::mtb;
    r.x0 = s.x0;
    r.n_hat = n_hat;
    const MtbParams best{n_hat, {result.argmax[1], result.argmax[2], result.argmax[3]}, result.argmax[4]};
    r.params = {{"N", n_hat}, {"f1", best.f[0]}, {"f2", best.f[1]}, {"f3", best.f[2]}, {"phi", best.phi}};
    r.converged = result.converged;
    r.n_evals = result.n_evals;
    r.n_free_params = 5;
    r.neg2loglik = -2.0 * result.value;
    r.deviance = g2_deviance(table, n_hat, mtb_cell_distribution(best).probs());
    r.aic = r.deviance + 2.0 * r.n_free_params;
    if (!result.converged) r.diagnostics.push_back("optimizer stopped: " + result.termination);
    if (opt.compute_se) {
        std::vector<bool> free(5, true);
        attach_interval(r, n_standard_error(loglik, result.argmax, free), normal_critical_value(opt.ci_level));
    }
    return r;
}

}  // namespace triplemark::mtb
