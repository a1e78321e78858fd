#pragma once

// Observed-information standard errors and confidence intervals for the
// likelihood fits. Coordinates pinned at a boundary are held fixed; the
// Hessian is taken over the remaining free coordinates, N first.

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "triplemark/core.hpp"
#include "triplemark/optimize.hpp"

namespace triplemark {

/// Two-sided normal critical value for a confidence level. The 95% level
/// uses the conventional 1.96.
inline double normal_critical_value(double level) {
    if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0,1)");
    if (level == 0.95) return 1.96;
    boost::math::normal_distribution<double> standard;
    return boost::math::quantile(standard, 0.5 + 0.5 * level);
}

struct StandardErrorResult {
    std::optional<double> se;
    std::string reason;
};

/// SE of coordinate 0 (N) from the inverse negated Hessian of `loglik` at
/// `mle`, restricted to the coordinates flagged in `free`.
inline StandardErrorResult n_standard_error(const optimize::Objective& loglik,
                                            const optimize::Vector& mle,
                                            const std::vector<bool>& free,
                                            const optimize::StepPolicy& policy = {}) {
    std::vector<std::size_t> active;
    for (std::size_t n = 0; n < mle.size(); ++n)
        if (free[n]) active.push_back(n);
    if (active.empty() || active.front() != 0) return {std::nullopt, "N is not a free parameter"};

    optimize::Vector sub(active.size());
    for (std::size_t a = 0; a < active.size(); ++a) sub[a] = mle[active[a]];
    optimize::Objective restricted = [&](std::span<const double> v) {
        optimize::Vector full = mle;
        for (std::size_t a = 0; a < active.size(); ++a) full[active[a]] = v[a];
        return loglik(full);
    };

    Eigen::MatrixXd hess;
    try {
        hess = optimize::numerical_hessian(restricted, sub, policy);
    } catch (const DifferentiationError& e) {
        return {std::nullopt, std::string("hessian failed: ") + e.what()};
    }
    const Eigen::MatrixXd info = -hess;
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success)
        return {std::nullopt, "observed information is not positive definite"};
    const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
    const double var = cov(0, 0);
    if (!(var > 0.0) || !std::isfinite(var)) return {std::nullopt, "non-positive variance for N"};
    return {std::sqrt(var), {}};
}

/// Fill SE, RASE and the symmetric interval N-hat +- z SE.
inline void attach_interval(FitReport& report, const StandardErrorResult& se, double z) {
    if (!se.se) {
        report.se_unavailable_reason = se.reason;
        report.diagnostics.push_back("standard error unavailable: " + se.reason);
        return;
    }
    report.se_n = *se.se;
    report.rase = *se.se / report.n_hat;
    report.aci_low = report.n_hat - z * *se.se;
    report.aci_high = report.n_hat + z * *se.se;
}

}  // namespace triplemark
