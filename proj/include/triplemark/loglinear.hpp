#pragma once

// Log-linear models for the incomplete 2x2x2 table.
//
//   LLM-1: log m = u0 + u1 + u2 + u3 + u12 + u13 + u23     (no three-way term)
//   LLM-2: log m = u0 + u1 + u2 + u3 + u12 + u23           (u13 also zero)
//
// Terms use effect coding: main effect u_l enters as +u_l when captured in
// list l and -u_l otherwise; interactions are products of those signs. The
// seven observed counts are independent Poisson; m000 is extrapolated from
// the fitted terms and N-hat = x0 + m000.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "triplemark/core.hpp"
#include "triplemark/multinomial.hpp"

namespace triplemark::loglinear {

/// Exact non-negative ratio of integers.
struct Rational {
    __int128 num = 0;
    __int128 den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }

    /// Integer part (truncation toward zero; all values here are >= 0).
    long long truncated() const { return static_cast<long long>(num / den); }

    /// Round half away from zero.
    long long rounded() const { return static_cast<long long>((2 * num + den) / (2 * den)); }

    Rational plus(std::int64_t whole) const { return {num + static_cast<__int128>(whole) * den, den}; }
};

namespace detail {

inline std::int64_t cell(const TripleRecordTable& t, int i, int j, int k) { return t.count(i, j, k); }

inline void require_positive(const TripleRecordTable& t,
                             std::initializer_list<CaptureProfile> cells, const std::string& what) {
    std::string zeros;
    for (const auto& p : cells)
        if (t.count(p) == 0) zeros += (zeros.empty() ? "" : ", ") + std::string("x") + p.label();
    if (!zeros.empty()) throw EstimatorUndefined(what + " undefined: zero cell(s) " + zeros);
}

}  // namespace detail

/// x111 x001 x100 x010 / (x101 x011 x110), exactly.
inline Rational llm1_m000_exact(const TripleRecordTable& t) {
    detail::require_positive(t, {{1, 0, 1}, {0, 1, 1}, {1, 1, 0}}, "LLM-1 estimator");
    using detail::cell;
    return {static_cast<__int128>(cell(t, 1, 1, 1)) * cell(t, 0, 0, 1) * cell(t, 1, 0, 0) * cell(t, 0, 1, 0),
            static_cast<__int128>(cell(t, 1, 0, 1)) * cell(t, 0, 1, 1) * cell(t, 1, 1, 0)};
}

/// x001 x100 / x101, exactly.
inline Rational llm2_m000_exact(const TripleRecordTable& t) {
    detail::require_positive(t, {{1, 0, 1}}, "LLM-2 estimator");
    using detail::cell;
    return {static_cast<__int128>(cell(t, 0, 0, 1)) * cell(t, 1, 0, 0), cell(t, 1, 0, 1)};
}

inline double llm1_m000(const TripleRecordTable& t) { return llm1_m000_exact(t).value(); }
inline double llm2_m000(const TripleRecordTable& t) { return llm2_m000_exact(t).value(); }

inline Rational closed_form_m000_exact(const TripleRecordTable& t, ModelId model) {
    if (model == ModelId::llm1) return llm1_m000_exact(t);
    if (model == ModelId::llm2) return llm2_m000_exact(t);
    throw DomainError("closed-form m000 exists only for llm1 and llm2");
}

/// Design of a log-linear model over the seven observed cells plus the
/// extrapolation row for the 000 cell.
struct LoglinearSpec {
    ModelId model = ModelId::llm1;
    std::vector<std::string> terms;
    Eigen::MatrixXd design;      // 7 x terms, rows in the fixed cell order
    Eigen::RowVectorXd missing;  // row for the 000 cell

    int n_free_params() const { return static_cast<int>(terms.size()); }
};

inline LoglinearSpec make_spec(ModelId model) {
    if (model != ModelId::llm1 && model != ModelId::llm2)
        throw DomainError("log-linear spec requested for a non log-linear model");
    LoglinearSpec spec;
    spec.model = model;
    spec.terms = {"u0", "u1", "u2", "u3", "u12"};
    if (model == ModelId::llm1) spec.terms.push_back("u13");
    spec.terms.push_back("u23");

    auto row_for = [&](CaptureProfile p) {
        const double s1 = p.i ? 1.0 : -1.0, s2 = p.j ? 1.0 : -1.0, s3 = p.k ? 1.0 : -1.0;
        Eigen::RowVectorXd r(static_cast<Eigen::Index>(spec.terms.size()));
        Eigen::Index c = 0;
        r(c++) = 1.0;
        r(c++) = s1;
        r(c++) = s2;
        r(c++) = s3;
        r(c++) = s1 * s2;
        if (model == ModelId::llm1) r(c++) = s1 * s3;
        r(c++) = s2 * s3;
        return r;
    };
    spec.design.resize(kObservedCells, static_cast<Eigen::Index>(spec.terms.size()));
    for (std::size_t n = 0; n < kObservedCells; ++n)
        spec.design.row(static_cast<Eigen::Index>(n)) = row_for(profile_at(n));
    spec.missing = row_for(profile_at(kUnobservedIndex));
    return spec;
}

struct LoglinearFit {
    ModelId model = ModelId::llm1;
    std::vector<std::pair<std::string, double>> u_estimates;
    CellDistribution::Probs fitted_m{};  // expected counts, all 8 cells
    double m000 = 0.0;
    double n_hat = 0.0;
    double poisson_deviance = 0.0;  // against the 7-cell Poisson saturated fit
    double deviance = 0.0;          // G^2 under the shared multinomial convention
    double neg2loglik = 0.0;
    double aic = 0.0;
    int n_free_params = 0;
    int iterations = 0;
};

struct IrlsOptions {
    int max_iter = 100;
    double tolerance = 1e-10;  // relative change in deviance
};

namespace detail {

inline double poisson_deviance(const Eigen::VectorXd& x, const Eigen::VectorXd& mu) {
    double d = 0.0;
    for (Eigen::Index n = 0; n < x.size(); ++n) {
        if (x(n) > 0.0) d += x(n) * std::log(x(n) / mu(n));
        d -= x(n) - mu(n);
    }
    return 2.0 * d;
}

}  // namespace detail

/// Poisson maximum likelihood on the seven observed cells by iteratively
/// reweighted least squares on the log link.
inline LoglinearFit llm_fit(const TripleRecordTable& table, const LoglinearSpec& spec,
                            const IrlsOptions& opt = {}, LogFactorial policy = LogFactorial::exact) {
    const Eigen::MatrixXd& X = spec.design;
    const auto k = X.cols();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < k) throw DesignError("log-linear design matrix is rank deficient");
    if (table.total() == 0) throw InputError("no observed captures");

    Eigen::VectorXd x(static_cast<Eigen::Index>(kObservedCells));
    for (std::size_t n = 0; n < kObservedCells; ++n) x(static_cast<Eigen::Index>(n)) = static_cast<double>(table.counts()[n]);

    Eigen::VectorXd beta = qr.solve((x.array() + 0.5).log().matrix());
    Eigen::VectorXd mu = (X * beta).array().exp();
    double dev = detail::poisson_deviance(x, mu);
    bool converged = false;
    int iter = 0;
    for (; iter < opt.max_iter && !converged; ++iter) {
        const Eigen::VectorXd eta = X * beta;
        const Eigen::VectorXd z = eta.array() + (x - mu).array() / mu.array();
        const Eigen::MatrixXd xtw = X.transpose() * mu.asDiagonal();
        beta = (xtw * X).ldlt().solve(xtw * z);
        mu = (X * beta).array().exp();
        const double next = detail::poisson_deviance(x, mu);
        if (!std::isfinite(next)) break;
        converged = std::abs(next - dev) / (std::abs(next) + 0.1) < opt.tolerance;
        dev = next;
    }
    if (!converged) {
        const double grad = (X.transpose() * (x - mu)).norm();
        throw ConvergenceError("IRLS did not converge after " + std::to_string(iter) +
                               " iterations (score norm " + std::to_string(grad) + ")");
    }
    const double x0 = x.sum();
    for (Eigen::Index n = 0; n < x.size(); ++n)
        if (x(n) == 0.0 && mu(n) < 1e-8 * x0)
            throw ConvergenceError("fitted mean of zero cell " + profile_at(static_cast<std::size_t>(n)).label() +
                                   " collapses to 0; the Poisson MLE is on the boundary");

    LoglinearFit fit;
    fit.model = spec.model;
    fit.iterations = iter;
    for (Eigen::Index c = 0; c < k; ++c) fit.u_estimates.emplace_back(spec.terms[static_cast<std::size_t>(c)], beta(c));
    for (std::size_t n = 0; n < kObservedCells; ++n) fit.fitted_m[n] = mu(static_cast<Eigen::Index>(n));
    fit.m000 = std::exp(spec.missing.dot(beta));
    if (!std::isfinite(fit.m000)) throw ConvergenceError("extrapolated m000 is not finite");
    fit.fitted_m[kUnobservedIndex] = fit.m000;
    fit.n_hat = x0 + fit.m000;
    fit.poisson_deviance = dev;

    CellDistribution::Probs probs{};
    for (std::size_t n = 0; n < kAllCells; ++n) probs[n] = fit.fitted_m[n] / fit.n_hat;
    fit.neg2loglik = -2.0 * multinomial_log_likelihood(fit.n_hat, probs, table, policy);
    fit.deviance = g2_deviance(table, fit.n_hat, probs);
    fit.n_free_params = spec.n_free_params();
    fit.aic = fit.deviance + 2.0 * fit.n_free_params;
    return fit;
}

inline LoglinearFit llm_fit(const TripleRecordTable& table, ModelId model) {
    return llm_fit(table, make_spec(model));
}

/// Delta-method variance of m000-hat from its closed form: m000^2 times the
/// sum of reciprocal counts appearing in the ratio.
inline double llm_variance_m000(const TripleRecordTable& t, ModelId model) {
    const double m = closed_form_m000_exact(t, model).value();
    std::vector<CaptureProfile> cells;
    if (model == ModelId::llm1)
        cells = {{1, 1, 1}, {0, 0, 1}, {1, 0, 0}, {0, 1, 0}, {1, 0, 1}, {0, 1, 1}, {1, 1, 0}};
    else
        cells = {{0, 0, 1}, {1, 0, 0}, {1, 0, 1}};
    double s = 0.0;
    for (const auto& p : cells) {
        const auto c = t.count(p);
        if (c == 0) throw EstimatorUndefined("variance undefined: zero cell x" + p.label());
        s += 1.0 / static_cast<double>(c);
    }
    return m * m * s;
}

}  // namespace triplemark::loglinear
