#pragma once

// Fit orchestration across the six models and the model-comparison report.
//
// Deviance is G^2 against the saturated fit on the observed cells (see
// g2_deviance); raw -2 log L under the dropped-constant convention is kept
// alongside. AIC = deviance + 2 * free parameters.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "triplemark/core.hpp"
#include "triplemark/loglinear.hpp"
#include "triplemark/mle.hpp"
#include "triplemark/mtb.hpp"
#include "triplemark/multinomial.hpp"
#include "triplemark/optimize.hpp"
#include "triplemark/tbm.hpp"

namespace triplemark {

struct FitOptions {
    LogFactorial log_factorial = LogFactorial::exact;
    double ci_level = 0.95;
    bool compute_se = true;
    optimize::OptimizeOptions optimizer{};
    /// N-hat beyond this multiple of x0 means the likelihood has no finite maximum in N.
    double divergence_ratio = 100.0;
};

/// Number of free parameters reported for each model, N included.
inline int free_parameter_count(ModelId id) {
    switch (id) {
        case ModelId::tbm1:
        case ModelId::tbm2:
        case ModelId::llm1: return 7;
        case ModelId::llm2: return 6;
        case ModelId::mtb: return 5;
        case ModelId::mt: return 4;
    }
    return 0;
}

namespace detail {

inline tbm::Variant variant_of(ModelId id) {
    switch (id) {
        case ModelId::tbm1: return tbm::Variant::tbm1;
        case ModelId::tbm2: return tbm::Variant::tbm2;
        case ModelId::mt: return tbm::Variant::mt;
        default: throw DomainError("not a trivariate Bernoulli model: " + to_string(id));
    }
}

/// Indices (0-based, alpha1..alpha4) of the dependence proportions left free.
inline std::vector<std::size_t> free_alphas(tbm::Variant v) {
    switch (v) {
        case tbm::Variant::tbm1: return {0, 1, 3};
        case tbm::Variant::tbm2: return {0, 1, 2};
        case tbm::Variant::mt: return {};
        case tbm::Variant::general: return {0, 1, 2, 3};
    }
    return {};
}

/// One-way list totals n1, n2, n3.
inline std::array<double, 3> list_totals(const TripleRecordTable& t) {
    const auto m = margins(t);
    return {static_cast<double>(*m.at("1..")), static_cast<double>(*m.at(".1.")),
            static_cast<double>(*m.at("..1"))};
}

/// Independence-model estimate of N: root of N [1 - prod(1 - n_l / N)] = x0.
inline std::optional<double> independence_n(const TripleRecordTable& t) {
    const auto n = list_totals(t);
    const double x0 = static_cast<double>(t.total());
    auto excess = [&](double big_n) {
        double miss = 1.0;
        for (double v : n) miss *= 1.0 - v / big_n;
        return big_n * (1.0 - miss) - x0;
    };
    double lo = std::max({n[0], n[1], n[2], 1.0}), hi = lo;
    if (excess(lo) <= 0.0) return std::nullopt;
    for (int k = 0; k < 60 && excess(hi) > 0.0; ++k) hi *= 2.0;
    if (excess(hi) > 0.0) return std::nullopt;
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        (excess(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline tbm::TbmParams unpack_tbm(std::span<const double> v, tbm::Variant variant) {
    tbm::TbmParams p;
    p.n = v[0];
    const auto idx = free_alphas(variant);
    for (std::size_t a = 0; a < idx.size(); ++a) p.alpha[idx[a]] = v[1 + a];
    for (std::size_t l = 0; l < 3; ++l) p.p[l] = v[1 + idx.size() + l];
    return p;
}

inline std::vector<optimize::Vector> tbm_start_fan(const TripleRecordTable& t, tbm::Variant variant) {
    const double x0 = static_cast<double>(t.total());
    const auto totals = list_totals(t);
    const auto n_alpha = free_alphas(variant).size();
    auto make = [&](double n, double alpha) {
        optimize::Vector v{n};
        for (std::size_t a = 0; a < n_alpha; ++a) v.push_back(alpha);
        for (double tot : totals) v.push_back(std::clamp(tot / n, 0.02, 0.98));
        return v;
    };
    std::vector<optimize::Vector> starts;
    for (double alpha : {0.05, 0.15})
        for (double capture : {0.9, 0.7}) starts.push_back(make(x0 / capture, alpha));
    const double n_ind = independence_n(t).value_or(x0 / 0.5);
    starts.push_back(make(std::max(n_ind, x0 * 1.0001), 1e-4));
    return starts;
}

}  // namespace detail

/// Maximum likelihood fit of TBM-1, TBM-2 or M_t (all alphas zero).
inline FitReport fit_tbm(const TripleRecordTable& table, ModelId model, const FitOptions& opt = {}) {
    const auto variant = detail::variant_of(model);
    const double x0 = static_cast<double>(table.total());
    if (x0 < 1) throw InputError("no observed captures");
    const auto alpha_idx = detail::free_alphas(variant);

    const LogFactorial policy = opt.log_factorial;
    const double n_cap = x0 * opt.divergence_ratio * 100.0;
    optimize::Objective loglik = [&table, variant, policy, n_cap](std::span<const double> v) {
        const auto p = detail::unpack_tbm(v, variant);
        if (!(p.alpha_total() <= 1.0) || p.n < static_cast<double>(table.total()) || p.n > n_cap)
            return -std::numeric_limits<double>::infinity();
        for (double a : p.alpha)
            if (a < 0.0) return -std::numeric_limits<double>::infinity();
        for (double q : p.p)
            if (!(q > 0.0 && q < 1.0)) return -std::numeric_limits<double>::infinity();
        return multinomial_log_likelihood(p.n, tbm::detail::mixture(p), table, policy);
    };

    optimize::ParamTransform transform;
    transform.add_offset_log(x0);
    if (!alpha_idx.empty()) transform.add_simplex(alpha_idx.size());
    transform.add_logit(3);

    const auto starts = detail::tbm_start_fan(table, variant);
    const auto result = optimize::maximize(loglik, transform, starts, opt.optimizer);
    const auto best = detail::unpack_tbm(result.argmax, variant);
    if (best.n > opt.divergence_ratio * x0)
        throw ConvergenceError("likelihood increases without bound in N (search reached N = " +
                               std::to_string(best.n) + "); the MLE does not exist for this table");

    FitReport r;
    r.model = model;
    r.x0 = table.total();
    r.n_hat = best.n;
    r.params.emplace_back("N", best.n);
    if (model != ModelId::mt) {
        for (std::size_t s = 0; s < 4; ++s) r.params.emplace_back("alpha" + std::to_string(s + 1), best.alpha[s]);
        r.params.emplace_back("alpha", best.alpha_total());
    }
    for (std::size_t l = 0; l < 3; ++l) r.params.emplace_back("p" + std::to_string(l + 1), best.p[l]);
    r.converged = result.converged;
    r.n_evals = result.n_evals;
    r.n_free_params = free_parameter_count(model);
    r.neg2loglik = -2.0 * result.value;
    r.deviance = g2_deviance(table, best.n, tbm::detail::mixture(best));
    r.aic = r.deviance + 2.0 * r.n_free_params;
    if (!result.converged) r.diagnostics.push_back("optimizer stopped: " + result.termination);

    // Boundary handling: dependence proportions at 0, or alpha at 1, are held
    // fixed for the observed information.
    constexpr double kBoundary = 1e-5;
    std::vector<bool> free(result.argmax.size(), true);
    for (std::size_t a = 0; a < alpha_idx.size(); ++a) {
        if (best.alpha[alpha_idx[a]] < kBoundary) {
            free[1 + a] = false;
            r.diagnostics.push_back("boundary: alpha" + std::to_string(alpha_idx[a] + 1) + " -> 0");
        }
    }
    if (!alpha_idx.empty() && 1.0 - best.alpha_total() < kBoundary)
        r.diagnostics.push_back("boundary: alpha -> 1 (no causally independent individuals)");
    for (std::size_t l = 0; l < 3; ++l) {
        const double q = best.p[l];
        if (q < kBoundary || q > 1.0 - kBoundary) {
            free[1 + alpha_idx.size() + l] = false;
            r.diagnostics.push_back("boundary: p" + std::to_string(l + 1) + " at 0 or 1");
        }
    }
    if (opt.compute_se) {
        if (!alpha_idx.empty() && 1.0 - best.alpha_total() < kBoundary)
            attach_interval(r, {std::nullopt, "alpha on the upper boundary"}, 0.0);
        else
            attach_interval(r, n_standard_error(loglik, result.argmax, free),
                            normal_critical_value(opt.ci_level));
    }
    return r;
}

/// Log-linear fit by IRLS, with closed-form cross-check and delta-method SE.
inline FitReport fit_loglinear(const TripleRecordTable& table, ModelId model, const FitOptions& opt = {}) {
    if (table.total() < 1) throw InputError("no observed captures");
    const auto fit = loglinear::llm_fit(table, loglinear::make_spec(model), {}, opt.log_factorial);
    FitReport r;
    r.model = model;
    r.x0 = table.total();
    r.n_hat = fit.n_hat;
    double m000 = fit.m000;
    try {
        // IRLS agrees to ~1e-12; the rational form is exact, so report that
        const auto exact = loglinear::closed_form_m000_exact(table, model);
        m000 = exact.value();
        r.n_hat = exact.plus(r.x0).value();
    } catch (const EstimatorUndefined&) {
    }
    r.params.emplace_back("N", r.n_hat);
    r.params.emplace_back("m000", m000);
    for (const auto& [name, value] : fit.u_estimates) r.params.emplace_back(name, value);
    r.converged = true;
    r.n_evals = fit.iterations;
    r.n_free_params = fit.n_free_params;
    r.neg2loglik = fit.neg2loglik;
    r.deviance = fit.deviance;
    r.aic = fit.aic;
    if (opt.compute_se) {
        StandardErrorResult se;
        try {
            se.se = std::sqrt(loglinear::llm_variance_m000(table, model));
        } catch (const EstimatorUndefined& e) {
            se.reason = e.what();
        }
        attach_interval(r, se, normal_critical_value(opt.ci_level));
    }
    return r;
}

/// Fit one model. Errors propagate with the model id in the message.
inline FitReport fit(const TripleRecordTable& table, ModelId model, const FitOptions& opt = {}) {
    if (table.total() < 1) throw InputError("no observed captures");
    try {
        switch (model) {
            case ModelId::tbm1:
            case ModelId::tbm2:
            case ModelId::mt: return fit_tbm(table, model, opt);
            case ModelId::llm1:
            case ModelId::llm2: return fit_loglinear(table, model, opt);
            case ModelId::mtb: {
                mtb::UmleOptions mo;
                mo.log_factorial = opt.log_factorial;
                mo.ci_level = opt.ci_level;
                mo.compute_se = opt.compute_se;
                mo.optimizer = opt.optimizer;
                mo.divergence_ratio = opt.divergence_ratio;
                return mtb::mtb_umle(table, mo);
            }
        }
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(to_string(model) + ": " + e.what());
    } catch (const EstimatorUndefined& e) {
        throw EstimatorUndefined(to_string(model) + ": " + e.what());
    } catch (const DomainError& e) {
        throw DomainError(to_string(model) + ": " + e.what());
    }
    throw DomainError("unknown model");
}

struct ModelOutcome {
    ModelId model;
    std::optional<FitReport> report;
    std::string error;

    bool ok() const { return report.has_value(); }
};

struct ComparisonReport {
    std::string label;
    TripleRecordTable table;
    std::vector<ModelOutcome> outcomes;  // requested order
    std::vector<ModelId> ranking;        // successful fits by AIC

    const ModelOutcome* find(ModelId id) const {
        for (const auto& o : outcomes)
            if (o.model == id) return &o;
        return nullptr;
    }
    bool all_succeeded() const {
        return std::all_of(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.ok(); });
    }
};

/// Fit every requested model; failures are recorded, not thrown. Ranking is
/// by AIC, ties broken by fewer free parameters, then request order.
inline ComparisonReport compare(const TripleRecordTable& table, const std::vector<ModelId>& models,
                                const FitOptions& opt = {}) {
    if (table.total() < 1) throw InputError("no observed captures");
    ComparisonReport rep;
    rep.label = table.label();
    rep.table = table;
    for (auto id : models) {
        ModelOutcome o{id, std::nullopt, {}};
        try {
            o.report = fit(table, id, opt);
        } catch (const Error& e) {
            o.error = e.what();
        }
        rep.outcomes.push_back(std::move(o));
    }
    std::vector<std::size_t> order;
    for (std::size_t n = 0; n < rep.outcomes.size(); ++n)
        if (rep.outcomes[n].ok()) order.push_back(n);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ra = *rep.outcomes[a].report;
        const auto& rb = *rep.outcomes[b].report;
        if (ra.aic != rb.aic) return ra.aic < rb.aic;
        return ra.n_free_params < rb.n_free_params;
    });
    for (auto n : order) rep.ranking.push_back(rep.outcomes[n].model);
    return rep;
}

// ---------------------------------------------------------------------------
// Rendering

namespace detail {

inline double six_significant(double v) {
    if (!std::isfinite(v) || v == 0.0) return v;
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return std::stod(os.str());
}

inline std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

}  // namespace detail

/// Structured document: per-model sections in request order with display
/// values at 6 significant digits and the raw doubles under "full_precision".
inline nlohmann::ordered_json to_json(const FitReport& r) {
    using detail::six_significant;
    nlohmann::ordered_json j;
    j["model"] = to_string(r.model);
    j["x0"] = r.x0;
    j["n_hat"] = six_significant(r.n_hat);
    j["n_hat_integer"] = display_integer(r.n_hat);
    auto opt = [&](const std::optional<double>& v) -> nlohmann::ordered_json {
        return v ? nlohmann::ordered_json(six_significant(*v)) : nlohmann::ordered_json(nullptr);
    };
    j["se_n"] = opt(r.se_n);
    j["rase"] = opt(r.rase);
    j["aci_low"] = opt(r.aci_low);
    j["aci_high"] = opt(r.aci_high);
    if (!r.se_unavailable_reason.empty()) j["se_unavailable_reason"] = r.se_unavailable_reason;
    j["deviance"] = six_significant(r.deviance);
    j["neg2loglik"] = six_significant(r.neg2loglik);
    j["aic"] = six_significant(r.aic);
    j["n_free_params"] = r.n_free_params;
    j["converged"] = r.converged;
    j["n_evals"] = r.n_evals;
    nlohmann::ordered_json params;
    for (const auto& [k, v] : r.params) params[k] = six_significant(v);
    j["params"] = params;
    j["diagnostics"] = r.diagnostics;

    nlohmann::ordered_json full;
    full["n_hat"] = r.n_hat;
    auto raw = [](const std::optional<double>& v) -> nlohmann::ordered_json {
        return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    };
    full["se_n"] = raw(r.se_n);
    full["rase"] = raw(r.rase);
    full["aci_low"] = raw(r.aci_low);
    full["aci_high"] = raw(r.aci_high);
    full["deviance"] = r.deviance;
    full["neg2loglik"] = r.neg2loglik;
    full["aic"] = r.aic;
    nlohmann::ordered_json full_params;
    for (const auto& [k, v] : r.params) full_params[k] = v;
    full["params"] = full_params;
    j["full_precision"] = full;
    return j;
}

inline nlohmann::ordered_json to_json(const ComparisonReport& rep) {
    nlohmann::ordered_json j;
    j["dataset"] = rep.label;
    nlohmann::ordered_json counts;
    for (std::size_t n = 0; n < kObservedCells; ++n) counts[profile_at(n).label()] = rep.table.counts()[n];
    j["counts"] = counts;
    j["x0"] = rep.table.total();
    nlohmann::ordered_json models = nlohmann::ordered_json::array();
    for (const auto& o : rep.outcomes) {
        if (o.ok()) {
            auto m = to_json(*o.report);
            m["status"] = "ok";
            models.push_back(m);
        } else {
            nlohmann::ordered_json m;
            m["model"] = to_string(o.model);
            m["status"] = "failed";
            m["error"] = o.error;
            models.push_back(m);
        }
    }
    j["models"] = models;
    nlohmann::ordered_json ranking = nlohmann::ordered_json::array();
    for (auto id : rep.ranking) ranking.push_back(to_string(id));
    j["aic_ranking"] = ranking;
    return j;
}

/// Text comparison table, one column per model.
inline std::string render_text(const ComparisonReport& rep) {
    constexpr int kLabel = 26, kCol = 16;
    std::ostringstream os;
    os << "Dataset: " << (rep.label.empty() ? "(unnamed)" : rep.label) << "   x0 = " << rep.table.total()
       << "\n";
    auto row = [&](const std::string& label, auto&& cell) {
        os << std::left << std::setw(kLabel) << label;
        for (const auto& o : rep.outcomes) os << std::right << std::setw(kCol) << (o.ok() ? cell(*o.report) : std::string("failed"));
        os << '\n';
    };
    os << std::left << std::setw(kLabel) << "";
    for (const auto& o : rep.outcomes) os << std::right << std::setw(kCol) << display_name(o.model);
    os << '\n';
    row("N-hat (RASE)", [](const FitReport& r) {
        std::string s = std::to_string(display_integer(r.n_hat));
        s += r.rase ? " (" + detail::fixed(*r.rase, 3) + ")" : " (n/a)";
        return s;
    });
    row("ACI", [](const FitReport& r) {
        if (!r.aci_low) return std::string("n/a");
        return "(" + std::to_string(display_integer(*r.aci_low)) + ", " +
               std::to_string(display_integer(*r.aci_high)) + ")";
    });
    row("No. of free parameters", [](const FitReport& r) { return std::to_string(r.n_free_params); });
    row("Deviance (G2)", [](const FitReport& r) { return detail::fixed(r.deviance, 3); });
    row("AIC", [](const FitReport& r) { return detail::fixed(r.aic, 3); });
    row("-2 log L", [](const FitReport& r) { return detail::fixed(r.neg2loglik, 3); });

    os << "AIC ranking:";
    for (auto id : rep.ranking) os << ' ' << display_name(id);
    os << '\n';
    for (const auto& o : rep.outcomes) {
        if (!o.ok()) {
            os << "error[" << to_string(o.model) << "]: " << o.error << '\n';
            continue;
        }
        for (const auto& d : o.report->diagnostics) os << "note[" << to_string(o.model) << "]: " << d << '\n';
    }
    return os.str();
}

}  // namespace triplemark
