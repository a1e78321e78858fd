#pragma once

// Trivariate Bernoulli model. Each individual carries latent list statuses
// (X1, X2, X3) drawn as independent Bernoulli(p1, p2, p3); its observed
// statuses (Y, Z, W) copy them according to one of five behaviour classes:
//
//   independent   (X1, X2, X3)   weight 1 - alpha
//   class 1       (X1, X1, X3)   weight alpha1
//   class 2       (X1, X2, X2)   weight alpha2
//   class 3       (X1, X2, X1)   weight alpha3
//   class 4       (X1, X1, X1)   weight alpha4
//
// TBM-1 fixes alpha3 = 0, TBM-2 fixes alpha4 = 0, and all alphas zero is the
// independence model M_t.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "triplemark/core.hpp"
#include "triplemark/multinomial.hpp"

namespace triplemark::tbm {

enum class Variant { general, tbm1, tbm2, mt };

inline constexpr std::size_t kClasses = 5;

struct TbmParams {
    double n = 1.0;
    std::array<double, 4> alpha{};  // alpha1..alpha4
    std::array<double, 3> p{0.5, 0.5, 0.5};

    double alpha_total() const { return alpha[0] + alpha[1] + alpha[2] + alpha[3]; }

    /// Mixture weights in class order (independent, alpha1..alpha4).
    std::array<double, kClasses> class_weights() const {
        return {1.0 - alpha_total(), alpha[0], alpha[1], alpha[2], alpha[3]};
    }
};

inline constexpr double kAlphaSumSlack = 1e-12;

/// Throws ConstraintViolation naming the first violated invariant. With
/// `closed_probabilities` the capture probabilities may sit on 0 or 1
/// (degenerate Bernoullis, used by the sampler).
inline void validate(const TbmParams& params, bool closed_probabilities = false) {
    if (!(params.n > 0.0) || !std::isfinite(params.n))
        throw ConstraintViolation("N must be a positive finite number");
    for (std::size_t s = 0; s < 4; ++s)
        if (!(params.alpha[s] >= 0.0))
            throw ConstraintViolation("alpha" + std::to_string(s + 1) + " must be >= 0");
    if (!(params.alpha_total() <= 1.0 + kAlphaSumSlack))
        throw ConstraintViolation("alpha1 + alpha2 + alpha3 + alpha4 must be <= 1");
    for (std::size_t l = 0; l < 3; ++l) {
        const double q = params.p[l];
        const bool ok = closed_probabilities ? (q >= 0.0 && q <= 1.0) : (q > 0.0 && q < 1.0);
        if (!ok)
            throw ConstraintViolation("p" + std::to_string(l + 1) +
                                      (closed_probabilities ? " must lie in [0,1]" : " must lie in (0,1)"));
    }
}

/// Throws ConstraintViolation if `params` does not respect the sub-model mask.
inline void check_variant(const TbmParams& params, Variant variant) {
    switch (variant) {
        case Variant::general: break;
        case Variant::tbm1:
            if (params.alpha[2] != 0.0) throw ConstraintViolation("TBM-1 requires alpha3 = 0");
            break;
        case Variant::tbm2:
            if (params.alpha[3] != 0.0) throw ConstraintViolation("TBM-2 requires alpha4 = 0");
            break;
        case Variant::mt:
            if (params.alpha_total() != 0.0) throw ConstraintViolation("M_t requires all alphas = 0");
            break;
    }
}

/// Observed profile produced by behaviour class `cls` from latent statuses.
constexpr CaptureProfile manifest(std::size_t cls, int x1, int x2, int x3) {
    switch (cls) {
        case 1: return {x1, x1, x3};
        case 2: return {x1, x2, x2};
        case 3: return {x1, x2, x1};
        case 4: return {x1, x1, x1};
        default: return {x1, x2, x3};
    }
}

using ClassDistributions = std::array<CellDistribution::Probs, kClasses>;

/// Profile distribution conditional on each behaviour class (unweighted).
inline ClassDistributions class_distributions(const std::array<double, 3>& p) {
    ClassDistributions out{};
    for (auto& d : out) d.fill(0.0);
    for (int x1 = 0; x1 <= 1; ++x1)
        for (int x2 = 0; x2 <= 1; ++x2)
            for (int x3 = 0; x3 <= 1; ++x3) {
                const double w = (x1 ? p[0] : 1.0 - p[0]) * (x2 ? p[1] : 1.0 - p[1]) *
                                 (x3 ? p[2] : 1.0 - p[2]);
                for (std::size_t c = 0; c < kClasses; ++c) out[c][manifest(c, x1, x2, x3).index()] += w;
            }
    return out;
}

namespace detail {

inline CellDistribution::Probs mixture(const TbmParams& params) {
    const auto classes = class_distributions(params.p);
    const auto weights = params.class_weights();
    CellDistribution::Probs probs{};
    for (std::size_t cell = 0; cell < kAllCells; ++cell) {
        double s = 0.0;
        for (std::size_t c = 0; c < kClasses; ++c) s += weights[c] * classes[c][cell];
        probs[cell] = s;
    }
    return probs;
}

}  // namespace detail

inline CellDistribution tbm_cell_distribution(const TbmParams& params) {
    validate(params);
    return CellDistribution(detail::mixture(params));
}

struct Marginals {
    double y = 0.0;  // P(captured in list 1)
    double z = 0.0;  // list 2
    double w = 0.0;  // list 3
};

inline Marginals tbm_marginals(const TbmParams& params) {
    const auto cells = tbm_cell_distribution(params);
    Marginals m;
    for (std::size_t n = 0; n < kAllCells; ++n) {
        const auto prof = profile_at(n);
        if (prof.i) m.y += cells[n];
        if (prof.j) m.z += cells[n];
        if (prof.k) m.w += cells[n];
    }
    return m;
}

/// log L(N, alpha, p) with the multinomial constant dropped. Returns -inf when
/// an observed cell has zero probability; throws DomainError when N < x0.
inline double tbm_log_likelihood(const TbmParams& params, const TripleRecordTable& table,
                                 LogFactorial policy = LogFactorial::exact) {
    validate(params);
    if (params.n < static_cast<double>(table.total()))
        throw DomainError("population size N is below the observed total x0");
    return multinomial_log_likelihood(params.n, detail::mixture(params), table, policy);
}

namespace detail {

// Uniform double in [0, 1) from the top 53 bits.
template <class Engine>
double uniform01(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Draw N individuals from the generative model and tabulate the observed
/// profiles, discarding (0,0,0). Deterministic for a given seed. Capture
/// probabilities may be 0 or 1 here.
inline TripleRecordTable tbm_sample(const TbmParams& params, std::int64_t n, std::uint64_t seed) {
    if (n < 1) throw ConstraintViolation("N must be a positive integer for sampling");
    TbmParams checked = params;
    checked.n = static_cast<double>(n);
    validate(checked, /*closed_probabilities=*/true);

    std::mt19937_64 eng(seed);
    const auto weights = params.class_weights();
    std::array<double, kClasses> cumulative{};
    double acc = 0.0;
    for (std::size_t c = 0; c < kClasses; ++c) cumulative[c] = (acc += weights[c]);

    TripleRecordTable::Counts counts{};
    for (std::int64_t h = 0; h < n; ++h) {
        const int x1 = detail::uniform01(eng) < params.p[0];
        const int x2 = detail::uniform01(eng) < params.p[1];
        const int x3 = detail::uniform01(eng) < params.p[2];
        const double u = detail::uniform01(eng) * acc;
        std::size_t cls = 0;
        while (cls + 1 < kClasses && u >= cumulative[cls]) ++cls;
        const auto prof = manifest(cls, x1, x2, x3);
        if (prof.observable()) ++counts[prof.index()];
    }
    return TripleRecordTable(counts);
}

}  // namespace triplemark::tbm
