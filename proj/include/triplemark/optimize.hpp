#pragma once

// Derivative-free maximizer for the likelihood fits and central-difference
// Hessians for observed-information standard errors.
//
// The optimizer works in an unconstrained space. A ParamTransform maps that
// space onto the constrained model space (N above x0, probabilities in (0,1),
// positive scalars, and a dependence-proportion simplex block), so every point
// handed to an objective already satisfies the model's box and simplex
// constraints.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "triplemark/error.hpp"

namespace triplemark::optimize {

using Vector = std::vector<double>;
using Objective = std::function<double(std::span<const double>)>;

/// Per-block mapping between model space and unconstrained space.
class ParamTransform {
public:
    enum class Mapping {
        offset_log,  // x = offset + exp(t)
        logit,       // x = 1 / (1 + exp(-t))
        log,         // x = exp(t)
        simplex,     // additive log-ratio; remainder 1 - sum(x) implicit
    };

    struct Block {
        Mapping mapping;
        std::size_t size;
        double offset;
    };

    ParamTransform& add_offset_log(double offset) {
        blocks_.push_back({Mapping::offset_log, 1, offset});
        return *this;
    }
    ParamTransform& add_logit(std::size_t n = 1) {
        blocks_.push_back({Mapping::logit, n, 0.0});
        return *this;
    }
    ParamTransform& add_log(std::size_t n = 1) {
        blocks_.push_back({Mapping::log, n, 0.0});
        return *this;
    }
    ParamTransform& add_simplex(std::size_t n) {
        blocks_.push_back({Mapping::simplex, n, 0.0});
        return *this;
    }

    std::size_t dimension() const {
        std::size_t d = 0;
        for (const auto& b : blocks_) d += b.size;
        return d;
    }

    const std::vector<Block>& blocks() const noexcept { return blocks_; }

    void to_model(std::span<const double> u, std::span<double> x) const {
        std::size_t at = 0;
        for (const auto& b : blocks_) {
            switch (b.mapping) {
                case Mapping::offset_log: x[at] = b.offset + std::exp(u[at]); break;
                case Mapping::logit:
                    for (std::size_t n = 0; n < b.size; ++n) x[at + n] = logistic(u[at + n]);
                    break;
                case Mapping::log:
                    for (std::size_t n = 0; n < b.size; ++n) x[at + n] = std::exp(u[at + n]);
                    break;
                case Mapping::simplex: {
                    // Softmax with an implicit zero logit for the remainder.
                    double top = 0.0;
                    for (std::size_t n = 0; n < b.size; ++n) top = std::max(top, u[at + n]);
                    double denom = std::exp(-top);
                    for (std::size_t n = 0; n < b.size; ++n) denom += std::exp(u[at + n] - top);
                    for (std::size_t n = 0; n < b.size; ++n)
                        x[at + n] = std::exp(u[at + n] - top) / denom;
                    break;
                }
            }
            at += b.size;
        }
    }

    Vector to_model(std::span<const double> u) const {
        Vector x(dimension());
        to_model(u, x);
        return x;
    }

    /// Inverse map. Requires the point to lie strictly inside the domain.
    Vector to_unconstrained(std::span<const double> x) const {
        Vector u(dimension());
        std::size_t at = 0;
        for (const auto& b : blocks_) {
            switch (b.mapping) {
                case Mapping::offset_log:
                    if (!(x[at] > b.offset))
                        throw DomainError("offset-log coordinate must exceed its offset");
                    u[at] = std::log(x[at] - b.offset);
                    break;
                case Mapping::logit:
                    for (std::size_t n = 0; n < b.size; ++n) {
                        const double p = x[at + n];
                        if (!(p > 0.0 && p < 1.0))
                            throw DomainError("logit coordinate must lie in (0,1)");
                        u[at + n] = std::log(p) - std::log1p(-p);
                    }
                    break;
                case Mapping::log:
                    for (std::size_t n = 0; n < b.size; ++n) {
                        if (!(x[at + n] > 0.0)) throw DomainError("log coordinate must be positive");
                        u[at + n] = std::log(x[at + n]);
                    }
                    break;
                case Mapping::simplex: {
                    double rest = 1.0;
                    for (std::size_t n = 0; n < b.size; ++n) rest -= x[at + n];
                    if (!(rest > 0.0)) throw DomainError("simplex block must sum to less than 1");
                    for (std::size_t n = 0; n < b.size; ++n) {
                        if (!(x[at + n] > 0.0))
                            throw DomainError("simplex coordinates must be positive");
                        u[at + n] = std::log(x[at + n] / rest);
                    }
                    break;
                }
            }
            at += b.size;
        }
        return u;
    }

private:
    static double logistic(double t) {
        if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
        const double e = std::exp(t);
        return e / (1.0 + e);
    }

    std::vector<Block> blocks_;
};

struct OptimizeOptions {
    double simplex_tolerance = 1e-8;   // diameter in unconstrained space
    double value_tolerance = 1e-12;    // relative spread of simplex values
    long max_evals_per_start = 5000;
    double initial_step = 0.5;
    bool polish = true;
    int polish_max_iter = 200;
    double gradient_tolerance = 1e-6;
};

struct OptimizeResult {
    Vector argmax;               // model space
    Vector argmax_unconstrained;
    double value = -std::numeric_limits<double>::infinity();
    bool converged = false;
    long n_evals = 0;
    std::string termination;
    std::size_t best_start = 0;
};

namespace detail {

class CountingObjective {
public:
    CountingObjective(const Objective& f, const ParamTransform& transform)
        : f_(f), transform_(transform), scratch_(transform.dimension()) {}

    /// Negated objective in unconstrained space; +inf for infeasible or NaN.
    double cost(std::span<const double> u) {
        ++evals;
        transform_.to_model(u, scratch_);
        for (double v : scratch_)
            if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
        const double v = f_(scratch_);
        if (std::isnan(v) || v == -std::numeric_limits<double>::infinity())
            return std::numeric_limits<double>::infinity();
        return -v;
    }

    long evals = 0;

private:
    const Objective& f_;
    const ParamTransform& transform_;
    Vector scratch_;
};

struct SimplexOutcome {
    Vector best;
    double cost;
    bool converged;
    std::string reason;
};

inline SimplexOutcome nelder_mead(CountingObjective& obj, Vector start, double step,
                                  const OptimizeOptions& opt, long budget) {
    const std::size_t d = start.size();
    std::vector<Vector> pts(d + 1, start);
    Vector costs(d + 1);
    for (std::size_t n = 0; n < d; ++n) pts[n + 1][n] += step;
    const long first_eval = obj.evals;
    for (std::size_t n = 0; n <= d; ++n) costs[n] = obj.cost(pts[n]);

    std::vector<std::size_t> order(d + 1);
    Vector centroid(d), trial(d), trial2(d);
    auto point_at = [&](double coef, const Vector& worst, Vector& out) {
        for (std::size_t n = 0; n < d; ++n) out[n] = centroid[n] + coef * (worst[n] - centroid[n]);
    };

    while (true) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return costs[a] < costs[b]; });
        const std::size_t lo = order.front(), hi = order.back(), second = order[d - 1];

        double diameter = 0.0;
        for (std::size_t v = 0; v <= d; ++v)
            for (std::size_t n = 0; n < d; ++n)
                diameter = std::max(diameter, std::abs(pts[v][n] - pts[lo][n]));
        if (diameter < opt.simplex_tolerance) return {pts[lo], costs[lo], true, "simplex diameter"};
        if (std::isfinite(costs[hi]) &&
            costs[hi] - costs[lo] <= opt.value_tolerance * (std::abs(costs[lo]) + 1e-300))
            return {pts[lo], costs[lo], true, "value spread"};
        if (obj.evals - first_eval >= budget) return {pts[lo], costs[lo], false, "evaluation limit"};

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t v = 0; v <= d; ++v) {
            if (v == hi) continue;
            for (std::size_t n = 0; n < d; ++n) centroid[n] += pts[v][n] / static_cast<double>(d);
        }

        point_at(-1.0, pts[hi], trial);
        const double fr = obj.cost(trial);
        if (fr < costs[lo]) {
            point_at(-2.0, pts[hi], trial2);
            const double fe = obj.cost(trial2);
            if (fe < fr) {
                pts[hi] = trial2;
                costs[hi] = fe;
            } else {
                pts[hi] = trial;
                costs[hi] = fr;
            }
            continue;
        }
        if (fr < costs[second]) {
            pts[hi] = trial;
            costs[hi] = fr;
            continue;
        }
        // Contraction, outside or inside.
        const bool outside = fr < costs[hi];
        point_at(outside ? -0.5 : 0.5, pts[hi], trial2);
        const double fc = obj.cost(trial2);
        if (fc < (outside ? fr : costs[hi])) {
            pts[hi] = trial2;
            costs[hi] = fc;
            continue;
        }
        for (std::size_t v = 0; v <= d; ++v) {
            if (v == lo) continue;
            for (std::size_t n = 0; n < d; ++n) pts[v][n] = pts[lo][n] + 0.5 * (pts[v][n] - pts[lo][n]);
            costs[v] = obj.cost(pts[v]);
        }
    }
}

inline Vector cost_gradient(CountingObjective& obj, const Vector& u) {
    Vector g(u.size()), probe = u;
    for (std::size_t n = 0; n < u.size(); ++n) {
        const double h = 1e-5 * std::max(1.0, std::abs(u[n]));
        probe[n] = u[n] + h;
        const double up = obj.cost(probe);
        probe[n] = u[n] - h;
        const double down = obj.cost(probe);
        probe[n] = u[n];
        g[n] = (up - down) / (2.0 * h);
    }
    return g;
}

/// BFGS on the cost with central-difference gradients and backtracking.
/// Returns true when the gradient test passed.
inline bool quasi_newton_polish(CountingObjective& obj, Vector& u, double& cost,
                                const OptimizeOptions& opt) {
    const auto d = static_cast<Eigen::Index>(u.size());
    Eigen::MatrixXd inv_h = Eigen::MatrixXd::Identity(d, d);
    Vector g = cost_gradient(obj, u);
    auto as_eigen = [](const Vector& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())); };

    for (int iter = 0; iter < opt.polish_max_iter; ++iter) {
        Eigen::VectorXd ge = as_eigen(g);
        if (!ge.allFinite()) return false;
        if (ge.lpNorm<Eigen::Infinity>() < opt.gradient_tolerance) return true;
        Eigen::VectorXd dir = -inv_h * ge;
        double slope = dir.dot(ge);
        if (!(slope < 0.0)) {
            inv_h.setIdentity();
            dir = -ge;
            slope = -ge.squaredNorm();
        }
        double step = 1.0;
        Vector next(u.size());
        double next_cost = cost;
        bool moved = false;
        for (int ls = 0; ls < 30; ++ls) {
            for (Eigen::Index n = 0; n < d; ++n) next[static_cast<std::size_t>(n)] = u[static_cast<std::size_t>(n)] + step * dir(n);
            next_cost = obj.cost(next);
            if (next_cost <= cost + 1e-4 * step * slope) {
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) return false;
        Vector g_next = cost_gradient(obj, next);
        Eigen::VectorXd s = as_eigen(next) - as_eigen(u);
        Eigen::VectorXd y = as_eigen(g_next) - ge;
        const double sy = s.dot(y);
        if (sy > 1e-12) {
            const double rho = 1.0 / sy;
            Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
            inv_h = (eye - rho * s * y.transpose()) * inv_h * (eye - rho * y * s.transpose()) +
                    rho * s * s.transpose();
        }
        u = std::move(next);
        cost = next_cost;
        g = std::move(g_next);
    }
    return false;
}

}  // namespace detail

/// Maximize `objective` (a function of model-space parameters) from each of
/// the supplied model-space start points and return the best result. Each
/// start runs Nelder-Mead in unconstrained space (restarted once from its own
/// optimum) followed by a quasi-Newton polish.
inline OptimizeResult maximize(const Objective& objective, const ParamTransform& transform,
                               std::span<const Vector> starts, const OptimizeOptions& opt = {}) {
    detail::CountingObjective obj(objective, transform);
    OptimizeResult best;
    bool any_feasible = false;
    for (std::size_t s = 0; s < starts.size(); ++s) {
        Vector u = transform.to_unconstrained(starts[s]);
        const double start_cost = obj.cost(u);
        if (!std::isfinite(start_cost)) continue;
        any_feasible = true;

        auto first = detail::nelder_mead(obj, u, opt.initial_step, opt, opt.max_evals_per_start);
        auto again = detail::nelder_mead(obj, first.best, opt.initial_step * 0.1, opt,
                                         opt.max_evals_per_start / 2);
        auto& nm = again.cost <= first.cost ? again : first;
        Vector point = nm.best;
        double cost = nm.cost;
        bool converged = nm.converged;
        std::string reason = nm.reason;
        if (opt.polish) {
            Vector polished = point;
            double polished_cost = cost;
            if (detail::quasi_newton_polish(obj, polished, polished_cost, opt)) {
                converged = true;
                reason = "gradient";
            }
            if (polished_cost <= cost) {
                point = std::move(polished);
                cost = polished_cost;
            }
        }
        // Never report a point worse than the start itself.
        if (start_cost < cost) {
            point = u;
            cost = start_cost;
        }
        if (-cost > best.value || best.argmax_unconstrained.empty()) {
            best.value = -cost;
            best.argmax_unconstrained = point;
            best.converged = converged;
            best.termination = reason;
            best.best_start = s;
        }
    }
    if (!any_feasible) throw ConvergenceError("no feasible start: objective is -inf at every start point");
    best.argmax = transform.to_model(best.argmax_unconstrained);
    best.n_evals = obj.evals;
    return best;
}

inline OptimizeResult maximize(const Objective& objective, const ParamTransform& transform,
                               const Vector& start, const OptimizeOptions& opt = {}) {
    return maximize(objective, transform, std::span<const Vector>(&start, 1), opt);
}

struct StepPolicy {
    double relative = 1e-4;
    double minimum = 1e-6;

    double step(double x) const { return std::max(relative * std::abs(x), minimum); }
};

/// Central-difference Hessian in model space, symmetrized.
inline Eigen::MatrixXd numerical_hessian(const Objective& f, std::span<const double> point,
                                         const StepPolicy& policy = {}) {
    const std::size_t d = point.size();
    Vector x(point.begin(), point.end()), h(d);
    for (std::size_t n = 0; n < d; ++n) h[n] = policy.step(point[n]);
    const double f0 = f(x);
    if (!std::isfinite(f0)) throw DifferentiationError("objective not finite at the expansion point", -1);

    auto eval = [&](std::size_t coord) {
        const double v = f(x);
        if (!std::isfinite(v))
            throw DifferentiationError("non-finite objective while differentiating coordinate " +
                                           std::to_string(coord),
                                       static_cast<int>(coord));
        return v;
    };

    Eigen::MatrixXd hess(d, d);
    for (std::size_t a = 0; a < d; ++a) {
        x[a] = point[a] + h[a];
        const double up = eval(a);
        x[a] = point[a] - h[a];
        const double down = eval(a);
        x[a] = point[a];
        hess(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) = (up - 2.0 * f0 + down) / (h[a] * h[a]);
        for (std::size_t b = 0; b < a; ++b) {
            double corner[4];
            const int sa[4] = {1, 1, -1, -1}, sb[4] = {1, -1, 1, -1};
            for (int c = 0; c < 4; ++c) {
                x[a] = point[a] + sa[c] * h[a];
                x[b] = point[b] + sb[c] * h[b];
                corner[c] = eval(a);
            }
            x[a] = point[a];
            x[b] = point[b];
            const double v = (corner[0] - corner[1] - corner[2] + corner[3]) / (4.0 * h[a] * h[b]);
            hess(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
            hess(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = v;
        }
    }
    return 0.5 * (hess + hess.transpose());
}

/// Central-difference gradient with a fixed absolute step per coordinate.
inline Vector central_gradient(const Objective& f, std::span<const double> point, double step) {
    Vector x(point.begin(), point.end()), g(point.size());
    for (std::size_t n = 0; n < point.size(); ++n) {
        x[n] = point[n] + step;
        const double up = f(x);
        x[n] = point[n] - step;
        const double down = f(x);
        x[n] = point[n];
        g[n] = (up - down) / (2.0 * step);
    }
    return g;
}

}  // namespace triplemark::optimize
