#pragma once

// Monte Carlo studies: draw tables from a TBM generator, refit competing
// models, and summarise the replicate estimates.

#include <algorithm>
#include <array>
#include <cctype>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "triplemark/core.hpp"
#include "triplemark/inference.hpp"
#include "triplemark/tbm.hpp"

namespace triplemark::sim {

struct Scenario {
    std::string id;
    ModelId generator = ModelId::tbm1;
    std::array<double, 3> p{};
    std::array<double, 4> alpha{};
    std::int64_t n = 400;

    tbm::TbmParams params() const {
        tbm::TbmParams t;
        t.n = static_cast<double>(n);
        t.alpha = alpha;
        t.p = p;
        return t;
    }

    /// Scenario id qualified by population size, e.g. "P3_N400".
    std::string key() const { return id + "_N" + std::to_string(n); }
};

inline void validate(const Scenario& s) {
    if (s.id.empty()) throw InputError("scenario id is empty");
    if (s.generator != ModelId::tbm1 && s.generator != ModelId::tbm2)
        throw ConstraintViolation("scenario generator must be tbm1 or tbm2");
    if (s.n < 1) throw ConstraintViolation("scenario N must be a positive integer");
    tbm::validate(s.params(), true);
    tbm::check_variant(s.params(), s.generator == ModelId::tbm1 ? tbm::Variant::tbm1 : tbm::Variant::tbm2);
}

/// The ten built-in populations P1..P10 at size `n`.
inline std::vector<Scenario> builtin_scenarios(std::int64_t n = 400) {
    using M = ModelId;
    std::vector<Scenario> s{
        {"P1", M::tbm1, {0.4, 0.5, 0.6}, {0.6, 0.1, 0.0, 0.2}, n},
        {"P2", M::tbm1, {0.4, 0.5, 0.6}, {0.2, 0.6, 0.0, 0.1}, n},
        {"P3", M::tbm1, {0.6, 0.7, 0.6}, {0.4, 0.1, 0.0, 0.4}, n},
        {"P4", M::tbm1, {0.6, 0.4, 0.5}, {0.5, 0.3, 0.0, 0.1}, n},
        {"P5", M::tbm1, {0.6, 0.4, 0.5}, {0.3, 0.3, 0.0, 0.3}, n},
        {"P6", M::tbm2, {0.4, 0.5, 0.6}, {0.6, 0.1, 0.2, 0.0}, n},
        {"P7", M::tbm2, {0.4, 0.5, 0.6}, {0.2, 0.6, 0.1, 0.0}, n},
        {"P8", M::tbm2, {0.6, 0.7, 0.6}, {0.4, 0.1, 0.4, 0.0}, n},
        {"P9", M::tbm2, {0.6, 0.4, 0.5}, {0.5, 0.3, 0.1, 0.0}, n},
        {"P10", M::tbm2, {0.6, 0.4, 0.5}, {0.3, 0.3, 0.3, 0.0}, n},
    };
    return s;
}

inline std::optional<Scenario> builtin_scenario(const std::string& id, std::int64_t n = 400) {
    for (auto& s : builtin_scenarios(n)) {
        std::string a = s.id, b = id;
        std::transform(b.begin(), b.end(), b.begin(), [](unsigned char c) { return std::toupper(c); });
        if (a == b) return s;
    }
    return std::nullopt;
}

/// E[x0 | N] = N (1 - p000).
inline double expected_x0(const Scenario& s) {
    validate(s);
    const auto probs = tbm::detail::mixture(s.params());
    return static_cast<double>(s.n) * (1.0 - probs[kUnobservedIndex]);
}

// ---------------------------------------------------------------------------
// Seeds

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Stream seed for one replicate; depends only on its coordinates.
inline std::uint64_t replicate_seed(std::uint64_t master, const std::string& scenario_key, std::uint64_t replicate) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ fnv1a(scenario_key));
    return splitmix64(h ^ replicate);
}

// ---------------------------------------------------------------------------
// Study

struct SimulationSummary {
    std::string scenario;  // scenario key, e.g. P3_N400
    ModelId model = ModelId::tbm1;
    std::int64_t replicates = 0;
    std::int64_t n_true = 0;
    std::optional<double> mean_n_hat;
    std::optional<double> rrmse;
    std::optional<double> ci_low;
    std::optional<double> ci_high;
    std::int64_t failures = 0;
};

/// Nearest-rank percentile of sorted values, q in (0, 1].
inline double nearest_rank(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw DomainError("percentile of an empty sample");
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

inline SimulationSummary summarize(const std::string& key, ModelId model, std::int64_t n_true,
                                   const std::vector<std::optional<double>>& estimates) {
    SimulationSummary s;
    s.scenario = key;
    s.model = model;
    s.n_true = n_true;
    s.replicates = static_cast<std::int64_t>(estimates.size());
    std::vector<double> ok;
    for (const auto& e : estimates) {
        if (e) ok.push_back(*e);
        else ++s.failures;
    }
    if (ok.empty()) return s;
    const double n = static_cast<double>(n_true);
    double sum = 0.0, sq = 0.0;
    for (double v : ok) {
        sum += v;
        sq += (v - n) * (v - n);
    }
    s.mean_n_hat = sum / static_cast<double>(ok.size());
    s.rrmse = std::sqrt(sq / static_cast<double>(ok.size())) / n;
    std::sort(ok.begin(), ok.end());
    s.ci_low = nearest_rank(ok, 0.025);
    s.ci_high = nearest_rank(ok, 0.975);
    return s;
}

inline unsigned default_threads() {
    if (const char* env = std::getenv("TRIPLEMARK_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

struct StudyOptions {
    std::int64_t replicates = 500;
    std::uint64_t master_seed = 20190001;
    unsigned threads = 0;  // 0: default_threads()
    FitOptions fit{};
};

/// Run every (scenario, replicate) pair and fit all `models` to its table.
/// Output order: scenarios as given, models as given. Results do not depend
/// on the thread count.
inline std::vector<SimulationSummary> run_study(const std::vector<Scenario>& scenarios,
                                                const std::vector<ModelId>& models, const StudyOptions& opt = {}) {
    if (opt.replicates < 1) throw DomainError("replicates must be >= 1");
    for (const auto& s : scenarios) validate(s);

    FitOptions fit_opt = opt.fit;
    fit_opt.compute_se = false;

    const std::size_t reps = static_cast<std::size_t>(opt.replicates);
    const std::size_t jobs = scenarios.size() * reps;
    // estimates[scenario][model][replicate]
    std::vector<std::vector<std::vector<std::optional<double>>>> est(
        scenarios.size(), std::vector<std::vector<std::optional<double>>>(models.size(),
                                                                          std::vector<std::optional<double>>(reps)));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t job = next++; job < jobs; job = next++) {
            const std::size_t si = job / reps, r = job % reps;
            const auto& sc = scenarios[si];
            const auto table = tbm::tbm_sample(sc.params(), sc.n, replicate_seed(opt.master_seed, sc.key(), r));
            for (std::size_t mi = 0; mi < models.size(); ++mi) {
                try {
                    if (table.total() < 1) continue;
                    est[si][mi][r] = fit(table, models[mi], fit_opt).n_hat;
                } catch (const Error&) {
                }
            }
        }
    };
    const unsigned threads = std::max(1u, opt.threads ? opt.threads : default_threads());
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<SimulationSummary> out;
    for (std::size_t si = 0; si < scenarios.size(); ++si)
        for (std::size_t mi = 0; mi < models.size(); ++mi)
            out.push_back(summarize(scenarios[si].key(), models[mi], scenarios[si].n, est[si][mi]));
    return out;
}

// ---------------------------------------------------------------------------
// CSV

inline void write_summary_csv(std::ostream& os, const std::vector<SimulationSummary>& rows) {
    os << "scenario,model,replicates,mean_N_hat,rrmse,ci_low,ci_high,failures\n";
    auto num = [&](const std::optional<double>& v, int digits) {
        if (!v) return std::string("NA");
        std::ostringstream s;
        s << std::fixed << std::setprecision(digits) << *v;
        return s.str();
    };
    for (const auto& r : rows)
        os << r.scenario << ',' << to_string(r.model) << ',' << r.replicates << ',' << num(r.mean_n_hat, 4) << ','
           << num(r.rrmse, 6) << ',' << num(r.ci_low, 4) << ',' << num(r.ci_high, 4) << ',' << r.failures << '\n';
}

inline std::string summary_csv(const std::vector<SimulationSummary>& rows) {
    std::ostringstream os;
    write_summary_csv(os, rows);
    return os.str();
}

namespace detail {

inline std::vector<double> split_numbers(const std::string& s, std::size_t expected, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ';')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InputError(what + ": not a number '" + item + "'");
        }
    }
    if (out.size() != expected)
        throw InputError(what + ": expected " + std::to_string(expected) + " values, got " + std::to_string(out.size()));
    return out;
}

}  // namespace detail

/// Custom scenarios, one per line:
///   id,generator,p1;p2;p3,a1;a2;a3;a4,N
/// A header line starting with "id" and '#' comments are skipped.
inline std::vector<Scenario> parse_scenarios(std::istream& in) {
    std::vector<Scenario> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#' || line.rfind("id,", 0) == 0) continue;
        const std::string where = "line " + std::to_string(line_no);
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ',')) f.push_back(item);
        if (f.size() != 5) throw InputError(where + ": expected 5 fields");
        Scenario s;
        s.id = f[0];
        const auto gen = parse_model_id(f[1]);
        if (!gen) throw InputError(where + ": unknown generator '" + f[1] + "'");
        s.generator = *gen;
        const auto p = detail::split_numbers(f[2], 3, where + " p");
        const auto a = detail::split_numbers(f[3], 4, where + " alpha");
        std::copy(p.begin(), p.end(), s.p.begin());
        std::copy(a.begin(), a.end(), s.alpha.begin());
        try {
            std::size_t used = 0;
            s.n = std::stoll(f[4], &used);
            if (used != f[4].size()) throw std::invalid_argument(f[4]);
        } catch (const std::exception&) {
            throw InputError(where + ": N is not an integer");
        }
        try {
            validate(s);
        } catch (const Error& e) {
            throw InputError(where + ": " + e.what());
        }
        out.push_back(s);
    }
    if (out.empty()) throw InputError("scenario file contains no scenarios");
    return out;
}

inline std::vector<Scenario> read_scenarios(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open scenario file: " + path);
    return parse_scenarios(in);
}

}  // namespace triplemark::sim
