#pragma once

// Domain types for triple-record-system data: capture profiles, the
// incomplete 2x2x2 table of observed counts, cell distributions and the
// uniform fit report shared by every model.

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "triplemark/error.hpp"

namespace triplemark {

/// Capture status (i, j, k) in lists 1, 2 and 3.
struct CaptureProfile {
    std::uint8_t i = 0;
    std::uint8_t j = 0;
    std::uint8_t k = 0;

    constexpr CaptureProfile() = default;
    constexpr CaptureProfile(int i_, int j_, int k_)
        : i(static_cast<std::uint8_t>(i_)), j(static_cast<std::uint8_t>(j_)),
          k(static_cast<std::uint8_t>(k_)) {
        if (i_ < 0 || i_ > 1 || j_ < 0 || j_ > 1 || k_ < 0 || k_ > 1)
            throw ConstraintViolation("capture indicators must be 0 or 1");
    }

    constexpr bool observable() const noexcept { return i + j + k > 0; }

    /// Position in the fixed serialization order 111,110,101,100,011,010,001,000.
    constexpr std::size_t index() const noexcept {
        return 7u - static_cast<std::size_t>(4 * i + 2 * j + k);
    }

    std::string label() const {
        return {static_cast<char>('0' + i), static_cast<char>('0' + j),
                static_cast<char>('0' + k)};
    }

    friend constexpr bool operator==(const CaptureProfile&, const CaptureProfile&) = default;
};

inline constexpr std::size_t kObservedCells = 7;
inline constexpr std::size_t kAllCells = 8;

/// Profile at position `idx` of the fixed order (111 first, 000 last).
constexpr CaptureProfile profile_at(std::size_t idx) {
    const int code = 7 - static_cast<int>(idx);
    return CaptureProfile((code >> 2) & 1, (code >> 1) & 1, code & 1);
}

inline constexpr std::size_t kUnobservedIndex = 7;

/// Parse a 3-character binary cell label ("101").
inline std::optional<CaptureProfile> parse_profile(std::string_view label) {
    if (label.size() != 3) return std::nullopt;
    int bits[3];
    for (std::size_t n = 0; n < 3; ++n) {
        if (label[n] != '0' && label[n] != '1') return std::nullopt;
        bits[n] = label[n] - '0';
    }
    return CaptureProfile(bits[0], bits[1], bits[2]);
}

/// The seven observed counts of a triple record system. The (0,0,0) cell is
/// not representable.
class TripleRecordTable {
public:
    using Counts = std::array<std::int64_t, kObservedCells>;

    TripleRecordTable() { counts_.fill(0); }

    /// Counts in the fixed order 111,110,101,100,011,010,001.
    explicit TripleRecordTable(const Counts& counts, std::string label = {})
        : counts_(counts), label_(std::move(label)) {
        for (std::size_t n = 0; n < kObservedCells; ++n)
            if (counts_[n] < 0)
                throw InputError("cell " + profile_at(n).label() + " has a negative count");
    }

    std::int64_t count(CaptureProfile p) const {
        if (!p.observable()) throw DomainError("the 000 cell is never observed");
        return counts_[p.index()];
    }
    std::int64_t count(int i, int j, int k) const { return count(CaptureProfile(i, j, k)); }

    const Counts& counts() const noexcept { return counts_; }
    const std::string& label() const noexcept { return label_; }
    void set_label(std::string label) { label_ = std::move(label); }

    /// x0: number of distinct captured individuals.
    std::int64_t total() const noexcept {
        std::int64_t s = 0;
        for (auto c : counts_) s += c;
        return s;
    }

    TripleRecordTable scaled(std::int64_t factor) const {
        Counts c = counts_;
        for (auto& v : c) v *= factor;
        return TripleRecordTable(c, label_);
    }

    friend bool operator==(const TripleRecordTable& a, const TripleRecordTable& b) {
        return a.counts_ == b.counts_;
    }

private:
    Counts counts_;
    std::string label_;
};

inline std::int64_t table_total(const TripleRecordTable& table) { return table.total(); }

/// Dot-sum margins keyed by pattern, e.g. "1.." or ".11". Margins whose
/// pattern covers the unobserved 000 cell are std::nullopt.
using MarginMap = std::map<std::string, std::optional<std::int64_t>>;

inline MarginMap margins(const TripleRecordTable& table) {
    MarginMap out;
    const char symbols[3] = {'0', '1', '.'};
    for (char a : symbols)
        for (char b : symbols)
            for (char c : symbols) {
                const std::string pattern{a, b, c};
                const int dots = (a == '.') + (b == '.') + (c == '.');
                if (dots == 0) continue;  // single cells, not margins
                bool covers_zero = true;
                for (char s : pattern)
                    if (s == '1') covers_zero = false;
                if (covers_zero) {
                    out[pattern] = std::nullopt;
                    continue;
                }
                std::int64_t sum = 0;
                for (std::size_t n = 0; n < kObservedCells; ++n) {
                    const auto p = profile_at(n);
                    const int bits[3] = {p.i, p.j, p.k};
                    bool match = true;
                    for (int d = 0; d < 3; ++d)
                        if (pattern[d] != '.' && pattern[d] - '0' != bits[d]) match = false;
                    if (match) sum += table.counts()[n];
                }
                out[pattern] = sum;
            }
    return out;
}

/// Probabilities of all eight capture profiles, in the fixed order.
class CellDistribution {
public:
    using Probs = std::array<double, kAllCells>;

    static constexpr double kSumTolerance = 1e-12;

    explicit CellDistribution(const Probs& probs) : probs_(probs) {
        double s = 0.0;
        for (std::size_t n = 0; n < kAllCells; ++n) {
            if (!(probs_[n] >= 0.0 && probs_[n] <= 1.0))
                throw ConstraintViolation("cell probability p" + profile_at(n).label() +
                                          " outside [0,1]");
            s += probs_[n];
        }
        if (std::abs(s - 1.0) > kSumTolerance)
            throw ConstraintViolation("cell probabilities do not sum to 1");
    }

    double operator[](std::size_t idx) const { return probs_[idx]; }
    double prob(CaptureProfile p) const { return probs_[p.index()]; }
    double prob(int i, int j, int k) const { return prob(CaptureProfile(i, j, k)); }
    double unobserved() const { return probs_[kUnobservedIndex]; }
    const Probs& probs() const noexcept { return probs_; }

private:
    Probs probs_;
};

enum class ModelId { tbm1, tbm2, llm1, llm2, mtb, mt };

inline constexpr std::array<ModelId, 6> kAllModels = {ModelId::tbm1, ModelId::tbm2, ModelId::llm1,
                                                      ModelId::llm2, ModelId::mtb,  ModelId::mt};

inline std::string to_string(ModelId id) {
    switch (id) {
        case ModelId::tbm1: return "tbm1";
        case ModelId::tbm2: return "tbm2";
        case ModelId::llm1: return "llm1";
        case ModelId::llm2: return "llm2";
        case ModelId::mtb: return "mtb";
        case ModelId::mt: return "mt";
    }
    return "?";
}

/// Display name for tables ("TBM-1", "M_tb", ...).
inline std::string display_name(ModelId id) {
    switch (id) {
        case ModelId::tbm1: return "TBM-1";
        case ModelId::tbm2: return "TBM-2";
        case ModelId::llm1: return "LLM-1";
        case ModelId::llm2: return "LLM-2";
        case ModelId::mtb: return "M_tb";
        case ModelId::mt: return "M_t";
    }
    return "?";
}

inline std::optional<ModelId> parse_model_id(std::string_view s) {
    std::string lower;
    for (char c : s)
        if (c != '-' && c != '_') lower.push_back(static_cast<char>(std::tolower(c)));
    for (auto id : kAllModels)
        if (lower == to_string(id)) return id;
    return std::nullopt;
}

/// Uniform result of fitting any model to a table.
struct FitReport {
    ModelId model = ModelId::tbm1;
    std::int64_t x0 = 0;
    double n_hat = 0.0;
    std::vector<std::pair<std::string, double>> params;  // stable order

    std::optional<double> se_n;
    std::optional<double> rase;
    std::optional<double> aci_low;
    std::optional<double> aci_high;
    std::string se_unavailable_reason;

    double deviance = 0.0;    // G^2 against the saturated observed-cell fit
    double neg2loglik = 0.0;  // raw -2 log L, multinomial constant dropped
    double aic = 0.0;         // deviance + 2 * n_free_params
    int n_free_params = 0;

    bool converged = false;
    long n_evals = 0;
    std::vector<std::string> diagnostics;

    std::optional<double> param(std::string_view name) const {
        for (const auto& [k, v] : params)
            if (k == name) return v;
        return std::nullopt;
    }
};

/// Integer display of an estimate. Truncates toward zero.
inline long long display_integer(double value) { return static_cast<long long>(std::trunc(value)); }

// ---------------------------------------------------------------------------
// CSV format: header "cell,count", one row per observable cell label.

inline TripleRecordTable parse_table_csv(std::istream& in, std::string label = {}) {
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return std::string{};
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    };

    TripleRecordTable::Counts counts{};
    std::array<bool, kObservedCells> seen{};
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != "cell,count")
                throw InputError("line " + std::to_string(line_no) +
                                 ": expected header 'cell,count'");
            header_seen = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw InputError("line " + std::to_string(line_no) + ": expected 'cell,count'");
        const std::string cell = trim(line.substr(0, comma));
        const std::string value = trim(line.substr(comma + 1));
        const auto profile = parse_profile(cell);
        if (!profile)
            throw InputError("line " + std::to_string(line_no) + ": unknown cell label '" + cell + "'");
        if (!profile->observable())
            throw InputError("line " + std::to_string(line_no) + ": the 000 cell cannot be observed");
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(value, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != value.size() || v < 0)
            throw InputError("line " + std::to_string(line_no) + ": invalid count '" + value + "'");
        const auto idx = profile->index();
        if (seen[idx])
            throw InputError("line " + std::to_string(line_no) + ": duplicate cell " + cell);
        seen[idx] = true;
        counts[idx] = v;
    }
    if (!header_seen) throw InputError("line 1: expected header 'cell,count'");
    for (std::size_t n = 0; n < kObservedCells; ++n)
        if (!seen[n]) throw InputError("missing row for cell " + profile_at(n).label());
    return TripleRecordTable(counts, std::move(label));
}

inline TripleRecordTable read_table_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    auto stem = path.substr(path.find_last_of("/\\") + 1);
    if (auto dot = stem.rfind('.'); dot != std::string::npos) stem.resize(dot);
    return parse_table_csv(in, stem);
}

inline void render_table_csv(std::ostream& out, const TripleRecordTable& table) {
    out << "cell,count\n";
    for (std::size_t n = 0; n < kObservedCells; ++n)
        out << profile_at(n).label() << ',' << table.counts()[n] << '\n';
}

inline std::string render_table_csv(const TripleRecordTable& table) {
    std::ostringstream os;
    render_table_csv(os, table);
    return os.str();
}

}  // namespace triplemark
