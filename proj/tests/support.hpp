#pragma once

#include <array>
#include <cmath>
#include <random>
#include <string>

#include "triplemark/triplemark.hpp"

namespace tmtest {

using triplemark::TripleRecordTable;

inline TripleRecordTable malaria() { return TripleRecordTable({123, 127, 94, 189, 37, 41, 54}, "malaria"); }
inline TripleRecordTable renters_r2() { return TripleRecordTable({58, 69, 12, 41, 11, 34, 43}, "renters_r2"); }
inline TripleRecordTable renters_r3() { return TripleRecordTable({72, 69, 7, 32, 13, 13, 43}, "renters_r3"); }

inline std::string data_path(const std::string& name) { return std::string(TRIPLEMARK_DATA_DIR) + "/" + name; }

// Hand-expanded cell probabilities in the order 111,110,101,100,011,010,001,000.
// Valid for any alpha vector; terms vanish where a class cannot produce a cell.
inline std::array<double, 8> oracle_cells(const std::array<double, 3>& p, const std::array<double, 4>& a) {
    const double p1 = p[0], p2 = p[1], p3 = p[2];
    const double q1 = 1 - p1, q2 = 1 - p2, q3 = 1 - p3;
    const double a1 = a[0], a2 = a[1], a3 = a[2], a4 = a[3];
    const double b = 1 - (a1 + a2 + a3 + a4);
    return {
        b * p1 * p2 * p3 + a1 * p1 * p3 + a2 * p1 * p2 + a3 * p1 * p2 + a4 * p1,
        b * p1 * p2 * q3 + a1 * p1 * q3,
        b * p1 * q2 * p3 + a3 * p1 * q2,
        b * p1 * q2 * q3 + a2 * p1 * q2,
        b * q1 * p2 * p3 + a2 * q1 * p2,
        b * q1 * p2 * q3 + a3 * q1 * p2,
        b * q1 * q2 * p3 + a1 * q1 * p3,
        b * q1 * q2 * q3 + a1 * q1 * q3 + a2 * q1 * q2 + a3 * q1 * q2 + a4 * q1,
    };
}

// Random admissible TBM parameters; `zero` (0..3) forces that alpha to 0, -1 keeps all.
inline triplemark::tbm::TbmParams random_params(std::mt19937_64& rng, int zero = -1) {
    std::uniform_real_distribution<double> u(0.02, 0.98);
    std::gamma_distribution<double> g(1.0, 1.0);
    triplemark::tbm::TbmParams t;
    t.n = 1000;
    std::array<double, 5> w{};
    double s = 0;
    for (auto& v : w) s += (v = g(rng));
    for (int k = 0; k < 4; ++k) t.alpha[k] = (k == zero) ? 0.0 : w[k + 1] / s;
    for (auto& q : t.p) q = u(rng);
    return t;
}

}  // namespace tmtest
