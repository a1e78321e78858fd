#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace triplemark;

TEST(CaptureProfile, IndexFollowsFixedOrder) {
    const char* order[8] = {"111", "110", "101", "100", "011", "010", "001", "000"};
    for (std::size_t n = 0; n < 8; ++n) {
        const auto p = profile_at(n);
        EXPECT_EQ(p.label(), order[n]);
        EXPECT_EQ(p.index(), n);
        EXPECT_EQ(parse_profile(order[n])->index(), n);
    }
    EXPECT_FALSE(CaptureProfile(0, 0, 0).observable());
    EXPECT_THROW(CaptureProfile(2, 0, 0), ConstraintViolation);
    EXPECT_FALSE(parse_profile("12a"));
}

TEST(Table, TotalAndCounts) {
    const auto t = tmtest::malaria();
    EXPECT_EQ(t.total(), 665);
    EXPECT_EQ(t.count(1, 0, 1), 94);
    EXPECT_THROW(t.count(0, 0, 0), DomainError);
    EXPECT_THROW(TripleRecordTable({1, 2, 3, -1, 0, 0, 0}), InputError);
}

TEST(Table, MarginsMatchHandSums) {
    const auto m = margins(tmtest::malaria());
    EXPECT_EQ(*m.at("1.."), 123 + 127 + 94 + 189);
    EXPECT_EQ(*m.at(".1."), 123 + 127 + 37 + 41);
    EXPECT_EQ(*m.at("..1"), 123 + 94 + 37 + 54);
    EXPECT_EQ(*m.at("11."), 250);
    EXPECT_EQ(*m.at("01."), 78);
    EXPECT_EQ(*m.at(".01"), 94 + 54);
    EXPECT_FALSE(m.at("0..").has_value());
    EXPECT_FALSE(m.at("00.").has_value());
    EXPECT_FALSE(m.count("101"));
}

TEST(Table, ScalingIsLinear) {
    const auto t = tmtest::renters_r2();
    const auto s = t.scaled(3);
    EXPECT_EQ(s.total(), 3 * t.total());
    EXPECT_EQ(s.count(0, 1, 0), 3 * t.count(0, 1, 0));
}

TEST(Csv, RoundTrip) {
    const auto t = tmtest::renters_r3();
    std::istringstream in(render_table_csv(t));
    EXPECT_EQ(parse_table_csv(in), t);
}

TEST(Csv, BundledFilesMatchKnownCounts) {
    EXPECT_EQ(read_table_csv(tmtest::data_path("malaria.csv")), tmtest::malaria());
    EXPECT_EQ(read_table_csv(tmtest::data_path("renters_r2.csv")), tmtest::renters_r2());
    EXPECT_EQ(read_table_csv(tmtest::data_path("renters_r3.csv")), tmtest::renters_r3());
    EXPECT_EQ(read_table_csv(tmtest::data_path("malaria.csv")).label(), "malaria");
}

TEST(Csv, RowOrderAndCommentsAreFree) {
    std::istringstream in("# note\ncell,count\n001,7\n010,6\n011,5\n100,4\n101,3\n110,2\n111,1\n");
    const auto t = parse_table_csv(in);
    EXPECT_EQ(t.count(1, 1, 1), 1);
    EXPECT_EQ(t.count(0, 0, 1), 7);
}

namespace {

std::string csv_error(const std::string& text) {
    std::istringstream in(text);
    try {
        parse_table_csv(in);
    } catch (const InputError& e) {
        return e.what();
    }
    return "";
}

const std::string kRows = "111,1\n110,1\n101,1\n100,1\n011,1\n010,1\n";

}  // namespace

TEST(Csv, ErrorsNameTheLine) {
    EXPECT_NE(csv_error("cell,count\n" + kRows + "001,x\n").find("line 8"), std::string::npos);
    EXPECT_NE(csv_error("cell,count\n" + kRows + "000,3\n").find("000"), std::string::npos);
    EXPECT_NE(csv_error("cell,count\n" + kRows + "111,3\n").find("duplicate"), std::string::npos);
    EXPECT_NE(csv_error("cell,count\n" + kRows).find("missing row for cell 001"), std::string::npos);
    EXPECT_NE(csv_error("cell,count\n" + kRows + "002,1\n").find("unknown cell"), std::string::npos);
    EXPECT_NE(csv_error("cells,n\n").find("line 1"), std::string::npos);
    EXPECT_NE(csv_error("cell,count\n" + kRows + "001,-4\n").find("invalid count"), std::string::npos);
    EXPECT_NE(csv_error("").find("header"), std::string::npos);
}

TEST(Csv, MissingFile) { EXPECT_THROW(read_table_csv("/nonexistent/x.csv"), InputError); }

TEST(CellDistribution, Validates) {
    CellDistribution::Probs p{};
    p.fill(0.125);
    EXPECT_NO_THROW(CellDistribution{p});
    p[0] = 0.2;
    EXPECT_THROW(CellDistribution{p}, ConstraintViolation);
}

TEST(ModelId, ParsingIsLenient) {
    EXPECT_EQ(parse_model_id("TBM-1"), ModelId::tbm1);
    EXPECT_EQ(parse_model_id("llm2"), ModelId::llm2);
    EXPECT_EQ(parse_model_id("M_tb"), ModelId::mtb);
    EXPECT_FALSE(parse_model_id("tbm3"));
}

TEST(Display, TruncatesTowardZero) {
    EXPECT_EQ(display_integer(781.52), 781);
    EXPECT_EQ(display_integer(445.999), 445);
    EXPECT_EQ(display_integer(400.0), 400);
}

TEST(Multinomial, DropsOnlyTheConstant) {
    // Oracle: full multinomial log-pmf minus the sum of log x! over observed cells.
    const auto t = tmtest::malaria();
    const auto probs = tmtest::oracle_cells({0.6, 0.4, 0.5}, {0.1, 0.1, 0.0, 0.1});
    const double n = 900;
    double full = std::lgamma(n + 1) - std::lgamma(n - 665 + 1) + (n - 665) * std::log(probs[7]);
    for (std::size_t c = 0; c < 7; ++c) full += t.counts()[c] * std::log(probs[c]);
    EXPECT_NEAR(multinomial_log_likelihood(n, probs, t), full, 1e-9);
    EXPECT_THROW(multinomial_log_likelihood(600, probs, t), DomainError);
}

TEST(Multinomial, StirlingIsCloseForLargeN) {
    EXPECT_NEAR(log_factorial(1e6, LogFactorial::stirling) / log_factorial(1e6), 1.0, 1e-6);
    EXPECT_EQ(parse_log_factorial("stirling"), LogFactorial::stirling);
    EXPECT_FALSE(parse_log_factorial("gosper"));
}

TEST(Multinomial, SaturatedDevianceIsZero) {
    // Cell probabilities equal to the saturated fit give G2 = 0.
    const auto t = tmtest::renters_r2();
    const double n = 400, x0 = static_cast<double>(t.total());
    CellDistribution::Probs p{};
    for (std::size_t c = 0; c < 7; ++c) p[c] = t.counts()[c] / n;
    p[7] = 1 - x0 / n;
    EXPECT_NEAR(g2_deviance(t, n, p), 0.0, 1e-10);
    p[0] *= 0.9;
    p[7] += 0.1 * t.counts()[0] / n;
    EXPECT_GT(g2_deviance(t, n, p), 0.0);
}
