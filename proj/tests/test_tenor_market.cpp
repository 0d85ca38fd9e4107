#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cdomm/csv.hpp"
#include "cdomm/tenor_market.hpp"

using namespace cdomm;

namespace {

MarketSnapshot flat_snapshot(std::vector<double> P, int levels) {
    MarketSnapshot s;
    s.P = P;
    for (double p : P) s.Px.push_back(std::vector<double>(levels, p));
    return s;
}

bool has_rule(const ValidationReport& r, const std::string& rule, int k) {
    for (const auto& v : r.violations)
        if (v.rule == rule && v.k == k) return true;
    return false;
}

} // namespace

TEST(Tenor, RejectsBadDates) {
    EXPECT_THROW(TenorStructure({0.0}), DataError);
    EXPECT_THROW(TenorStructure({0.5, 1.0}), DataError);
    EXPECT_THROW(TenorStructure({0.0, 1.0, 1.0}), DataError);
    TenorStructure t({0.0, 0.5, 1.5});
    EXPECT_EQ(t.n(), 2);
    EXPECT_DOUBLE_EQ(t.delta(1), 1.0);
    EXPECT_EQ(t.front(0.0), 1);
    EXPECT_EQ(t.front(0.5), 2);
    EXPECT_EQ(t.front(1.5), 3);
}

TEST(LevelGridTest, MustContainOne) {
    EXPECT_THROW(LevelGrid({0.1, 0.5}), DataError);
    EXPECT_THROW(LevelGrid({0.5, 0.1, 1.0}), DataError);
    LevelGrid g({0.1, 1.0});
    auto r = g.refined(0.03, 0.07);
    EXPECT_EQ(r.size(), 4);
    EXPECT_DOUBLE_EQ(r[0], 0.03);
}

TEST(Snapshot, DegeneratePoolIsValid) {
    TenorStructure t({0.0, 1.0, 2.0, 3.0});
    LevelGrid g({1.0});
    auto r = validate_snapshot(flat_snapshot({1.0, 0.99, 0.97, 0.94}, 1), t, g);
    EXPECT_TRUE(r.ok());
}

TEST(Snapshot, RiskFreeOrderingViolation) {
    TenorStructure t({0.0, 1.0, 2.0});
    LevelGrid g({1.0});
    auto r = validate_snapshot(flat_snapshot({1.0, 0.97, 0.98}, 1), t, g);
    EXPECT_TRUE(has_rule(r, "A3", 1));
}

TEST(Snapshot, ForwardPriceMustNotIncrease) {
    TenorStructure t({0.0, 1.0, 2.0});
    LevelGrid g({0.5, 1.0});
    MarketSnapshot s = flat_snapshot({1.0, 0.99, 0.97}, 2);
    s.Px[1][0] = 0.95 * 0.99;
    s.Px[2][0] = 0.96 * 0.97;
    auto r = validate_snapshot(s, t, g);
    EXPECT_TRUE(has_rule(r, "A6", 1));
}

TEST(Snapshot, HoleIsDataError) {
    TenorStructure t({0.0, 1.0});
    LevelGrid g({1.0});
    MarketSnapshot s = flat_snapshot({1.0, 0.99}, 1);
    s.Px[1].clear();
    EXPECT_THROW(validate_snapshot(s, t, g), DataError);
}

TEST(InitialCurves, Libor) {
    TenorStructure t({0.0, 0.5, 1.0});
    MarketSnapshot s = flat_snapshot({1.0, 0.95, 0.95}, 1);
    EXPECT_DOUBLE_EQ(initial_libor(s, t, 1), 0.0);

    TenorStructure t1({0.0, 1.0});
    EXPECT_NEAR(initial_libor(flat_snapshot({1.0, 0.99}, 1), t1, 0), 1.0 / 99.0, 1e-15);

    TenorStructure tq({0.0, 0.25});
    EXPECT_NEAR(initial_libor(flat_snapshot({0.98, 0.97}, 1), tq, 0), (0.98 / 0.97 - 1.0) * 4.0, 1e-15);
    EXPECT_NEAR(initial_libor(flat_snapshot({0.98, 0.97}, 1), tq, 0), 0.0412371, 1e-7);
}

TEST(InitialCurves, Spread) {
    TenorStructure t({0.0, 0.5, 1.0});
    LevelGrid g({0.2, 1.0});
    MarketSnapshot s = flat_snapshot({1.0, 0.98, 0.96}, 2);
    s.Px[1][0] = 0.98 * 0.95;
    s.Px[2][0] = 0.96 * 0.90;
    EXPECT_NEAR(initial_spread(s, t, 1, 0), 1.0 / 9.0, 1e-14);
    EXPECT_DOUBLE_EQ(initial_spread(s, t, 1, 1), 0.0);
    s.Px[2][0] = 0.96 * 0.95;
    EXPECT_NEAR(initial_spread(s, t, 1, 0), 0.0, 1e-15);
}

TEST(InitialCurves, BandIntegralOfStepFunction) {
    TenorStructure t({0.0, 1.0});
    LevelGrid g({0.0, 0.1, 0.3, 1.0});
    MarketSnapshot s;
    s.P = {1.0, 0.9};
    s.Px = {{1, 1, 1, 1}, {0.5, 0.6, 0.8, 0.9}};
    // [0.05,0.1) at 0.5, [0.1,0.3) at 0.6, [0.3,0.4] at 0.8
    EXPECT_NEAR(band_integral(s, g, 1, 0.05, 0.4), 0.05 * 0.5 + 0.2 * 0.6 + 0.1 * 0.8, 1e-15);
}

TEST(Csv, HeaderAndLineNumbers) {
    std::istringstream in("T,P\n# comment\n0,1\n\n1,0.99\n");
    auto tab = csv::parse(in, "rf.csv", {"T", "P"});
    ASSERT_EQ(tab.rows.size(), 2u);
    EXPECT_EQ(tab.line_of_row[1], 5);
    std::istringstream bad("T,Q\n0,1\n");
    EXPECT_THROW(csv::parse(bad, "rf.csv", {"T", "P"}), DataError);
    std::istringstream nan("T,P\n0,nan\n");
    EXPECT_THROW(csv::parse(nan, "rf.csv", {"T", "P"}), DataError);
    std::istringstream neg("T,P\n0,-1\n");
    EXPECT_THROW(csv::parse(neg, "rf.csv", {"T", "P"}), DataError);
    std::istringstream shortrow("T,P\n0\n");
    EXPECT_THROW(csv::parse(shortrow, "rf.csv", {"T", "P"}), DataError);
}

TEST(Csv, SnapshotFillsTopColumnAndReportsHoles) {
    TenorStructure t({0.0, 1.0, 2.0});
    LevelGrid g({0.1, 1.0});
    std::istringstream rf("T,P\n1,0.98\n2,0.95\n");
    std::istringstream df("T,x,P\n1,0.1,0.97\n2,0.1,0.93\n");
    auto s = snapshot_from_tables(csv::parse(rf, "rf", {"T", "P"}), csv::parse(df, "df", {"T", "x", "P"}), t, g);
    EXPECT_DOUBLE_EQ(s.P[0], 1.0);
    EXPECT_DOUBLE_EQ(s.Px[2][1], 0.95);
    EXPECT_TRUE(validate_snapshot(s, t, g).ok());

    std::istringstream rf2("T,P\n1,0.98\n2,0.95\n");
    std::istringstream df2("T,x,P\n1,0.1,0.97\n");
    try {
        snapshot_from_tables(csv::parse(rf2, "rf", {"T", "P"}), csv::parse(df2, "df", {"T", "x", "P"}), t, g);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("(2,0.1)"), std::string::npos) << e.what();
    }
}
