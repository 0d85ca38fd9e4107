#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cdomm/bootstrap.hpp"

using namespace cdomm;

namespace {

std::vector<Band> quarter_bands() { return {{0.0, 0.03}, {0.03, 0.07}, {0.07, 0.15}, {0.15, 1.0}}; }

// Band integrals of P(0,T,y) = P(0,T) exp(-s(y) T) with a spread decreasing in y, which is
// nonincreasing in T and gives nonnegative independence crossings.
BondSurface synthetic_surface(const std::vector<double>& mats, const std::vector<double>& P) {
    BondSurface b;
    b.init(mats, quarter_bands());
    for (std::size_t k = 1; k <= mats.size(); ++k)
        for (std::size_t i = 0; i < b.bands.size(); ++i) {
            const auto& band = b.bands[i];
            // int_lo^hi exp(-(0.2 - 0.15 y) T) dy in closed form
            const double T = mats[k - 1], a = 0.15 * T;
            const double integral = std::exp(-0.2 * T) * (std::exp(a * band.hi) - std::exp(a * band.lo)) / a;
            b.value[k][i] = P[k] * integral;
        }
    return b;
}

std::string write_tmp(const std::string& name, const std::string& body) {
    const auto p = std::filesystem::temp_directory_path() / ("cdomm_bs_" + name);
    std::ofstream(p) << body;
    return p.string();
}

} // namespace

TEST(Bootstrap, IndependenceCrossing) {
    BondSurface b;
    b.init({1.0, 2.0}, {{0.0, 1.0}});
    b.value[1][0] = 0.05;
    b.value[2][0] = 0.04;
    EXPECT_NEAR(independence_crossing(b, {1.0, 1.0, 1.0}, 1, 0), 0.01, 1e-17);
    // defaultable surface proportional to the risk-free curve
    const std::vector<double> P{1.0, 0.97, 0.94};
    b.value[1][0] = 0.5 * P[1];
    b.value[2][0] = 0.5 * P[2];
    EXPECT_NEAR(independence_crossing(b, P, 1, 0), 0.0, 1e-17);
    // full band [0,1] at x = 1 carries the risk-free bond price
    b.value[1][0] = P[1];
    b.value[2][0] = P[2];
    EXPECT_EQ(independence_crossing(b, P, 1, 0), 0.0);
}

TEST(Bootstrap, StepOne) {
    EXPECT_NEAR(bootstrap_step1(0.99, 0.03, 0.0005), 0.0292, 1e-16);
    EXPECT_EQ(bootstrap_step1(0.99, 0.03, 0.0), 0.03 * 0.99);
    EXPECT_EQ(bootstrap_step1(0.99, 0.03, 0.03 * 0.99), 0.0);
}

TEST(Bootstrap, AdvanceWithoutSpread) {
    BondSurface b;
    b.init({1.0, 2.0}, {{0.0, 1.0}});
    b.value[1][0] = 0.9;
    const std::vector<double> P{1.0, 0.98, 0.95};
    EXPECT_DOUBLE_EQ(bootstrap_advance(b, P, 0.0, 1, 0), 0.95 / 0.98 * 0.9);
}

TEST(Bootstrap, RoundTrip) {
    const std::vector<double> mats{1.0, 2.0, 3.0, 4.0, 5.0};
    std::vector<double> P{1.0};
    for (double T : mats) P.push_back(std::exp(-0.03 * T));
    const BondSurface truth = synthetic_surface(mats, P);
    const QuoteSurface q = quotes_from_surface(truth, P);
    const BondSurface back = bootstrap(q);
    for (int k = 1; k <= 5; ++k)
        for (int i = 0; i < 4; ++i) EXPECT_NEAR(back.value[k][i], truth.value[k][i], 1e-10) << k << "," << i;
    EXPECT_FALSE(back.flagged());

    const auto rt = implied_band_rates(truth);
    const auto rb = implied_band_rates(back);
    for (int k = 1; k < 5; ++k)
        for (int i = 0; i < 4; ++i) EXPECT_NEAR(rb[k][i].rate, rt[k][i].rate, 1e-8);
}

TEST(Bootstrap, ZeroRateShortcutAgrees) {
    const std::vector<double> mats{1.0, 2.0, 3.0, 4.0, 5.0};
    const std::vector<double> P(6, 1.0);
    const BondSurface truth = synthetic_surface(mats, P);
    QuoteSurface q = quotes_from_surface(truth, P);
    // validate() insists on a strictly decreasing curve, so compare the recursions directly
    BondSurface a, z;
    a.init(mats, q.bands);
    z.init(mats, q.bands);
    for (int i = 0; i < 4; ++i) a.value[1][i] = z.value[1][i] = bootstrap_step1(1.0, q.bands[i].width(), q.t1_legs[i]);
    for (int j = 1; j < 5; ++j)
        for (int i = 0; i < 4; ++i) {
            a.value[j + 1][i] = bootstrap_advance(a, P, q.spread[j + 1][i], j, i);
            z.value[j + 1][i] = bootstrap_advance_zero_rate(z, q.spread[j + 1][i], j, i);
            EXPECT_NEAR(a.value[j + 1][i], z.value[j + 1][i], 1e-12);
            EXPECT_NEAR(a.value[j + 1][i], truth.value[j + 1][i], 1e-10);
        }
}

TEST(Bootstrap, InconsistentQuotesAreFlagged) {
    QuoteSurface q;
    q.maturities = {1.0, 2.0};
    q.P = {1.0, 0.99, 0.97};
    q.bands = {{0.0, 0.5}, {0.5, 1.0}};
    q.t1_legs = {-0.01, 0.6};
    q.spread = {{}, {}, {0.0, 0.0}};
    const BondSurface b = bootstrap(q);
    EXPECT_NEAR(b.value[1][0], 0.5 * 0.99 + 0.01, 1e-15);
    auto has = [&](int k, int i, const std::string& f) {
        const auto& v = b.flags[k][i];
        return std::find(v.begin(), v.end(), f) != v.end();
    };
    EXPECT_TRUE(has(1, 0, "above-width"));
    EXPECT_TRUE(has(1, 1, "negative"));
    EXPECT_TRUE(b.flagged());
    std::ostringstream os;
    write_surface(os, b);
    EXPECT_NE(os.str().find("1,0,0.5,0.505,above-width"), std::string::npos) << os.str();
}

TEST(Bootstrap, WipedBandHasNoRate) {
    BondSurface b;
    b.init({1.0, 2.0, 3.0}, {{0.0, 0.5}, {0.5, 1.0}});
    b.value = {{}, {0.0, 0.45}, {0.0, 0.4}, {0.0, 0.35}};
    const auto r = implied_band_rates(b);
    EXPECT_TRUE(r[1][0].wiped);
    EXPECT_FALSE(r[1][1].wiped);
    EXPECT_NEAR(r[1][1].rate, 0.45 / 0.4 - 1.0, 1e-15);
}

TEST(Bootstrap, ReadQuotes) {
    const auto rf = write_tmp("rf.csv", "T,P\n0,1\n1,0.99\n2,0.97\n");
    const auto t1 = write_tmp("t1.csv", "band_lo,band_hi,value\n0.5,1,0\n0,0.5,0.01\n");
    const auto qs = write_tmp("q.csv", "maturity,band_lo,band_hi,spread\n2,0,0.5,0.02\n2,0.5,1,0.001\n");
    const QuoteSurface q = read_quotes(rf, t1, qs);
    EXPECT_EQ(q.maturities, (std::vector<double>{1.0, 2.0}));
    EXPECT_EQ(q.bands[0].hi, 0.5);
    EXPECT_EQ(q.t1_legs[0], 0.01);
    EXPECT_EQ(q.spread[2][1], 0.001);

    const auto missing = write_tmp("q2.csv", "maturity,band_lo,band_hi,spread\n2,0,0.5,0.02\n");
    EXPECT_THROW(read_quotes(rf, t1, missing), DataError);
    const auto offband = write_tmp("q3.csv", "maturity,band_lo,band_hi,spread\n2,0,0.4,0.02\n");
    try {
        read_quotes(rf, t1, offband);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
    }
}
