#include <gtest/gtest.h>

#include <cmath>

#include "cdomm/diagnostics.hpp"
#include "fixtures.hpp"

using namespace cdomm;

namespace {

Model single_name(SpreadDriftMode mode) {
    DriverSpec drv = fx::diffusion_driver(1.0, 2.0);
    drv.jumps.push_back(fx::loss_jump(0.05, 1.0, 2.0));
    Model m = fx::make_model({0.0, 0.5, 1.0, 1.5, 2.0}, {0.0}, 0.03, {0.02}, drv, fx::vec({0.2, 0}),
                             fx::vec({0.3, 0}), 0.0);
    m.mode = mode;
    m.finalize();
    return m;
}

} // namespace

TEST(Diagnostics, ExpTransformDiscrepancyIsFirstOrder) {
    const auto d = exp_transform_discrepancy({}, {1.0 / 50, 1.0 / 100, 1.0 / 200}, 500, 3);
    ASSERT_EQ(d.size(), 3u);
    for (int i = 0; i < 2; ++i) {
        EXPECT_GT(d[i] / d[i + 1], 2.0 / 1.5);
        EXPECT_LT(d[i] / d[i + 1], 2.0 * 1.5);
    }
    // without volatility and jumps both schemes solve the same linear ODE
    ExpTransformCase flat;
    flat.sigma = 0.0;
    flat.rates = {};
    flat.sizes = {};
    const auto z = exp_transform_discrepancy(flat, {0.1}, 1, 1);
    EXPECT_GT(z[0], 0.0);
    EXPECT_LT(z[0], 1e-4);
    EXPECT_THROW(exp_transform_discrepancy({}, {0.02, 0.03}, 1, 1), ContractViolation);
}

TEST(Diagnostics, SingleNameDegenerateCase) {
    const Model m = single_name(SpreadDriftMode::Consistent);
    Engine eng(m, {0.05});
    const SingleNameReport r = single_name_check(eng, {4000, 8, true, 1});
    EXPECT_LE(r.max_abs_D, 1e-12);
    for (const auto& c : r.product) EXPECT_TRUE(c.ok(3.0)) << c.k << " " << c.max_z();

    // with zero spread drifts and gamma != 0 the product has a drift term
    const Model u = single_name(SpreadDriftMode::User);
    Engine eu(u, {0.05});
    EXPECT_GT(single_name_check(eu, {200, 8, true, 1}).max_abs_D, 1e-4);
}

TEST(Diagnostics, SingleNameNeedsZeroContagion) {
    DriverSpec drv = fx::diffusion_driver(1.0, 1.0);
    drv.jumps.push_back(fx::loss_jump(0.05, 1.0, 1.0));
    const Model m = fx::make_model({0.0, 0.5, 1.0}, {0.0}, 0.03, {0.02}, drv, fx::vec({0.2, 0}), fx::vec({0.3, 0}), 0.1);
    Engine eng(m, {0.05});
    EXPECT_THROW(single_name_check(eng, {10, 1, true, 1}), DataError);
}

TEST(Diagnostics, LossCompensationWithStateDependentKernel) {
    DriverSpec drv = fx::diffusion_driver(0.0, 2.0);
    drv.jumps.push_back(fx::loss_jump(0.8, 0.05, 2.0, 4.0));
    const Model m = fx::make_model({0.0, 1.0, 2.0}, {0.04, 0.12}, 0.0, {0.05, 0.01}, drv, fx::vec({0, 0}),
                                   fx::vec({0, 0}), 0.0);
    Engine eng(m, {0.05});
    const auto cells = loss_compensation(eng, {20000, 21, false, 1});
    ASSERT_EQ(cells.size(), 3u);
    for (const auto& c : cells) EXPECT_TRUE(c.ok(3.0)) << c.level << " " << c.max_z();
    EXPECT_EQ(cells.back().level, -1);
}

TEST(Diagnostics, DriftReportResiduals) {
    DriverSpec drv = fx::diffusion_driver(0.04, 1.5);
    drv.jumps.push_back(fx::joint_jump(1.0, {1, 1}, {{0.1, 0.0}, {0.2, 0.1}}, 1.5));
    const Model m = fx::make_model({0.0, 0.5, 1.0, 1.5}, {0.05, 0.2}, 0.03, {0.04, 0.01}, drv, fx::vec({0.2, 0}),
                                   fx::vec({0.1, 0}), 0.1);
    Engine eng(m, {0.05});
    const DriftReport r = drift_report(eng, {2000, 4, true, 1});
    EXPECT_EQ(r.cells.size(), 6u);
    EXPECT_LE(r.max_residual, 1e-12);
    for (const auto& c : r.cells) {
        EXPECT_EQ(c.drift.at.size(), static_cast<std::size_t>(c.k + 1));
        EXPECT_NEAR(c.drift.at[0].mean, c.drift.target, 1e-12);
    }
}

TEST(Diagnostics, MartingaleCellScoring) {
    MartingaleCell c;
    c.target = 1.0;
    c.at = {{1.0, 0.0, 10}, {1.01, 0.01, 10}};
    EXPECT_NEAR(c.max_z(), 1.0, 1e-12);
    c.at.push_back({1.1, 0.0, 10});
    EXPECT_FALSE(c.ok(3.0));
}
