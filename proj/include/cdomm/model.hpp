#pragma once

#include <string>
#include <vector>

#include "cdomm/driver.hpp"
#include "cdomm/errors.hpp"
#include "cdomm/rates.hpp"
#include "cdomm/tenor_market.hpp"

namespace cdomm {

// How the spread drifts b(s,T_i,x) are chosen.
// Consistent: solved so that one b^P(s,x) satisfies the drift condition for every maturity.
// User: b is given and b^P(s,T_k,x) is solved separately for each maturity.
enum class SpreadDriftMode { Consistent, User };

inline const char* to_string(SpreadDriftMode m) { return m == SpreadDriftMode::Consistent ? "consistent" : "user"; }

struct Model {
    TenorStructure tenor;
    LevelGrid grid;
    MarketSnapshot snap;
    DriverSpec driver;
    VolStructure vols;
    SpreadDriftMode mode = SpreadDriftMode::Consistent;
    std::vector<std::vector<double>> user_b; // [i][level], constant in time, user mode only

    // Initial term structures from the snapshot.
    std::vector<double> L0;              // L(0,T_k), k = 0..n-1
    std::vector<std::vector<double>> h0; // h(0,T_k,x), [k][level]

    int n() const { return tenor.n(); }
    int levels() const { return grid.size(); }

    // Checks shapes, computes the initial curves and hands the level grid and contagion breaks to
    // the driver so that quadrature pieces align with every loss crossing.
    void finalize() {
        driver.validate();
        validate_snapshot(snap, tenor, grid);
        require_data(vols.d == driver.d, "volatility dimension does not match the driver");
        require_data(static_cast<int>(vols.sigma.size()) == n(), "sigma must be given for every tenor date T_0..T_{n-1}");
        for (const auto& row : vols.gamma)
            require_data(static_cast<int>(row.size()) == levels(), "gamma must be given for every loss level");
        for (const auto& row : vols.contagion)
            require_data(static_cast<int>(row.size()) == levels(), "contagion must be given for every loss level");
        if (mode == SpreadDriftMode::User) {
            if (user_b.empty()) user_b.assign(n(), std::vector<double>(levels(), 0.0));
            require_data(static_cast<int>(user_b.size()) == n(), "spread drifts must be given for every tenor");
            for (const auto& row : user_b)
                require_data(static_cast<int>(row.size()) == levels(), "spread drifts must be given for every level");
        }
        L0.assign(n(), 0.0);
        h0.assign(n(), std::vector<double>(levels(), 0.0));
        for (int k = 0; k < n(); ++k) {
            L0[k] = initial_libor(snap, tenor, k);
            for (int j = 0; j < levels(); ++j) h0[k][j] = initial_spread(snap, tenor, k, j);
        }
        driver.level_breaks.assign(grid.levels().begin(), grid.levels().end());
        driver.mark_breaks = vols.mark_breaks();
    }

    // Every condition on the inputs, as a list of violations.
    ValidationReport validate() const {
        ValidationReport r = validate_snapshot(snap, tenor, grid);
        const ValidationReport v = vols.validate(tenor, grid);
        r.violations.insert(r.violations.end(), v.violations.begin(), v.violations.end());
        return r;
    }
};

} // namespace cdomm
