#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cdomm/engine.hpp"
#include "cdomm/errors.hpp"
#include "cdomm/mc.hpp"
#include "cdomm/tenor_market.hpp"

namespace cdomm {

// Single tranche CDO on consecutive tenor dates T_first..T_{first+m-1} with attachment x1,
// detachment x2 and per-period spread S.
struct STCDOSpec {
    std::vector<double> dates;
    double x1 = 0.0;
    double x2 = 1.0;
    double S = 0.0;

    int m() const { return static_cast<int>(dates.size()); }

    // Tenor index of the first date; throws DataError if the dates are not consecutive tenor dates.
    int first_index(const TenorStructure& tenor) const {
        require_data(m() >= 2, "tranche needs at least two dates");
        require_data(x1 >= 0.0 && x1 < x2 && x2 <= 1.0, "tranche needs 0 <= x1 < x2 <= 1");
        const int f = tenor.index_of(dates[0]);
        require_data(f >= 1, "tranche dates must be tenor dates after T_0");
        for (int i = 1; i < m(); ++i)
            require_data(tenor.index_of(dates[i]) == f + i, "tranche dates must be consecutive tenor dates");
        return f;
    }
};

// f(x) = (x2 - x)^+ - (x1 - x)^+, the integral over [x1,x2] of 1{x <= y} dy.
inline double tranche_payoff(double x, const STCDOSpec& s) {
    return std::max(s.x2 - x, 0.0) - std::max(s.x1 - x, 0.0);
}

// P(0,T_n) prod_{j=k}^{n-1} (1 + delta_j L(t,T_j)) = P(0,T_k) dQ_{T_k}/dQ_{T_n} on G_t.
inline double discounted_density(const PathState& st, const MarketSnapshot& snap, const TenorStructure& tenor, int k) {
    double v = snap.P[tenor.n()];
    for (int j = k; j < tenor.n(); ++j) v *= 1.0 + tenor.delta(j) * st.L[j];
    return v;
}

// P(0,T_k) E_{Q_{T_k}}[Y] for a payoff Y fixed at T_k, estimated as E*[Y P(0,T_n) prod (1 + delta L)].
inline mc::Estimate mc_estimate(const Engine& eng, const SimOptions& o, int k,
                                const std::function<double(const PathState&)>& payoff) {
    const Model& m = eng.model();
    require(k >= 1 && k <= m.n(), "mc_estimate: measure index out of range");
    // non-finite samples abort in mc::run with the path index
    auto acc = simulate(eng, o, 1, [&](const PathRecord& r, double* out) {
        out[0] += payoff(r.at[k]) * discounted_density(r.at[k], m.snap, m.tenor, k);
    });
    return acc.get(0);
}

// e(0,T_{k+1},x_j) for k = 0..n-1 and every grid level, in the indicator form and in the
// defaultable-forward form, with the estimate of their difference.
struct CrossingValues {
    std::vector<std::vector<mc::Estimate>> indicator; // [k][level]
    std::vector<std::vector<mc::Estimate>> lemma;
    std::vector<std::vector<mc::Estimate>> diff;
    std::vector<std::vector<long>> crossings;         // paths with a crossing in (T_k, T_{k+1}]
};

// Pathwise samples of both forms. Statistic layout: [k][level][form], form 0 indicator, 1 lemma,
// 2 difference, 3 crossing indicator.
inline void crossing_samples(const Model& m, const PathRecord& r, double* out) {
    const int n = m.n(), nl = m.levels();
    for (int k = 0; k < n; ++k) {
        const PathState& a = r.at[k];
        const PathState& b = r.at[k + 1];
        const double Db = discounted_density(b, m.snap, m.tenor, k + 1);
        const double Da = discounted_density(a, m.snap, m.tenor, k + 1);
        for (int j = 0; j < nl; ++j) {
            const double x = m.grid[j];
            const double ind = Db * ((alive(a.A, x) ? 1.0 : 0.0) - (alive(b.A, x) ? 1.0 : 0.0));
            const double lem =
                m.tenor.delta(k) * Da * a.F(m.tenor, m.grid, k + 1, j) * credit_spread_H(a.h[j][k], a.A, x);
            double* o = out + (static_cast<std::size_t>(k) * nl + j) * 4;
            o[0] += ind;
            o[1] += lem;
            o[2] += ind - lem;
            o[3] += (alive(a.A, x) && !alive(b.A, x)) ? 1.0 : 0.0;
        }
    }
}

inline CrossingValues crossing_values(const Engine& eng, const SimOptions& o) {
    const Model& m = eng.model();
    const int n = m.n(), nl = m.levels();
    auto acc = simulate(eng, o, n * nl * 4, [&](const PathRecord& r, double* out) { crossing_samples(m, r, out); });
    CrossingValues cv;
    cv.indicator.assign(n, std::vector<mc::Estimate>(nl));
    cv.lemma = cv.diff = cv.indicator;
    cv.crossings.assign(n, std::vector<long>(nl, 0));
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < nl; ++j) {
            const int base = (k * nl + j) * 4;
            cv.indicator[k][j] = acc.get(base);
            cv.lemma[k][j] = acc.get(base + 1);
            cv.diff[k][j] = acc.get(base + 2);
            const auto c = acc.get(base + 3);
            cv.crossings[k][j] = std::lround(c.mean * c.n);
            if (cv.crossings[k][j] == 0 && cv.lemma[k][j].mean > 0.0)
                throw InsufficientPaths("no crossing of x=" + detail::num(m.grid[j]) + " in period " +
                                        std::to_string(k) + " although its crossing value is positive");
        }
    return cv;
}

struct PriceResult {
    double annuity = 0.0; // sum_k int_{x1}^{x2} P(0,T_k,y) dy over the premium dates
    double premium = 0.0;
    double default_leg = 0.0;
    double default_se = 0.0;
    double value = 0.0;
    double value_se = 0.0;
    double fair_spread = 0.0;
    double fair_spread_se = 0.0;
    long paths = 0;

    double value_at(double S) const { return S * annuity - default_leg; }
};

// Premium leg annuity from the initial curve: premium dates are the first m-1 tranche dates.
inline double premium_annuity(const Model& m, const STCDOSpec& spec) {
    const int f = spec.first_index(m.tenor);
    double a = 0.0;
    for (int i = 0; i + 1 < spec.m(); ++i) a += band_integral(m.snap, m.grid, f + i, spec.x1, spec.x2);
    return a;
}

// Pathwise discounted default leg: sum over payment dates T_{k+1} of
// P(0,T_{k+1}) dQ_{T_{k+1}}/dQ* (f(A_{T_k}) - f(A_{T_{k+1}})).
inline double default_leg_sample(const Model& m, const STCDOSpec& spec, int first, const PathRecord& r) {
    double v = 0.0;
    for (int i = 0; i + 1 < spec.m(); ++i) {
        const int k = first + i;
        const PathState& b = r.at[k + 1];
        v += discounted_density(b, m.snap, m.tenor, k + 1) *
             (tranche_payoff(r.at[k].A, spec) - tranche_payoff(b.A, spec));
    }
    return v;
}

inline PriceResult stcdo_value(const Engine& eng, const STCDOSpec& spec, const SimOptions& o) {
    const Model& m = eng.model();
    const int f = spec.first_index(m.tenor);
    require_data(f + spec.m() - 1 <= m.n(), "tranche dates run past the tenor");
    PriceResult p;
    p.annuity = premium_annuity(m, spec);
    p.premium = spec.S * p.annuity;
    auto acc = simulate(eng, o, 1, [&](const PathRecord& r, double* out) { out[0] += default_leg_sample(m, spec, f, r); });
    const auto e = acc.get(0);
    p.default_leg = e.mean;
    p.default_se = e.se;
    p.value = p.premium - p.default_leg;
    p.value_se = e.se;
    p.paths = o.paths;
    if (p.annuity > 0.0) {
        p.fair_spread = p.default_leg / p.annuity;
        p.fair_spread_se = p.default_se / p.annuity;
    }
    return p;
}

inline double fair_spread(const PriceResult& p) {
    if (!(p.annuity > 0.0)) throw DataError("degenerate tranche: premium annuity is zero");
    return p.default_leg / p.annuity;
}

} // namespace cdomm
