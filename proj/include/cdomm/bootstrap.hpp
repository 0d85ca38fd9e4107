#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <map>
#include <string>
#include <vector>

#include "cdomm/csv.hpp"
#include "cdomm/errors.hpp"
#include "cdomm/tenor_market.hpp"

namespace cdomm {

struct Band {
    double lo = 0.0;
    double hi = 1.0;
    double width() const { return hi - lo; }
};

// Observed inputs at valuation date 0. Maturity index k = 1..m refers to T_1..T_m.
struct QuoteSurface {
    std::vector<double> maturities;          // T_1..T_m
    std::vector<double> P;                   // P(0,T_k), index 0 unused and equal to 1
    std::vector<Band> bands;                 // partition of [0,1]
    std::vector<double> t1_legs;             // maturity-T_1 default-leg values per band
    std::vector<std::vector<double>> spread; // [k][band], k = 2..m; rows 0 and 1 unused

    int m() const { return static_cast<int>(maturities.size()); }
    int nb() const { return static_cast<int>(bands.size()); }

    void validate() const {
        require_data(m() >= 1, "no maturities");
        require_data(static_cast<int>(P.size()) == m() + 1, "risk-free curve does not match maturities");
        require_data(nb() >= 1, "no bands");
        require_data(std::abs(bands.front().lo) <= kLevelTol && std::abs(bands.back().hi - 1.0) <= kLevelTol,
                     "bands must cover [0,1]");
        for (int i = 0; i < nb(); ++i) {
            require_data(bands[i].hi > bands[i].lo, "empty band");
            if (i > 0) require_data(std::abs(bands[i].lo - bands[i - 1].hi) <= kLevelTol, "bands must be contiguous");
        }
        for (int k = 1; k <= m(); ++k) require_data(P[k] > 0.0, "risk-free bond price must be positive");
        for (int k = 1; k < m(); ++k) require_data(P[k] > P[k + 1], "risk-free curve must be strictly decreasing");
        require_data(static_cast<int>(t1_legs.size()) == nb(), "maturity-T_1 legs missing for some band");
        require_data(static_cast<int>(spread.size()) == m() + 1, "spread table does not match maturities");
        for (int k = 2; k <= m(); ++k) {
            require_data(static_cast<int>(spread[k].size()) == nb(), "spread missing for some band");
            for (double s : spread[k]) require_data(std::isfinite(s) && s >= 0.0, "spreads must be finite and >= 0");
        }
    }
};

// Band-integrated bond prices P(0,T_k,band) = int_band P(0,T_k,y) dy with consistency flags.
struct BondSurface {
    std::vector<double> maturities;
    std::vector<Band> bands;
    std::vector<std::vector<double>> value;             // [k][band], k = 1..m; row 0 unused
    std::vector<std::vector<std::vector<std::string>>> flags;

    void init(const std::vector<double>& mats, const std::vector<Band>& b) {
        maturities = mats;
        bands = b;
        value.assign(mats.size() + 1, std::vector<double>(b.size(), 0.0));
        flags.assign(mats.size() + 1, std::vector<std::vector<std::string>>(b.size()));
    }
    void flag(int k, int i, const std::string& f) {
        auto& v = flags[k][i];
        if (std::find(v.begin(), v.end(), f) == v.end()) v.push_back(f);
    }
    bool flagged() const {
        for (const auto& row : flags)
            for (const auto& f : row)
                if (!f.empty()) return true;
        return false;
    }
};

// e(0,T_{k+1},band) = (P(0,T_{k+1}) / P(0,T_k)) P(0,T_k,band) - P(0,T_{k+1},band) under independence of loss and rates.
inline double independence_crossing(const BondSurface& b, const std::vector<double>& P, int k, int band) {
    return P[k + 1] / P[k] * b.value[k][band] - b.value[k + 1][band];
}

// Maturity-T_1 tranches have no premium: P(0,T_1,band) = width P(0,T_1) - default leg.
inline double bootstrap_step1(double P1, double width, double quote) { return width * P1 - quote; }

// P(0,T_{j+1},band) from the bands up to T_j and the spread of the T_{j+1} tranche.
inline double bootstrap_advance(const BondSurface& b, const std::vector<double>& P, double S, int j, int band) {
    double v = P[j + 1] / P[j] * b.value[j][band];
    for (int k = 1; k < j; ++k) v += independence_crossing(b, P, k, band);
    double ann = 0.0;
    for (int k = 1; k <= j; ++k) ann += b.value[k][band];
    return v - S * ann;
}

// Zero-rate form: P(0,T_{j+1},band) = P(0,T_1,band) - S sum_{k<=j} P(0,T_k,band).
inline double bootstrap_advance_zero_rate(const BondSurface& b, double S, int j, int band) {
    double ann = 0.0;
    for (int k = 1; k <= j; ++k) ann += b.value[k][band];
    return b.value[1][band] - S * ann;
}

inline void flag_surface(BondSurface& b, const std::vector<double>& P) {
    const int m = static_cast<int>(b.maturities.size()), nb = static_cast<int>(b.bands.size());
    const double tol = 1e-14;
    for (int k = 1; k <= m; ++k) {
        double sum = 0.0;
        for (int i = 0; i < nb; ++i) {
            const double v = b.value[k][i];
            sum += v;
            if (v < -tol) b.flag(k, i, "negative");
            if (v > b.bands[i].width() * P[k] + tol) b.flag(k, i, "above-width");
            if (k > 1 && v > b.value[k - 1][i] + tol) b.flag(k, i, "increasing-in-maturity");
            if (k < m && independence_crossing(b, P, k, i) < -tol) b.flag(k + 1, i, "negative-crossing");
        }
        if (sum > P[k] + tol)
            for (int i = 0; i < nb; ++i) b.flag(k, i, "sum-exceeds-riskfree");
    }
}

// Step 1 followed by the advance recursion for every maturity, then consistency flags.
inline BondSurface bootstrap(const QuoteSurface& q, bool zero_rate_shortcut = false) {
    q.validate();
    BondSurface b;
    b.init(q.maturities, q.bands);
    for (int i = 0; i < q.nb(); ++i) b.value[1][i] = bootstrap_step1(q.P[1], q.bands[i].width(), q.t1_legs[i]);
    for (int j = 1; j < q.m(); ++j)
        for (int i = 0; i < q.nb(); ++i)
            b.value[j + 1][i] = zero_rate_shortcut ? bootstrap_advance_zero_rate(b, q.spread[j + 1][i], j, i)
                                                   : bootstrap_advance(b, q.P, q.spread[j + 1][i], j, i);
    flag_surface(b, q.P);
    return b;
}

// Quotes implied by a bond surface: T_1 default legs and the fair spreads
// S(T_{j+1},band) = sum_{k=1}^{j} e(T_{k+1},band) / sum_{k=1}^{j} P(T_k,band).
inline QuoteSurface quotes_from_surface(const BondSurface& b, const std::vector<double>& P) {
    QuoteSurface q;
    q.maturities = b.maturities;
    q.P = P;
    q.bands = b.bands;
    const int m = q.m(), nb = q.nb();
    for (int i = 0; i < nb; ++i) q.t1_legs.push_back(b.bands[i].width() * P[1] - b.value[1][i]);
    q.spread.assign(m + 1, std::vector<double>());
    for (int j = 1; j < m; ++j) {
        q.spread[j + 1].assign(nb, 0.0);
        for (int i = 0; i < nb; ++i) {
            double num = 0.0, den = 0.0;
            for (int k = 1; k <= j; ++k) {
                num += independence_crossing(b, P, k, i);
                den += b.value[k][i];
            }
            if (!(den > 0.0)) throw DataError("degenerate tranche: band is wiped out at every premium date");
            q.spread[j + 1][i] = num / den;
        }
    }
    return q;
}

// Band-average proxy of the (T_k,x)-Libor rate: (P(T_k,band) / P(T_{k+1},band) - 1) / delta_k.
struct BandRate {
    double rate = 0.0;
    bool wiped = false;
};

inline std::vector<std::vector<BandRate>> implied_band_rates(const BondSurface& b) {
    const int m = static_cast<int>(b.maturities.size()), nb = static_cast<int>(b.bands.size());
    std::vector<std::vector<BandRate>> out(m + 1, std::vector<BandRate>(nb));
    for (int k = 1; k < m; ++k) {
        const double d = b.maturities[k] - b.maturities[k - 1];
        for (int i = 0; i < nb; ++i) {
            if (!(b.value[k + 1][i] > 0.0) || !(b.value[k][i] > 0.0)) {
                out[k][i].wiped = true;
                continue;
            }
            out[k][i].rate = (b.value[k][i] / b.value[k + 1][i] - 1.0) / d;
        }
    }
    return out;
}

namespace detail {
inline int band_index(const std::vector<Band>& bands, double lo, double hi) {
    for (std::size_t i = 0; i < bands.size(); ++i)
        if (std::abs(bands[i].lo - lo) <= kLevelTol && std::abs(bands[i].hi - hi) <= kLevelTol)
            return static_cast<int>(i);
    return -1;
}
} // namespace detail

// Reads riskfree.csv (T,P), t1_legs.csv (band_lo,band_hi,value) and quotes.csv
// (maturity,band_lo,band_hi,spread). Bands are taken from t1_legs.csv; maturities from riskfree.csv.
inline QuoteSurface read_quotes(const std::string& riskfree_csv, const std::string& t1_csv,
                                const std::string& quotes_csv) {
    const auto rf = csv::read(riskfree_csv, {"T", "P"});
    const auto t1 = csv::read(t1_csv, {"band_lo", "band_hi", "value"}, true); // flagged later, not rejected
    const auto qs = csv::read(quotes_csv, {"maturity", "band_lo", "band_hi", "spread"});
    QuoteSurface q;
    std::vector<std::pair<double, double>> curve;
    for (const auto& r : rf.rows)
        if (r[0] > kDateTol) curve.emplace_back(r[0], r[1]);
    std::sort(curve.begin(), curve.end());
    q.P.push_back(1.0);
    for (std::size_t i = 0; i < curve.size(); ++i) {
        if (i > 0 && curve[i].first - curve[i - 1].first <= kDateTol)
            throw DataError(riskfree_csv + ": duplicate maturity " + detail::num(curve[i].first));
        q.maturities.push_back(curve[i].first);
        q.P.push_back(curve[i].second);
    }
    std::vector<std::pair<Band, double>> legs;
    for (const auto& r : t1.rows) legs.push_back({{r[0], r[1]}, r[2]});
    std::sort(legs.begin(), legs.end(), [](const auto& a, const auto& b) { return a.first.lo < b.first.lo; });
    for (const auto& [b, v] : legs) {
        q.bands.push_back(b);
        q.t1_legs.push_back(v);
    }
    q.spread.assign(q.m() + 1, std::vector<double>());
    for (int k = 2; k <= q.m(); ++k) q.spread[k].assign(q.nb(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t r = 0; r < qs.rows.size(); ++r) {
        const auto& row = qs.rows[r];
        const std::string where = qs.source + ":" + std::to_string(qs.line_of_row[r]);
        int k = -1;
        for (int i = 0; i < q.m(); ++i)
            if (std::abs(q.maturities[i] - row[0]) <= kDateTol) k = i + 1;
        if (k < 0) throw DataError(where + ": maturity not on the risk-free curve");
        if (k == 1) throw DataError(where + ": maturity T_1 is quoted through t1_legs.csv");
        const int i = detail::band_index(q.bands, row[1], row[2]);
        if (i < 0) throw DataError(where + ": band not listed in " + t1_csv);
        if (std::isfinite(q.spread[k][i])) throw DataError(where + ": duplicate quote");
        q.spread[k][i] = row[3];
    }
    for (int k = 2; k <= q.m(); ++k)
        for (int i = 0; i < q.nb(); ++i)
            if (!std::isfinite(q.spread[k][i]))
                throw DataError(quotes_csv + ": no quote for maturity " + detail::num(q.maturities[k - 1]) + " band [" +
                                detail::num(q.bands[i].lo) + "," + detail::num(q.bands[i].hi) + "]");
    return q;
}

inline void write_surface(std::ostream& os, const BondSurface& b) {
    os << "maturity,band_lo,band_hi,value,flags\n";
    for (std::size_t k = 1; k <= b.maturities.size(); ++k)
        for (std::size_t i = 0; i < b.bands.size(); ++i) {
            std::string f;
            for (const auto& s : b.flags[k][i]) f += (f.empty() ? "" : ";") + s;
            os << csv::fmt(b.maturities[k - 1]) << ',' << csv::fmt(b.bands[i].lo) << ',' << csv::fmt(b.bands[i].hi)
               << ',' << csv::fmt(b.value[k][i]) << ',' << f << '\n';
        }
}

} // namespace cdomm
