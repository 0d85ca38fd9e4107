#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "cdomm/csv.hpp"
#include "cdomm/errors.hpp"

namespace cdomm {

// Tolerance used when comparing loss levels and dates read from files.
inline constexpr double kLevelTol = 1e-12;
inline constexpr double kDateTol = 1e-9;

class TenorStructure {
  public:
    TenorStructure() = default;
    explicit TenorStructure(std::vector<double> dates) : dates_(std::move(dates)) {
        require_data(dates_.size() >= 2, "tenor needs at least T_0 and T_1");
        require_data(dates_.front() == 0.0, "tenor must start at T_0 = 0");
        for (std::size_t k = 0; k + 1 < dates_.size(); ++k)
            require_data(dates_[k + 1] > dates_[k], "tenor dates must be strictly increasing");
    }

    int n() const { return static_cast<int>(dates_.size()) - 1; }
    double T(int k) const { return dates_.at(k); }
    double delta(int k) const { return dates_.at(k + 1) - dates_.at(k); }
    double horizon() const { return dates_.back(); }
    const std::vector<double>& dates() const { return dates_; }

    // Index k with |T_k - t| <= tol, or -1.
    int index_of(double t, double tol = kDateTol) const {
        for (int k = 0; k <= n(); ++k)
            if (std::abs(dates_[k] - t) <= tol) return k;
        return -1;
    }

    // Front tenor l with T_{l-1} <= s < T_l; n + 1 once s >= T_n.
    int front(double s) const {
        auto it = std::upper_bound(dates_.begin(), dates_.end(), s);
        return static_cast<int>(it - dates_.begin());
    }

  private:
    std::vector<double> dates_;
};

class LevelGrid {
  public:
    LevelGrid() = default;
    explicit LevelGrid(std::vector<double> levels) : levels_(std::move(levels)) {
        require_data(!levels_.empty(), "level grid is empty");
        for (double x : levels_) require_data(x >= 0.0 && x <= 1.0, "loss levels must lie in [0,1]");
        for (std::size_t j = 0; j + 1 < levels_.size(); ++j)
            require_data(levels_[j + 1] > levels_[j], "loss levels must be strictly increasing");
        require_data(levels_.back() == 1.0, "level grid must contain x = 1");
    }

    int size() const { return static_cast<int>(levels_.size()); }
    double operator[](int j) const { return levels_.at(j); }
    const std::vector<double>& levels() const { return levels_; }

    int index_of(double x, double tol = kLevelTol) const {
        for (int j = 0; j < size(); ++j)
            if (std::abs(levels_[j] - x) <= tol) return j;
        return -1;
    }

    // Grid refined so that a and b are members.
    LevelGrid refined(double a, double b) const {
        std::vector<double> v = levels_;
        for (double x : {a, b})
            if (index_of(x) < 0) v.push_back(x);
        std::sort(v.begin(), v.end());
        return LevelGrid(v);
    }

  private:
    std::vector<double> levels_;
};

// Initial risk-free and defaultable bond prices. Index k runs over T_0..T_n, j over the level grid.
struct MarketSnapshot {
    std::vector<double> P;
    std::vector<std::vector<double>> Px;

    double F(int k, int j) const { return Px.at(k).at(j) / P.at(k); }
};

struct Violation {
    std::string rule;
    int k = -1;
    int j = -1;
    double x = std::numeric_limits<double>::quiet_NaN();
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    void add(std::string rule, int k, int j, double x, std::string detail) {
        violations.push_back({std::move(rule), k, j, x, std::move(detail)});
    }
};

namespace detail {
inline std::string num(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}
} // namespace detail

// Checks the shape of the snapshot, then the ordering conditions on the risk-free curve
// (A3) and the defaultable curve (A6), plus monotonicity in x and the x = 1 column.
inline ValidationReport validate_snapshot(const MarketSnapshot& s, const TenorStructure& tenor,
                                          const LevelGrid& grid) {
    const int n = tenor.n();
    const int m = grid.size();
    if (static_cast<int>(s.P.size()) != n + 1)
        throw DataError("risk-free curve has " + std::to_string(s.P.size()) + " points, tenor needs " +
                        std::to_string(n + 1));
    if (static_cast<int>(s.Px.size()) != n + 1)
        throw DataError("defaultable curve covers " + std::to_string(s.Px.size()) + " dates, tenor needs " +
                        std::to_string(n + 1));
    for (int k = 0; k <= n; ++k) {
        if (!std::isfinite(s.P[k])) throw DataError("risk-free curve missing at k=" + std::to_string(k));
        if (static_cast<int>(s.Px[k].size()) != m)
            throw DataError("defaultable curve at k=" + std::to_string(k) + " has wrong number of levels");
        for (int j = 0; j < m; ++j)
            if (!std::isfinite(s.Px[k][j]))
                throw DataError("defaultable curve missing at k=" + std::to_string(k) +
                                " x=" + detail::num(grid[j]));
    }

    ValidationReport r;
    if (s.P[0] != 1.0) r.add("P(0,T_0)=1", 0, -1, 1.0, "P(0,T_0)=" + detail::num(s.P[0]));
    for (int k = 1; k <= n; ++k)
        if (!(s.P[k] > 0.0)) r.add("A3", k, -1, 1.0, "P(0,T_k) not positive: " + detail::num(s.P[k]));
    for (int k = 1; k < n; ++k)
        if (!(s.P[k] > s.P[k + 1]))
            r.add("A3", k, -1, 1.0,
                  "P(0,T_k)=" + detail::num(s.P[k]) + " not above P(0,T_k+1)=" + detail::num(s.P[k + 1]));

    for (int j = 0; j < m; ++j) {
        const double x = grid[j];
        if (s.Px[0][j] != 1.0) r.add("A6", 0, j, x, "P(0,T_0,x) must be 1");
        for (int k = 1; k <= n; ++k)
            if (!(s.Px[k][j] > 0.0)) r.add("A6", k, j, x, "P(0,T_k,x) not positive: " + detail::num(s.Px[k][j]));
        for (int k = 1; k < n; ++k)
            if (!(s.Px[k][j] > s.Px[k + 1][j]))
                r.add("A6", k, j, x, "P(0,T_k,x) not strictly decreasing in k");
        for (int k = 0; k < n; ++k)
            if (s.P[k] > 0.0 && s.P[k + 1] > 0.0 && s.F(k + 1, j) > s.F(k, j))
                r.add("A6", k, j, x,
                      "F(0,T_k,x)=" + detail::num(s.F(k, j)) + " below F(0,T_k+1,x)=" + detail::num(s.F(k + 1, j)));
    }
    for (int k = 1; k <= n; ++k) {
        for (int j = 0; j + 1 < m; ++j)
            if (s.Px[k][j] > s.Px[k][j + 1])
                r.add("monotone-x", k, j, grid[j], "P(0,T_k,x) decreasing in x");
        if (std::abs(s.Px[k][m - 1] - s.P[k]) > kLevelTol)
            r.add("x=1", k, m - 1, 1.0, "P(0,T_k,1) differs from P(0,T_k)");
    }
    return r;
}

inline double initial_libor(const MarketSnapshot& s, const TenorStructure& tenor, int k) {
    require(k >= 0 && k < tenor.n(), "initial_libor: k out of range");
    return (s.P.at(k) / s.P.at(k + 1) - 1.0) / tenor.delta(k);
}

inline double initial_spread(const MarketSnapshot& s, const TenorStructure& tenor, int k, int j) {
    require(k >= 0 && k < tenor.n(), "initial_spread: k out of range");
    const double f1 = s.F(k + 1, j);
    if (!(f1 > 0.0)) throw DataError("degenerate curve: F(0,T_k+1,x)=0 at k=" + std::to_string(k));
    return (s.F(k, j) / f1 - 1.0) / tenor.delta(k);
}

// Integral of y -> P(0,T_k,y) over [a,b], with P right-continuous and piecewise constant
// between grid levels.
inline double band_integral(const MarketSnapshot& s, const LevelGrid& grid, int k, double a, double b) {
    require(a <= b, "band_integral: a > b");
    double total = 0.0;
    for (int j = 0; j < grid.size(); ++j) {
        const double lo = std::max(a, grid[j]);
        const double hi = std::min(b, j + 1 < grid.size() ? grid[j + 1] : 1.0);
        if (hi > lo) total += s.Px.at(k).at(j) * (hi - lo);
    }
    return total;
}

// Builds a snapshot from riskfree.csv (T,P) and defaultable.csv (T,x,P) tables.
// A missing T_0 row is filled with 1; a missing x = 1 column is filled from the risk-free curve.
inline MarketSnapshot snapshot_from_tables(const csv::Table& riskfree, const csv::Table& defaultable,
                                           const TenorStructure& tenor, const LevelGrid& grid) {
    const int n = tenor.n();
    const int m = grid.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    MarketSnapshot s;
    s.P.assign(n + 1, nan);
    s.Px.assign(n + 1, std::vector<double>(m, nan));
    for (std::size_t r = 0; r < riskfree.rows.size(); ++r) {
        int k = tenor.index_of(riskfree.rows[r][0]);
        if (k < 0)
            throw DataError(riskfree.source + ":" + std::to_string(riskfree.line_of_row[r]) +
                            ": date not on tenor " + detail::num(riskfree.rows[r][0]));
        if (std::isfinite(s.P[k]))
            throw DataError(riskfree.source + ":" + std::to_string(riskfree.line_of_row[r]) + ": duplicate date");
        s.P[k] = riskfree.rows[r][1];
    }
    bool have_top = false;
    for (std::size_t r = 0; r < defaultable.rows.size(); ++r) {
        const auto& row = defaultable.rows[r];
        const std::string where = defaultable.source + ":" + std::to_string(defaultable.line_of_row[r]);
        int k = tenor.index_of(row[0]);
        if (k < 0) throw DataError(where + ": date not on tenor " + detail::num(row[0]));
        int j = grid.index_of(row[1]);
        if (j < 0) throw DataError(where + ": level not on grid " + detail::num(row[1]));
        if (std::isfinite(s.Px[k][j])) throw DataError(where + ": duplicate (T,x)");
        if (j == m - 1) have_top = true;
        s.Px[k][j] = row[2];
    }
    if (!std::isfinite(s.P[0])) s.P[0] = 1.0;
    for (int j = 0; j < m; ++j)
        if (!std::isfinite(s.Px[0][j])) s.Px[0][j] = 1.0;
    if (!have_top)
        for (int k = 1; k <= n; ++k) s.Px[k][m - 1] = s.P[k];
    for (int k = 1; k <= n; ++k) {
        if (!std::isfinite(s.P[k])) throw DataError("risk-free curve missing at T=" + detail::num(tenor.T(k)));
        for (int j = 0; j < m; ++j)
            if (!std::isfinite(s.Px[k][j]))
                throw DataError("defaultable curve missing at (T,x)=(" + detail::num(tenor.T(k)) + "," +
                                detail::num(grid[j]) + ")");
    }
    return s;
}

inline MarketSnapshot read_snapshot(const std::string& riskfree_csv, const std::string& defaultable_csv,
                                    const TenorStructure& tenor, const LevelGrid& grid) {
    return snapshot_from_tables(csv::read(riskfree_csv, {"T", "P"}), csv::read(defaultable_csv, {"T", "x", "P"}),
                                tenor, grid);
}

} // namespace cdomm
