#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "cdomm/driver.hpp"
#include "cdomm/errors.hpp"
#include "cdomm/measures.hpp"
#include "cdomm/tenor_market.hpp"

namespace cdomm {

// Deterministic vector function of time, constant on [starts[i], starts[i+1]).
struct PiecewiseVec {
    std::vector<double> starts;
    std::vector<Eigen::VectorXd> values;

    static PiecewiseVec constant(const Eigen::VectorXd& v) { return {{0.0}, {v}}; }

    Eigen::VectorXd at(double s) const {
        int i = static_cast<int>(std::upper_bound(starts.begin(), starts.end(), s) - starts.begin()) - 1;
        return values.at(std::max(i, 0));
    }
};

// Contagion as a step function of the loss mark: values[i] on (breaks[i-1], breaks[i]],
// with c(0) = 0 so that jumps without loss carry no contagion.
struct Contagion {
    std::vector<double> breaks;
    std::vector<double> values{0.0};

    static Contagion constant(double c) { return {{}, {c}}; }

    double operator()(double y) const {
        if (y <= 0.0) return 0.0;
        auto i = std::lower_bound(breaks.begin(), breaks.end(), y) - breaks.begin();
        return values.at(i);
    }
    double sup() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
};

// Volatilities sigma(s,T_k), gamma(s,T_k,x) and contagion c(s,T_k,x;y). Tenor index k runs
// over 0..n-1 and level index j over the grid; every coefficient vanishes for s >= T_k.
struct VolStructure {
    int d = 1;
    std::vector<PiecewiseVec> sigma;
    std::vector<std::vector<PiecewiseVec>> gamma;
    std::vector<std::vector<Contagion>> contagion;
    double C = 1.0;
    double eps = 0.1;

    static VolStructure zero(int d, int n, int levels) {
        VolStructure v;
        v.d = d;
        const Eigen::VectorXd z = Eigen::VectorXd::Zero(d + 1);
        v.sigma.assign(n, PiecewiseVec::constant(z));
        v.gamma.assign(n, std::vector<PiecewiseVec>(levels, PiecewiseVec::constant(z)));
        v.contagion.assign(n, std::vector<Contagion>(levels, Contagion::constant(0.0)));
        return v;
    }

    Eigen::VectorXd sigma_at(const TenorStructure& tenor, int k, double s) const {
        if (k <= 0 || s >= tenor.T(k)) return Eigen::VectorXd::Zero(d + 1);
        return sigma.at(k).at(s);
    }
    Eigen::VectorXd gamma_at(const TenorStructure& tenor, int k, int j, double s) const {
        if (k <= 0 || s >= tenor.T(k)) return Eigen::VectorXd::Zero(d + 1);
        return gamma.at(k).at(j).at(s);
    }
    double contagion_at(const TenorStructure& tenor, int k, int j, double s, double y) const {
        if (k <= 0 || s >= tenor.T(k)) return 0.0;
        return contagion.at(k).at(j)(y);
    }

    // rho(s,T_k,x;y) = <gamma~, y~> + c(s,T_k,x;y^{d+1}).
    double rho(const TenorStructure& tenor, int k, int j, double s, const double* y) const {
        const Eigen::VectorXd g = gamma_at(tenor, k, j, s);
        double r = 0.0;
        for (int q = 0; q < d; ++q) r += g(q) * y[q];
        return r + contagion_at(tenor, k, j, s, y[d]);
    }

    std::vector<double> breakpoints() const {
        std::vector<double> b;
        for (const auto& p : sigma) b.insert(b.end(), p.starts.begin(), p.starts.end());
        for (const auto& row : gamma)
            for (const auto& p : row) b.insert(b.end(), p.starts.begin(), p.starts.end());
        std::sort(b.begin(), b.end());
        b.erase(std::unique(b.begin(), b.end()), b.end());
        return b;
    }

    std::vector<double> mark_breaks() const {
        std::vector<double> b;
        for (const auto& row : contagion)
            for (const auto& c : row) b.insert(b.end(), c.breaks.begin(), c.breaks.end());
        std::sort(b.begin(), b.end());
        b.erase(std::unique(b.begin(), b.end()), b.end());
        return b;
    }

    // Checks nonnegativity, gamma^{d+1} = 0, the componentwise bounds on sum_k sigma and
    // sum_k (sigma + gamma) by C (A2, A4) and boundedness of contagion (A5).
    ValidationReport validate(const TenorStructure& tenor, const LevelGrid& grid) const {
        ValidationReport r;
        const int n = tenor.n();
        if (static_cast<int>(sigma.size()) != n || static_cast<int>(gamma.size()) != n ||
            static_cast<int>(contagion.size()) != n)
            throw DataError("volatility structure does not match the tenor");
        std::vector<double> times = breakpoints();
        times.push_back(0.0);
        for (int k = 0; k < n; ++k) times.push_back(tenor.T(k));
        std::sort(times.begin(), times.end());
        times.erase(std::unique(times.begin(), times.end()), times.end());
        for (double s : times) {
            if (s >= tenor.horizon()) continue;
            Eigen::VectorXd sum_s = Eigen::VectorXd::Zero(d + 1);
            for (int k = 1; k < n; ++k) {
                const Eigen::VectorXd sg = sigma_at(tenor, k, s);
                if (sg.minCoeff() < 0.0) r.add("A2", k, -1, NAN, "negative sigma at s=" + detail::num(s));
                sum_s += sg;
            }
            for (int q = 0; q <= d; ++q)
                if (sum_s(q) > C) r.add("A2", -1, -1, NAN, "sum of sigma exceeds C at s=" + detail::num(s));
            for (int j = 0; j < grid.size(); ++j) {
                Eigen::VectorXd sum_sg = Eigen::VectorXd::Zero(d + 1);
                for (int k = 1; k < n; ++k) {
                    const Eigen::VectorXd gm = gamma_at(tenor, k, j, s);
                    if (gm.minCoeff() < 0.0) r.add("A4", k, j, grid[j], "negative gamma at s=" + detail::num(s));
                    if (gm(d) != 0.0) r.add("A4", k, j, grid[j], "gamma^{d+1} must vanish");
                    sum_sg += sigma_at(tenor, k, s) + gm;
                }
                for (int q = 0; q <= d; ++q)
                    if (sum_sg(q) > C)
                        r.add("A4", -1, j, grid[j], "sum of sigma + gamma exceeds C at s=" + detail::num(s));
            }
        }
        for (int k = 1; k < n; ++k)
            for (int j = 0; j < grid.size(); ++j) {
                const auto& c = contagion[k][j];
                if (c.values.size() != c.breaks.size() + 1 || !std::isfinite(c.sup()))
                    r.add("A5", k, j, grid[j], "contagion must be a bounded step function");
            }
        return r;
    }
};

// b^L(s,T_k) = -1/2 <sigma, c sigma> - int (e^{<sigma,y>} - 1 - <sigma,y>) F^{T_{k+1}}(dy).
inline double libor_drift(const Eigen::VectorXd& sigma, const Eigen::MatrixXd& c, const AtomSet& FTk1) {
    double b = -0.5 * sigma.dot(c * sigma);
    for (int i = 0; i < FTk1.size(); ++i) {
        const double u = dot(sigma, FTk1.at(i));
        b -= FTk1.w[i] * (std::expm1(u) - u);
    }
    return b;
}

// Drift of log h(.,T_i,x) under Q_{T_k}: b - <gamma, c sum_{j=i+1}^{k-1} alpha_j>
// - int rho (prod_{j=i+1}^{k-1} beta_j - 1) F^{T_k}(dy). `rho` and `prod_beta` are given per atom.
inline double spread_drift_under_Tk(double b, const Eigen::VectorXd& gamma, const Eigen::MatrixXd& c,
                                    const Eigen::VectorXd& alpha_sum, const AtomSet& FTk,
                                    const std::vector<double>& rho, const std::vector<double>& prod_beta) {
    double v = b - gamma.dot(c * alpha_sum);
    for (int i = 0; i < FTk.size(); ++i) v -= FTk.w[i] * rho[i] * (prod_beta[i] - 1.0);
    return v;
}

// L(t,T_k,x) = 1{A_t <= x} ((1 + delta L)(1 + delta h) - 1) / delta.
inline double assemble_defaultable_libor(double L, double h, double delta, double A, double x) {
    if (!alive(A, x)) return 0.0;
    return ((1.0 + delta * L) * (1.0 + delta * h) - 1.0) / delta;
}

// H(t,T_k,x) = 1{A_t <= x} h(t,T_k,x).
inline double credit_spread_H(double h, double A, double x) { return alive(A, x) ? h : 0.0; }

inline double y_of(double h, double delta) { return 1.0 / (1.0 + delta * h); }
inline double g_of(double h, double delta) { return delta * h / (1.0 + delta * h); }

// F(t,T_k,x) = prod_{i<k} y(t,T_i,x) exp(int b^P) 1{A_t <= x}; `h` holds h(t,T_i,x) for i = 0..k-1.
inline double forward_bond_price(const std::vector<double>& h, const TenorStructure& tenor, int k, double int_bP,
                                 double A, double x) {
    if (!alive(A, x)) return 0.0;
    double p = std::exp(int_bP);
    for (int i = 0; i < k; ++i) p *= y_of(h[i], tenor.delta(i));
    return p;
}

// Residual of F(t,T_k,x) = prod_{i=l}^{k-1} y(t,T_i,x) F(t,T_l,x) for t in (T_{l-1}, T_l].
inline double telescope_check(const std::vector<double>& h, const TenorStructure& tenor, int k, int l, double t,
                              double int_bP_k, double int_bP_l, double A, double x) {
    if (!(l >= 1 && l < k && t > tenor.T(l - 1) && t <= tenor.T(l)))
        throw ContractViolation("telescope_check: t must lie in (T_{l-1}, T_l] with l < k");
    const double Fk = forward_bond_price(h, tenor, k, int_bP_k, A, x);
    double rhs = forward_bond_price(h, tenor, l, int_bP_l, A, x);
    for (int i = l; i < k; ++i) rhs *= y_of(h[i], tenor.delta(i));
    return std::abs(Fk - rhs);
}

} // namespace cdomm
