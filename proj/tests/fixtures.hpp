#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "cdomm/driver.hpp"
#include "cdomm/model.hpp"
#include "cdomm/rates.hpp"

namespace fx {

using namespace cdomm;

// d = 1 driver with diffusion variance v on the market coordinate over [0, H).
inline DriverSpec diffusion_driver(double v, double H) {
    DriverSpec s;
    s.d = 1;
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2, 2);
    c(0, 0) = v;
    if (v > 0.0) s.diffusion.push_back({0.0, H, c});
    return s;
}

inline JumpComponent loss_jump(double intensity, double mark, double H, double kappa = 0.0) {
    JumpComponent j;
    j.name = "loss";
    j.from = 0.0;
    j.to = H;
    j.intensity = intensity;
    j.loss.family = LossFamily::Point;
    j.loss.value = mark;
    j.state_slope = kappa;
    return j;
}

// Joint discrete law over (market, loss) points.
inline JumpComponent joint_jump(double intensity, std::vector<double> w, std::vector<std::vector<double>> pts,
                                double H) {
    JumpComponent j;
    j.name = "joint";
    j.from = 0.0;
    j.to = H;
    j.intensity = intensity;
    j.joint_weights = std::move(w);
    j.joint_points = std::move(pts);
    return j;
}

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(v.size());
    int i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

// Snapshot with flat risk-free rate r and a spread curve F(0,T_k,x) = exp(-s_j T_k) per level;
// the last level is x = 1 with zero spread.
inline MarketSnapshot curve_snapshot(const TenorStructure& t, double r, const std::vector<double>& spreads) {
    MarketSnapshot s;
    for (int k = 0; k <= t.n(); ++k) {
        const double P = std::exp(-r * t.T(k));
        s.P.push_back(P);
        std::vector<double> row;
        for (double sp : spreads) row.push_back(P * std::exp(-sp * t.T(k)));
        row.push_back(P);
        s.Px.push_back(row);
    }
    return s;
}

// Snapshot with flat risk-free rate r and P(0,T_k,x) = P(0,T_k) cdf(T_k, x) for a loss law
// independent of the rates.
inline MarketSnapshot law_snapshot(const TenorStructure& t, const std::vector<double>& levels, double r,
                                   const std::function<double(double, double)>& cdf) {
    MarketSnapshot s;
    for (int k = 0; k <= t.n(); ++k) {
        const double P = std::exp(-r * t.T(k));
        s.P.push_back(P);
        std::vector<double> row;
        for (double x : levels) row.push_back(x >= 1.0 ? P : P * cdf(t.T(k), x));
        s.Px.push_back(row);
    }
    return s;
}

// Poisson(lambda T) count of point-mass losses of size `mark`, capped at a total loss of 1.
inline double poisson_loss_cdf(double lambda, double mark, double T, double x) {
    double p = std::exp(-lambda * T), s = 0.0;
    for (int n = 0; n < 200; ++n) {
        if (std::min(1.0, n * mark) <= x + 1e-12) s += p;
        p *= lambda * T / (n + 1);
    }
    return s;
}

// Model on `dates` with levels `xs` (plus x = 1), flat rate r, level spreads, constant sigma and
// gamma vectors and contagion on every level below 1.
inline Model make_model(const std::vector<double>& dates, const std::vector<double>& xs, double r,
                        const std::vector<double>& spreads, DriverSpec driver, const Eigen::VectorXd& sigma,
                        const Eigen::VectorXd& gamma, double contagion) {
    Model m;
    m.tenor = TenorStructure(dates);
    std::vector<double> lv = xs;
    lv.push_back(1.0);
    m.grid = LevelGrid(lv);
    m.snap = curve_snapshot(m.tenor, r, spreads);
    m.driver = std::move(driver);
    const int n = m.tenor.n(), L = m.grid.size();
    m.vols = VolStructure::zero(m.driver.d, n, L);
    m.vols.C = 10.0;
    for (int k = 1; k < n; ++k) {
        m.vols.sigma[k] = PiecewiseVec::constant(sigma);
        for (int j = 0; j + 1 < L; ++j) {
            m.vols.gamma[k][j] = PiecewiseVec::constant(gamma);
            m.vols.contagion[k][j] = Contagion::constant(contagion);
        }
    }
    m.finalize();
    return m;
}

// Model driven by a point-mass loss jump with rate lambda and mark 0.2 and, when sigma > 0, a unit
// diffusion on the market coordinate; the snapshot is the exact loss law with flat rate r.
inline Model point_mass_model(double lambda, std::vector<double> dates, std::vector<double> levels, double r = 0.0,
                              double sigma = 0.0) {
    Model m;
    m.tenor = TenorStructure(dates);
    m.grid = LevelGrid(levels);
    const double H = m.tenor.horizon();
    m.driver = diffusion_driver(sigma > 0.0 ? 1.0 : 0.0, H);
    if (lambda > 0.0) m.driver.jumps.push_back(loss_jump(lambda, 0.2, H));
    m.snap = law_snapshot(m.tenor, levels, r, [&](double T, double x) { return poisson_loss_cdf(lambda, 0.2, T, x); });
    m.vols = VolStructure::zero(1, m.tenor.n(), m.grid.size());
    m.vols.C = 10.0;
    for (int k = 1; k < m.tenor.n(); ++k) m.vols.sigma[k] = PiecewiseVec::constant(vec({sigma, 0.0}));
    m.finalize();
    return m;
}

} // namespace fx
