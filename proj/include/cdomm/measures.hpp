#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "cdomm/driver.hpp"
#include "cdomm/errors.hpp"
#include "cdomm/tenor_market.hpp"

namespace cdomm {

inline double ell(double L, double delta) {
    const double z = 1.0 + delta * L;
    if (!(z > 0.0)) throw NumericSingularity("measures", NAN, -1, NAN, "1 + delta L <= 0 in ell");
    return delta * L / z;
}

inline double dot(const Eigen::VectorXd& a, const double* y) {
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) s += a(i) * y[i];
    return s;
}

struct GirsanovCoefficients {
    Eigen::VectorXd alpha;
    double beta = 1.0;
};

// alpha(s,T_j) = ell(s-,T_j) sigma(s,T_j) and beta(s,T_j,y) = ell (e^{<sigma,y>} - 1) + 1.
inline GirsanovCoefficients girsanov_coefficients(double L_left, double delta, const Eigen::VectorXd& sigma,
                                                  const double* y) {
    const double l = ell(L_left, delta);
    return {l * sigma, l * (std::exp(dot(sigma, y)) - 1.0) + 1.0};
}

// Kernel F^{T_{k+1}} = prod_{j=k+1}^{n-1} beta(s,T_j,.) F^{T_n}. `ells` and `sigmas` are indexed by
// tenor j and hold ell(s-,T_j) and sigma(s,T_j).
inline AtomSet forward_compensator(const AtomSet& F, int k, const std::vector<double>& ells,
                                   const std::vector<Eigen::VectorXd>& sigmas) {
    AtomSet out = F;
    const int n = static_cast<int>(ells.size());
    for (int i = 0; i < out.size(); ++i) {
        double w = 1.0;
        for (int j = k + 1; j < n; ++j) w *= ells[j] * (std::exp(dot(sigmas[j], F.at(i))) - 1.0) + 1.0;
        out.w[i] *= w;
    }
    return out;
}

// dQ_{T_m}/dQ_{T_n} on G_t for m = 1..n, from the Libor rates L(t,T_j) at t <= T_m.
inline double forward_density(const std::vector<double>& L, const MarketSnapshot& snap,
                              const TenorStructure& tenor, int m) {
    const int n = tenor.n();
    double v = snap.P[n] / snap.P[m];
    for (int j = m; j < n; ++j) v *= 1.0 + tenor.delta(j) * L[j];
    return v;
}

// dQ_{T_{k+1}}/dQ_{T_n} on G_t.
inline double density_process(const std::vector<double>& L, const MarketSnapshot& snap, const TenorStructure& tenor,
                              int k) {
    return forward_density(L, snap, tenor, k + 1);
}

// dQ_{T_{k+1},x}/dQ_{T_{k+1}} on G_t: F(t,T_{k+1},x) / F(0,T_{k+1},x).
inline double defaultable_density(double F_t, double F_0) {
    if (!(F_0 > 0.0)) throw DataError("defaultable forward measure undefined: F(0,T_k+1,x) = 0");
    return F_t / F_0;
}

// Tail mass of the forward loss kernel on (x - a, 1] given the reweighted kernel atoms.
inline double forward_loss_intensity(const AtomSet& FTk, double a, double x) {
    if (!alive(a, x)) throw ContractViolation("forward_loss_intensity: a > x");
    const int d1 = FTk.dim - 1;
    double s = 0.0;
    for (int i = 0; i < FTk.size(); ++i)
        if (crosses(a, FTk.at(i)[d1], x)) s += FTk.w[i];
    return s;
}

} // namespace cdomm
