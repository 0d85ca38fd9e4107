#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <random>
#include <vector>

#include "cdomm/arbitrage.hpp"
#include "cdomm/engine.hpp"
#include "cdomm/errors.hpp"
#include "cdomm/mc.hpp"
#include "cdomm/measures.hpp"
#include "cdomm/model.hpp"

namespace cdomm {

// Mean of a quantity that should stay at `target` across the tenor dates T_0..T_k.
struct MartingaleCell {
    int k = 0;
    int level = -1;
    double x = 1.0;
    double target = 0.0;
    std::vector<mc::Estimate> at;

    double max_z() const {
        double z = 0.0;
        for (const auto& e : at) {
            if (e.se > 0.0) z = std::max(z, std::abs(e.z(target)));
            else if (std::abs(e.mean - target) > 1e-12 * std::max(1.0, std::abs(target))) return INFINITY;
        }
        return z;
    }
    bool ok(double k_se) const { return max_z() <= k_se; }
};

namespace detail {

// Order-independent running maximum shared across worker threads.
class SharedMax {
  public:
    explicit SharedMax(std::size_t n) : v_(n, 0.0) {}
    void update(std::size_t i, double x) {
        std::lock_guard<std::mutex> lk(mu_);
        v_[i] = std::max(v_[i], x);
    }
    const std::vector<double>& values() const { return v_; }

  private:
    std::mutex mu_;
    std::vector<double> v_;
};

inline std::size_t cell_index(int k, int i, int j, int n, int nl) {
    return (static_cast<std::size_t>(k - 1) * (n + 1) + i) * nl + j;
}

} // namespace detail

// Pathwise drift-condition residual and Monte Carlo drift of F(t,T_k,x) under Q_{T_k}, estimated as
// E*[F(T_i,T_k,x) dQ_{T_k}/dQ*] for every tenor date T_i <= T_k.
struct DriftCell {
    int k = 0;
    int level = 0;
    double x = 0.0;
    double max_residual = 0.0;
    MartingaleCell drift;
};

struct DriftReport {
    std::vector<DriftCell> cells; // k = 1..n, levels below 1
    double max_residual = 0.0;
    long paths = 0;
};

inline DriftReport drift_report(const Engine& eng, const SimOptions& o) {
    const Model& m = eng.model();
    const int n = m.n(), nl = m.levels();
    detail::SharedMax res(static_cast<std::size_t>(nl) * (n + 1));
    const int dims = n * (n + 1) * nl;
    auto acc = simulate(eng, o, dims, [&](const PathRecord& r, double* out) {
        const PathState& last = r.at[n];
        for (int j = 0; j < nl; ++j)
            for (int k = 0; k <= n; ++k) res.update(static_cast<std::size_t>(j) * (n + 1) + k, last.residual[j][k]);
        for (int k = 1; k <= n; ++k)
            for (int i = 0; i <= k; ++i) {
                const PathState& st = r.at[i];
                const double dens = forward_density(st.L, m.snap, m.tenor, k);
                for (int j = 0; j < nl; ++j)
                    out[detail::cell_index(k, i, j, n, nl)] += st.F(m.tenor, m.grid, k, j) * dens;
            }
    });
    DriftReport rep;
    rep.paths = o.paths;
    for (int k = 1; k <= n; ++k)
        for (int j = 0; j < nl; ++j) {
            if (m.grid[j] >= 1.0) continue;
            DriftCell c;
            c.k = k;
            c.level = j;
            c.x = m.grid[j];
            c.max_residual = res.values()[static_cast<std::size_t>(j) * (n + 1) + k];
            c.drift.k = k;
            c.drift.level = j;
            c.drift.x = c.x;
            c.drift.target = m.snap.F(k, j);
            for (int i = 0; i <= k; ++i) c.drift.at.push_back(acc.get(static_cast<int>(detail::cell_index(k, i, j, n, nl))));
            rep.max_residual = std::max(rep.max_residual, c.max_residual);
            rep.cells.push_back(c);
        }
    return rep;
}

// L(T_i,T_k) dQ_{T_{k+1}}/dQ* for T_i <= T_k and k = 1..n-1; each should average to L(0,T_k).
inline std::vector<MartingaleCell> libor_martingale(const Engine& eng, const SimOptions& o) {
    const Model& m = eng.model();
    const int n = m.n();
    require(n >= 2, "libor_martingale needs at least two periods");
    auto acc = simulate(eng, o, n * (n + 1), [&](const PathRecord& r, double* out) {
        for (int k = 1; k < n; ++k)
            for (int i = 0; i <= k; ++i) {
                const PathState& st = r.at[i];
                out[k * (n + 1) + i] += st.L[k] * forward_density(st.L, m.snap, m.tenor, k + 1);
            }
    });
    std::vector<MartingaleCell> cells;
    for (int k = 1; k < n; ++k) {
        MartingaleCell c;
        c.k = k;
        c.target = m.L0[k];
        for (int i = 0; i <= k; ++i) c.at.push_back(acc.get(k * (n + 1) + i));
        cells.push_back(c);
    }
    return cells;
}

// Compensated loss martingales under Q*: 1{A_t <= x} + int_0^t 1{A_s <= x} lambda(s,x) ds per level
// (target 1) and A_t - int_0^t int y F^A_s(dy) ds (target 0, reported with level -1).
inline std::vector<MartingaleCell> loss_compensation(const Engine& eng, const SimOptions& o) {
    const Model& m = eng.model();
    const int n = m.n(), nl = m.levels();
    const int dims = (nl + 1) * (n + 1);
    auto acc = simulate(eng, o, dims, [&](const PathRecord& r, double* out) {
        for (int i = 0; i <= n; ++i) {
            const PathState& st = r.at[i];
            for (int j = 0; j < nl; ++j)
                out[j * (n + 1) + i] += (alive(st.A, m.grid[j]) ? 1.0 : 0.0) + st.comp[j];
            out[nl * (n + 1) + i] += st.A - st.loss_comp;
        }
    });
    std::vector<MartingaleCell> cells;
    for (int j = 0; j <= nl; ++j) {
        if (j < nl && m.grid[j] >= 1.0) continue;
        MartingaleCell c;
        c.k = n;
        c.level = j < nl ? j : -1;
        c.x = j < nl ? m.grid[j] : 1.0;
        c.target = j < nl ? 1.0 : 0.0;
        for (int i = 0; i <= n; ++i) c.at.push_back(acc.get(j * (n + 1) + i));
        cells.push_back(c);
    }
    return cells;
}

// Degenerate single-name case: with no contagion and b^P equal to the default intensity the drift
// condition reduces to D = 0, so prod_{i<k} y(t,T_i,x) must be a Q_{T_k}-martingale.
struct SingleNameReport {
    double max_abs_D = 0.0;
    std::vector<MartingaleCell> product; // k = 1..n at the given level
};

inline SingleNameReport single_name_check(const Engine& eng, const SimOptions& o, int level = 0) {
    const Model& m = eng.model();
    const int n = m.n();
    require_data(level >= 0 && level < m.levels() && m.grid[level] < 1.0, "single-name check needs a loss level below 1");
    for (const auto& row : m.vols.contagion)
        for (const auto& c : row) require_data(c.sup() == 0.0, "single-name check needs zero contagion");
    detail::SharedMax dmax(1);
    auto acc = simulate(eng, o, n * (n + 1), [&](const PathRecord& r, double* out) {
        dmax.update(0, r.at[n].max_abs_D);
        for (int k = 1; k <= n; ++k)
            for (int i = 0; i <= k; ++i) {
                const PathState& st = r.at[i];
                double y = 1.0;
                for (int q = 0; q < k; ++q) y *= y_of(st.h[level][q], m.tenor.delta(q));
                out[(k - 1) * (n + 1) + i] += y * forward_density(st.L, m.snap, m.tenor, k);
            }
    });
    SingleNameReport rep;
    rep.max_abs_D = dmax.values()[0];
    const PathState s0 = eng.initial_state();
    for (int k = 1; k <= n; ++k) {
        MartingaleCell c;
        c.k = k;
        c.level = level;
        c.x = m.grid[level];
        c.target = 1.0;
        for (int q = 0; q < k; ++q) c.target *= y_of(s0.h[level][q], m.tenor.delta(q));
        for (int i = 0; i <= k; ++i) c.at.push_back(acc.get((k - 1) * (n + 1) + i));
        rep.product.push_back(c);
    }
    return rep;
}

// Z = 1 + delta V for V = V_0 exp(U), U = sigma W + x * (mu - nu) + a t with finitely many jump
// sizes, simulated once through V and once through the transformed coefficients of ln Z.
struct ExpTransformCase {
    double V0 = 0.05;
    double delta = 0.5;
    double a = 0.02;
    double sigma = 0.3;
    double T = 1.0;
    std::vector<double> rates{1.0, 1.0}; // arrival rate per jump size
    std::vector<double> sizes{0.2, -0.3};
};

// Mean over paths of the largest |Z_direct - Z_transformed| on each grid. Both schemes use the
// Milstein correction and share one Brownian path on the finest grid joined with the jump times.
inline std::vector<double> exp_transform_discrepancy(const ExpTransformCase& c, const std::vector<double>& dts,
                                                     long paths, std::uint64_t seed) {
    require(!dts.empty() && paths >= 1, "exp_transform_discrepancy: empty experiment");
    require(c.rates.size() == c.sizes.size(), "exp_transform_discrepancy: one rate per jump size");
    const double fine = *std::min_element(dts.begin(), dts.end());
    std::vector<long> mult;
    for (double dt : dts) {
        const long r = std::lround(dt / fine);
        require(std::abs(r * fine - dt) <= 1e-12 && r >= 1, "every step must be a multiple of the finest step");
        mult.push_back(r);
    }
    const long nfine = std::lround(c.T / fine);
    require(std::abs(nfine * fine - c.T) <= 1e-9, "horizon must be a multiple of the finest step");
    double total_rate = 0.0;
    for (double r : c.rates) total_rate += r;

    std::vector<double> out(dts.size(), 0.0);
    for (long p = 0; p < paths; ++p) {
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(p));
        std::normal_distribution<double> nd;
        std::uniform_real_distribution<double> ud;
        // jump times and sizes
        std::vector<std::pair<double, double>> jumps;
        for (double t = 0.0; total_rate > 0.0;) {
            t += std::exponential_distribution<double>(total_rate)(rng);
            if (t >= c.T) break;
            double u = ud(rng) * total_rate;
            std::size_t q = 0;
            while (q + 1 < c.rates.size() && u >= c.rates[q]) u -= c.rates[q++];
            jumps.emplace_back(t, c.sizes[q]);
        }
        // event points: fine grid joined with jump times; W on the event points
        struct Point {
            double t;
            long fine_index; // -1 for jump times
            double dW;
            double jump;
        };
        std::vector<Point> pts;
        std::size_t next = 0;
        double prev = 0.0;
        for (long i = 1; i <= nfine; ++i) {
            const double t = i * fine;
            while (next < jumps.size() && jumps[next].first < t) {
                const double tj = jumps[next].first;
                pts.push_back({tj, -1, nd(rng) * std::sqrt(tj - prev), jumps[next].second});
                prev = tj;
                ++next;
            }
            pts.push_back({t, i, nd(rng) * std::sqrt(t - prev), 0.0});
            prev = t;
        }

        for (std::size_t g = 0; g < dts.size(); ++g) {
            double V = c.V0, lnZ = std::log1p(c.delta * c.V0), last = 0.0, dW = 0.0, worst = 0.0;
            for (const Point& pt : pts) {
                dW += pt.dW;
                const bool stop = pt.fine_index < 0 || pt.fine_index % mult[g] == 0;
                if (!stop) continue;
                const double h = pt.t - last;
                // direct: dV / V_- = (a + sigma^2 / 2 - sum rate * size) dt + sigma dW, jumps V -> V e^x
                double comp = 0.0;
                for (std::size_t q = 0; q < c.rates.size(); ++q) comp += c.rates[q] * c.sizes[q];
                const double mu = c.a + 0.5 * c.sigma * c.sigma - comp;
                const double Vn = V * (1.0 + mu * h + c.sigma * dW + 0.5 * c.sigma * c.sigma * (dW * dW - h));
                // transformed: coefficients of ln Z from its own left state
                const double Vt = std::expm1(lnZ) / c.delta;
                const ExpTransform tr = exp_transform(Vt, c.delta, c.a, c.sigma * c.sigma, c.sigma, c.rates, c.sizes);
                double jc = 0.0;
                for (std::size_t q = 0; q < c.rates.size(); ++q) jc += c.rates[q] * tr.jump(c.sizes[q]);
                lnZ += (tr.drift - jc) * h + tr.diffusion * dW +
                       0.5 * tr.v * (1.0 - tr.v) * c.sigma * c.sigma * (dW * dW - h);
                V = Vn;
                if (pt.fine_index < 0) {
                    lnZ += std::log1p(-std::expm1(-lnZ) * std::expm1(pt.jump));
                    V *= std::exp(pt.jump);
                }
                worst = std::max(worst, std::abs(1.0 + c.delta * V - std::exp(lnZ)));
                last = pt.t;
                dW = 0.0;
            }
            out[g] += worst;
        }
    }
    for (double& v : out) v /= static_cast<double>(paths);
    return out;
}

} // namespace cdomm
