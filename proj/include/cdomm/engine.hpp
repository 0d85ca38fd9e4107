#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cdomm/arbitrage.hpp"
#include "cdomm/driver.hpp"
#include "cdomm/errors.hpp"
#include "cdomm/mc.hpp"
#include "cdomm/measures.hpp"
#include "cdomm/model.hpp"
#include "cdomm/rates.hpp"
#include "cdomm/tenor_market.hpp"

namespace cdomm {

// Rates, spreads and loss of one path at time t.
struct PathState {
    double t = 0.0;
    double A = 0.0;
    std::vector<double> L;                // L(t,T_k), k = 0..n-1
    std::vector<std::vector<double>> h;   // h(t,T_i,x) as [level][i]
    std::vector<std::vector<double>> IbP; // int_0^t b^P(s,T_k,x) ds as [level][k], k = 0..n
    std::vector<double> comp;             // int_0^t 1{A_s <= x} lambda^{T_n}(s,x) ds per level
    double loss_comp = 0.0;               // int_0^t int y^{d+1} F_s(dy) ds
    double max_residual = 0.0;            // largest drift-condition residual seen so far
    std::vector<std::vector<double>> residual; // the same per [level][k]
    double max_abs_D = 0.0;               // largest |D(s,T_k,x)| seen so far, k > l
    int jumps = 0;

    // F(t,T_k,x) for level j.
    double F(const TenorStructure& tenor, const LevelGrid& grid, int k, int j) const {
        return forward_bond_price(h[j], tenor, k, IbP[j][k], A, grid[j]);
    }
};

// States at the tenor dates T_0..T_n.
struct PathRecord {
    std::vector<PathState> at;
};

using Observer = std::function<void(const PathState&)>;

struct EngineOptions {
    double dt = 0.02;
    double bP_shift = 0.0;          // added to b^P in the bond-price exponent only (negative control)
    std::size_t atom_cache = 4096; // kernel atom sets kept per workspace
};

// Per-thread scratch space and the kernel atom cache.
struct Workspace {
    InstantContext ctx;
    std::vector<LevelInputs> lev;
    LevelDrift out;
    std::map<std::pair<std::uint64_t, double>, AtomSet> atoms;
    std::vector<double> dlogL;
    std::vector<std::vector<double>> dlogh;
};

// Log-Euler simulation of the rates, spreads and forward bond prices under Q_{T_n}. Drifts use the
// left state and are integrated exactly between consecutive events; jumps are applied exactly at
// their times and the diffusion increment is added at the end of each grid step.
class Engine {
  public:
    Engine(const Model& model, EngineOptions opt = {}) : m_(model), opt_(opt) {
        require(!m_.L0.empty(), "model must be finalized before simulation");
        grid_ = make_grid(m_.tenor, m_.driver, opt_.dt);
        for (std::size_t i = 0; i + 1 < grid_.size(); ++i)
            coef_.push_back(Coefficients::at(m_.tenor, m_.vols, m_.driver, m_.levels(), grid_[i]));
        m_.driver.prepare();
    }

    const std::vector<double>& grid() const { return grid_; }
    const Model& model() const { return m_; }

    PathState initial_state() const {
        const int n = m_.n(), nl = m_.levels();
        PathState st;
        st.L = m_.L0;
        st.h.assign(nl, std::vector<double>(n, 0.0));
        for (int j = 0; j < nl; ++j)
            for (int i = 0; i < n; ++i) st.h[j][i] = m_.h0[i][j];
        st.IbP.assign(nl, std::vector<double>(n + 1, 0.0));
        st.comp.assign(nl, 0.0);
        st.residual.assign(nl, std::vector<double>(n + 1, 0.0));
        return st;
    }

    // Simulates path `pair` of stream `seed`; `twin` selects the antithetic partner, which shares the
    // jump tape and uses negated Gaussian increments.
    PathRecord run(Workspace& ws, std::uint64_t seed, std::uint64_t pair, bool twin,
                   const Observer* obs = nullptr) const {
        const TenorStructure& tenor = m_.tenor;
        const int n = m_.n(), nl = m_.levels(), d = m_.driver.d;
        Rng rng = make_rng(seed, pair);
        const auto cands = m_.driver.draw_candidates(tenor.horizon(), rng);
        std::normal_distribution<double> nd;
        std::size_t next = 0;

        PathState st = initial_state();
        PathRecord rec;
        rec.at.resize(n + 1);
        rec.at[0] = st;
        if (obs) (*obs)(st);
        ws.lev.resize(nl);
        ws.dlogL.assign(n, 0.0);
        ws.dlogh.assign(nl, std::vector<double>(n, 0.0));
        Eigen::VectorXd z(d + 1), dW(d + 1);

        for (std::size_t m = 0; m + 1 < grid_.size(); ++m) {
            const Coefficients& co = coef_[m];
            const double t1 = grid_[m + 1];
            const int lo = std::max(co.l, 1);
            double s = grid_[m];
            while (true) {
                const bool jump_here = next < cands.size() && cands[next].t < t1;
                const double e = jump_here ? cands[next].t : t1;
                drift_step(ws, co, st, s, e - s);
                if (!jump_here) break;
                const Candidate& c = cands[next++];
                s = e;
                if (auto y = m_.driver.resolve(c, st.A)) apply_jump(co, st, *y);
            }
            for (int i = 0; i <= d; ++i) z(i) = nd(rng);
            if (twin) z = -z;
            dW.noalias() = co.sqrt_c * z;
            dW *= std::sqrt(t1 - grid_[m]);
            for (int k = lo; k < n; ++k) {
                const double v = co.sigma[k].dot(dW);
                if (v != 0.0) st.L[k] *= std::exp(v);
            }
            for (int j = 0; j < nl; ++j) {
                if (!level_active(st, j)) continue;
                for (int i = lo; i < n; ++i) {
                    const double v = co.gamma[i][j].dot(dW);
                    if (v != 0.0) st.h[j][i] *= std::exp(v);
                }
            }
            st.t = t1;
            const int ti = tenor.index_of(t1);
            if (ti > 0) rec.at[ti] = st;
            if (obs) (*obs)(st);
        }
        return rec;
    }

  private:
    bool level_active(const PathState& st, int j) const { return m_.grid[j] < 1.0 && alive(st.A, m_.grid[j]); }

    const AtomSet& kernel(Workspace& ws, double s, double A) const {
        const auto key = std::make_pair(m_.driver.active_mask(s), A);
        auto it = ws.atoms.find(key);
        if (it != ws.atoms.end()) return it->second;
        if (ws.atoms.size() >= opt_.atom_cache) ws.atoms.clear();
        return ws.atoms.emplace(key, m_.driver.kernel_atoms(s, A)).first->second;
    }

    // Integrates all drifts over [s, s + dt) with the state frozen at its left limit.
    void drift_step(Workspace& ws, const Coefficients& co, PathState& st, double s, double dt) const {
        if (dt <= 0.0) return;
        const TenorStructure& tenor = m_.tenor;
        const int n = m_.n(), nl = m_.levels(), d = m_.driver.d;
        const int l = co.l, lo = std::max(l, 1);
        if (l > n) return;
        const AtomSet& F = kernel(ws, s, st.A);
        ws.ctx.build(tenor, co, st.L, F, s);
        for (int k = lo; k < n; ++k) st.L[k] *= std::exp(libor_log_drift_terminal(ws.ctx, k) * dt);
        double lc = 0.0;
        for (int a = 0; a < F.size(); ++a) lc += F.w[a] * F.at(a)[d];
        st.loss_comp += lc * dt;

        for (int j = 0; j < nl; ++j) {
            if (!level_active(st, j)) continue;
            LevelInputs& lev = ws.lev[j];
            lev.build(ws.ctx, tenor, m_.vols, st.h[j], j, m_.grid[j], st.A);
            lev.solve_spreads = m_.mode == SpreadDriftMode::Consistent;
            if (!lev.solve_spreads)
                for (int i = 0; i < n; ++i) lev.b[i] = i >= lo ? m_.user_b[i][j] : 0.0;
            LevelDrift& out = ws.out;
            level_drift(ws.ctx, lev, out);
            for (int k = l; k <= n; ++k) {
                const double r = std::abs(out.residual[k]);
                st.max_residual = std::max(st.max_residual, r);
                st.residual[j][k] = std::max(st.residual[j][k], r);
                if (k > l) st.max_abs_D = std::max(st.max_abs_D, std::abs(out.D[k]));
                st.IbP[j][k] += (out.bP[k] + opt_.bP_shift) * dt;
            }
            st.comp[j] += out.lambda[n] * dt;
            for (int i = lo; i < n; ++i) ws.dlogh[j][i] = spread_log_drift_terminal(ws.ctx, lev, i);
            for (int i = lo; i < n; ++i) st.h[j][i] *= std::exp(ws.dlogh[j][i] * dt);
        }
    }

    void apply_jump(const Coefficients& co, PathState& st, const std::vector<double>& y) const {
        const int n = m_.n(), nl = m_.levels(), d = m_.driver.d;
        const int lo = std::max(co.l, 1);
        for (int k = lo; k < n; ++k) {
            const double v = dot(co.sigma[k], y.data());
            if (v != 0.0) st.L[k] *= std::exp(v);
        }
        for (int j = 0; j < nl; ++j) {
            if (!level_active(st, j)) continue;
            for (int i = lo; i < n; ++i) {
                double r = 0.0;
                for (int q = 0; q < d; ++q) r += co.gamma[i][j](q) * y[q];
                r += m_.vols.contagion[i][j](y[d]);
                if (r != 0.0) st.h[j][i] *= std::exp(r);
            }
        }
        st.A = add_loss(st.A, y[d]);
        ++st.jumps;
    }

    Model m_;
    EngineOptions opt_;
    std::vector<double> grid_;
    std::vector<Coefficients> coef_;
};

struct SimOptions {
    long paths = 10000;
    std::uint64_t seed = 1;
    bool antithetic = true;
    int threads = 1;
};

// Monte Carlo over tenor-date records. fn(record, out) adds the statistics of one path to out;
// with antithetic pairs both partners are added with weight 1/2 and the pair is one sample.
template <class Fn>
mc::Accumulator simulate(const Engine& eng, const SimOptions& o, int dims, Fn&& fn) {
    require(o.paths >= 1, "need at least one path");
    if (o.antithetic) require(o.paths % 2 == 0, "antithetic sampling needs an even path count");
    const long samples = o.antithetic ? o.paths / 2 : o.paths;
    return mc::run(
        samples, dims,
        [&](long p, double* out) {
            thread_local Workspace ws;
            thread_local std::vector<double> part;
            if (!o.antithetic) {
                fn(eng.run(ws, o.seed, static_cast<std::uint64_t>(p), false), out);
                return;
            }
            part.assign(dims, 0.0);
            for (int tw = 0; tw < 2; ++tw) {
                std::fill(part.begin(), part.end(), 0.0);
                fn(eng.run(ws, o.seed, static_cast<std::uint64_t>(p), tw == 1), part.data());
                for (int i = 0; i < dims; ++i) out[i] += 0.5 * part[i];
            }
        },
        {o.threads, 1024});
}

// L(t,T_k) at every grid point of one path, as [grid index][k].
inline std::vector<std::vector<double>> evolve_libor(const Engine& eng, std::uint64_t seed, std::uint64_t pair,
                                                     bool twin = false) {
    Workspace ws;
    std::vector<std::vector<double>> out;
    const Observer obs = [&](const PathState& st) { out.push_back(st.L); };
    eng.run(ws, seed, pair, twin, &obs);
    return out;
}

// h(t,T_i,x) at every grid point of one path, as [grid index][level][i].
inline std::vector<std::vector<std::vector<double>>> evolve_spread(const Engine& eng, std::uint64_t seed,
                                                                   std::uint64_t pair, bool twin = false) {
    Workspace ws;
    std::vector<std::vector<std::vector<double>>> out;
    const Observer obs = [&](const PathState& st) { out.push_back(st.h); };
    eng.run(ws, seed, pair, twin, &obs);
    return out;
}

} // namespace cdomm
