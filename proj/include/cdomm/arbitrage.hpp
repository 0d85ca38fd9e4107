#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "cdomm/driver.hpp"
#include "cdomm/errors.hpp"
#include "cdomm/measures.hpp"
#include "cdomm/rates.hpp"
#include "cdomm/tenor_market.hpp"

namespace cdomm {

// u' c v without temporaries.
inline double cform(const Eigen::MatrixXd& c, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    double s = 0.0;
    for (int i = 0; i < c.rows(); ++i) {
        if (u(i) == 0.0) continue;
        double r = 0.0;
        for (int j = 0; j < c.cols(); ++j) r += c(i, j) * v(j);
        s += u(i) * r;
    }
    return s;
}

// Deterministic coefficients in force from time s until the next grid point.
struct Coefficients {
    double s = 0.0;
    int l = 1;
    Eigen::MatrixXd c;
    Eigen::MatrixXd sqrt_c;
    std::vector<Eigen::VectorXd> sigma;              // [k]
    std::vector<std::vector<Eigen::VectorXd>> gamma; // [i][level]

    static Coefficients at(const TenorStructure& tenor, const VolStructure& vols, const DriverSpec& driver,
                           int levels, double s) {
        Coefficients co;
        const int n = tenor.n();
        co.s = s;
        co.l = std::min(tenor.front(s), n);
        co.c = driver.c_at(s);
        co.sqrt_c = driver.sqrt_c_at(s);
        for (int k = 0; k < n; ++k) co.sigma.push_back(vols.sigma_at(tenor, k, s));
        co.gamma.resize(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < levels; ++j) co.gamma[i].push_back(vols.gamma_at(tenor, i, j, s));
        return co;
    }
};

// Measure-change quantities at one instant s, shared by all loss levels: the Q* kernel F_s at the
// current loss, ell(s-,T_j), sigma, alpha and per-atom beta products.
struct InstantContext {
    double s = 0.0;
    int n = 0;
    int l = 1; // front tenor: T_{l-1} <= s < T_l
    int d = 1;
    const Coefficients* co = nullptr;
    const AtomSet* F = nullptr;
    std::vector<double> ell;                 // by tenor j
    std::vector<Eigen::VectorXd> alpha;      // ell_j sigma_j
    std::vector<Eigen::VectorXd> alpha_after; // [k] sum_{j>k} alpha_j
    std::vector<std::vector<double>> expsig; // [j][atom] e^{<sigma_j, y>}
    std::vector<std::vector<double>> beta;   // [j][atom]
    std::vector<std::vector<double>> B;      // [k+1][atom] prod_{j=k+1}^{n-1} beta_j, k = -1..n-1

    const Eigen::MatrixXd& c() const { return co->c; }
    const Eigen::VectorXd& sigma(int j) const { return co->sigma[j]; }
    int atoms() const { return F ? F->size() : 0; }
    // Product over j = k+1..n-1 of beta_j at atom i; the density of F^{T_{k+1}} against F.
    double prod_beta_after(int k, int i) const { return B[k + 1][i]; }

    void build(const TenorStructure& tenor, const Coefficients& coef, const std::vector<double>& L,
               const AtomSet& F_s, double s_) {
        s = s_;
        n = tenor.n();
        co = &coef;
        d = static_cast<int>(coef.c.rows()) - 1;
        l = coef.l;
        F = &F_s;
        const int na = F_s.size();
        ell.assign(n, 0.0);
        alpha.resize(n);
        alpha_after.resize(n);
        expsig.resize(n);
        beta.resize(n);
        B.resize(n + 1);
        for (int j = 0; j < n; ++j) {
            alpha[j].setZero(d + 1);
            expsig[j].assign(na, 1.0);
            beta[j].assign(na, 1.0);
        }
        for (int k = 0; k <= n; ++k) B[k].assign(na, 1.0);
        for (int j = std::max(l, 1); j < n; ++j) {
            const Eigen::VectorXd& sg = coef.sigma[j];
            ell[j] = cdomm::ell(L[j], tenor.delta(j));
            alpha[j] = ell[j] * sg;
            if (sg.isZero()) continue;
            for (int i = 0; i < na; ++i) {
                expsig[j][i] = std::exp(dot(sg, F_s.at(i)));
                beta[j][i] = ell[j] * (expsig[j][i] - 1.0) + 1.0;
            }
        }
        for (int k = n - 2; k >= -1; --k)
            for (int i = 0; i < na; ++i) B[k + 1][i] = B[k + 2][i] * beta[k + 1][i];
        alpha_after[n - 1].setZero(d + 1);
        for (int k = n - 2; k >= 0; --k) alpha_after[k] = alpha_after[k + 1] + alpha[k + 1];
    }

    // Reweighted kernel F^{T_k}.
    AtomSet kernel_under(int k) const {
        AtomSet out = *F;
        for (int i = 0; i < out.size(); ++i) out.w[i] *= B[k][i];
        return out;
    }
};

// Per-level inputs: the state of the pre-default spreads and their coefficients at s.
struct LevelInputs {
    int j = 0;
    double x = 1.0;
    double A = 0.0;
    std::vector<double> g;                // g(s-,T_i,x) by tenor i
    const std::vector<Eigen::VectorXd>* gamma_row = nullptr;
    std::vector<Eigen::VectorXd> gamma;   // gamma(s,T_i,x) by tenor i
    std::vector<std::vector<double>> rho; // [i][atom]
    std::vector<double> b;                // spread drifts b(s,T_i,x)
    bool solve_spreads = true;            // triangular solve for b, else b is given

    void build(const InstantContext& ctx, const TenorStructure& tenor, const VolStructure& vols,
               const std::vector<double>& h, int level, double xval, double A_) {
        j = level;
        x = xval;
        A = A_;
        const int n = ctx.n, na = ctx.atoms();
        g.resize(n);
        gamma.resize(n);
        rho.resize(n);
        if (static_cast<int>(b.size()) != n) b.assign(n, 0.0);
        for (int i = 0; i < n; ++i) {
            g[i] = g_of(h[i], tenor.delta(i));
            gamma[i] = ctx.co->gamma[i][level];
            rho[i].assign(na, 0.0);
        }
        for (int i = std::max(ctx.l, 1); i < n; ++i) {
            const auto& cg = vols.contagion[i][j];
            for (int a = 0; a < na; ++a) {
                const double* y = ctx.F->at(a);
                double r = 0.0;
                for (int q = 0; q < ctx.d; ++q) r += gamma[i](q) * y[q];
                rho[i][a] = r + cg(y[ctx.d]);
            }
        }
    }
};

// Drift quantities for every k = l..n at one level.
struct LevelDrift {
    std::vector<double> lambda;   // lambda^{T_k}(s,x)
    std::vector<double> D;        // D(s,T_k,x)
    std::vector<double> corr;     // crossing correction integral
    std::vector<double> bP;       // b^P(s,T_k,x)
    std::vector<double> residual; // D - (lambda - bP + corr)
};

// Evaluates D(s,T_k,x), lambda^{T_k}(s,x) and the crossing correction for all k = l..n in one
// pass. With lev.solve_spreads the spread drifts b(s,T_i,x), i = l..n-1, are solved so that the
// drift condition holds for every k with the common b^P = lambda^{T_l}; otherwise b is taken from
// lev.b and b^P is solved per k.
inline void level_drift(const InstantContext& ctx, LevelInputs& lev, LevelDrift& out, double tol = 1e-12) {
    const int n = ctx.n, l = ctx.l, na = ctx.atoms(), d1 = ctx.d;
    const AtomSet& F = *ctx.F;
    out.lambda.assign(n + 1, 0.0);
    out.D.assign(n + 1, 0.0);
    out.corr.assign(n + 1, 0.0);
    out.bP.assign(n + 1, 0.0);
    out.residual.assign(n + 1, 0.0);
    if (!alive(lev.A, lev.x)) return;

    thread_local Eigen::VectorXd G;
    G.setZero(d1 + 1);
    double term1 = 0.0, term2 = 0.0, gb = 0.0;
    thread_local std::vector<double> qinv, S;
    thread_local std::vector<char> cross;
    qinv.assign(na, 1.0);
    S.assign(na, 0.0);
    cross.resize(na);
    for (int a = 0; a < na; ++a) cross[a] = crosses(lev.A, F.at(a)[d1], lev.x);
    if (lev.solve_spreads)
        for (int i = l; i < n; ++i) lev.b[i] = 0.0;

    for (int k = l; k <= n; ++k) {
        double J = 0.0, corr = 0.0, lam = 0.0;
        const auto& Bk = ctx.B[k];
        for (int a = 0; a < na; ++a) {
            const double w = F.w[a] * Bk[a];
            J += w * (qinv[a] - 1.0 + S[a]);
            if (cross[a]) {
                corr += w * (qinv[a] - 1.0);
                lam += w;
            }
        }
        const double diff = term1 + term2 + 0.5 * cform(ctx.c(), G, G);
        out.lambda[k] = lam;
        out.corr[k] = corr;
        if (lev.solve_spreads) {
            if (k == l) {
                out.bP[k] = lam;
            } else {
                out.bP[k] = out.bP[l];
                const double num = diff + J - gb - lam + out.bP[l] - corr;
                const double gk = lev.g[k - 1];
                if (gk > 0.0) {
                    lev.b[k - 1] = num / gk;
                } else if (std::abs(num) > tol * (1.0 + std::abs(lam) + std::abs(out.bP[l]))) {
                    throw NumericSingularity("arbitrage", ctx.s, k, lev.x,
                                             "spread drift unsolvable: g(T_{k-1}) = 0 with nonzero drift residual");
                }
                gb += lev.g[k - 1] * lev.b[k - 1];
            }
            out.D[k] = diff + J - gb;
        } else {
            if (k > l) gb += lev.g[k - 1] * lev.b[k - 1];
            out.D[k] = diff + J - gb;
            out.bP[k] = lam - out.D[k] + corr;
        }
        out.residual[k] = out.D[k] - (lam - out.bP[k] + corr);

        if (k == n) break;
        // extend the sums and products by tenor i = k
        const double g = lev.g[k];
        const Eigen::VectorXd& gm = lev.gamma[k];
        term1 += cform(ctx.c(), G, ctx.alpha[k]);
        G += g * gm;
        term2 -= 0.5 * (g - g * g) * cform(ctx.c(), gm, gm);
        for (int a = 0; a < na; ++a) {
            const double r = lev.rho[k][a];
            const double q = 1.0 + g * std::expm1(r);
            if (!(q > 0.0))
                throw NumericSingularity("arbitrage", ctx.s, k, lev.x, "1 + g (e^rho - 1) <= 0");
            qinv[a] /= q;
            S[a] = S[a] * ctx.beta[k][a] + g * r;
        }
    }
}

inline LevelDrift level_drift(const InstantContext& ctx, LevelInputs& lev, double tol = 1e-12) {
    LevelDrift out;
    level_drift(ctx, lev, out, tol);
    return out;
}

// D(s,T_k,x) for the given spread drifts.
inline double drift_D(const InstantContext& ctx, LevelInputs lev, int k) {
    lev.solve_spreads = false;
    return level_drift(ctx, lev).D.at(k);
}

// b^P(s,T_k,x) solving the drift condition for the given spread drifts.
inline double solve_bP(const InstantContext& ctx, LevelInputs lev, int k) {
    if (!alive(lev.A, lev.x)) throw ContractViolation("solve_bP requires A_t <= x");
    lev.solve_spreads = false;
    return level_drift(ctx, lev).bP.at(k);
}

// Drift of log h(.,T_i,x) under Q_{T_n}, jumps uncompensated:
// b - <gamma, c sum_{j>i} alpha_j> - int rho prod_{j>i} beta_j F(dy).
inline double spread_log_drift_terminal(const InstantContext& ctx, const LevelInputs& lev, int i) {
    double v = lev.b[i] - cform(ctx.c(), lev.gamma[i], ctx.alpha_after[i]);
    const auto& Bi = ctx.B[i + 1];
    const auto& r = lev.rho[i];
    for (int a = 0; a < ctx.atoms(); ++a) v -= ctx.F->w[a] * r[a] * Bi[a];
    return v;
}

// Drift of log L(.,T_k) under Q_{T_n}, jumps uncompensated:
// -1/2 <sigma,c sigma> - <sigma, c sum_{j>k} alpha_j> - int (e^{<sigma,y>} - 1) prod_{j>k} beta_j F(dy).
inline double libor_log_drift_terminal(const InstantContext& ctx, int k) {
    const Eigen::VectorXd& sg = ctx.sigma(k);
    double v = -0.5 * cform(ctx.c(), sg, sg) - cform(ctx.c(), sg, ctx.alpha_after[k]);
    const auto& Bk = ctx.B[k + 1];
    const auto& e = ctx.expsig[k];
    for (int a = 0; a < ctx.atoms(); ++a) v -= ctx.F->w[a] * (e[a] - 1.0) * Bk[a];
    return v;
}

// Coefficients of ln Z for Z = 1 + delta V_0 e^U, with U = U^c + x*(mu - nu) + int a dt:
// d ln Z = drift dt + v sigma dW + int ln(1 + v(e^x - 1)) (mu - nu)(dt,dx).
struct ExpTransform {
    double v = 0.0;
    double drift = 0.0;
    double diffusion = 0.0;
    double jump(double x) const { return std::log1p(v * std::expm1(x)); }
};

inline ExpTransform exp_transform(double V, double delta, double a, double sigma2, double sigma,
                                  const std::vector<double>& jw, const std::vector<double>& jx) {
    ExpTransform t;
    t.v = delta * V / (1.0 + delta * V);
    t.drift = t.v * a + 0.5 * (t.v - t.v * t.v) * sigma2;
    for (std::size_t i = 0; i < jw.size(); ++i) t.drift += jw[i] * (t.jump(jx[i]) - t.v * jx[i]);
    t.diffusion = t.v * sigma;
    return t;
}

// Coefficients of ln prod_k 1/(1 + delta_k V^k) where each V^k = V^k_0 exp(int b^k + int sigma^k dW +
// int S^k (mu - nu)): the drift -sum a^k, diffusion -sum v^k sigma^k and per-atom jump
// -ln prod (1 + v^k (e^{S^k} - 1)), all relative to the compensated jump measure.
struct ProductTransform {
    std::vector<double> a;
    double drift = 0.0;
    Eigen::VectorXd diffusion;
    std::vector<double> jump;
};

inline ProductTransform product_reciprocal_transform(const std::vector<double>& V, const std::vector<double>& delta,
                                                     const std::vector<double>& b,
                                                     const std::vector<Eigen::VectorXd>& sigma,
                                                     const std::vector<std::vector<double>>& S,
                                                     const std::vector<double>& F_w) {
    const std::size_t m = V.size();
    ProductTransform p;
    p.diffusion = Eigen::VectorXd::Zero(m ? sigma[0].size() : 0);
    p.jump.assign(F_w.size(), 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        const double v = delta[k] * V[k] / (1.0 + delta[k] * V[k]);
        double ak = v * b[k] + 0.5 * (v - v * v) * sigma[k].squaredNorm();
        for (std::size_t i = 0; i < F_w.size(); ++i) {
            const double lj = std::log1p(v * std::expm1(S[k][i]));
            ak += F_w[i] * (lj - v * S[k][i]);
            p.jump[i] -= lj;
        }
        p.a.push_back(ak);
        p.drift -= ak;
        p.diffusion -= v * sigma[k];
    }
    return p;
}

} // namespace cdomm
