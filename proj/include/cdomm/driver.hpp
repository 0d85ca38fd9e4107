#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "cdomm/errors.hpp"
#include "cdomm/quadrature.hpp"
#include "cdomm/tenor_market.hpp"

namespace cdomm {

using Rng = std::mt19937_64;

// One RNG stream per (seed, path index).
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

// Loss after a jump with capped mark y; a capped jump lands exactly on 1.
inline double add_loss(double a, double y) {
    if (y <= 0.0) return a;
    return y >= 1.0 - a ? 1.0 : a + y;
}

// True when a jump of size y from loss level a pushes the loss strictly above x.
inline bool crosses(double a, double y, double x) { return a + y > x + kLevelTol; }
inline bool alive(double a, double x) { return a <= x + kLevelTol; }

// Weighted points in R^dim; the discrete form of a jump kernel.
struct AtomSet {
    int dim = 0;
    std::vector<double> w;
    std::vector<double> y;

    AtomSet() = default;
    explicit AtomSet(int d) : dim(d) {}
    int size() const { return static_cast<int>(w.size()); }
    const double* at(int i) const { return y.data() + static_cast<std::size_t>(i) * dim; }
    double* at(int i) { return y.data() + static_cast<std::size_t>(i) * dim; }
    void push(double weight, const double* p) {
        w.push_back(weight);
        y.insert(y.end(), p, p + dim);
    }
    double mass() const {
        double s = 0.0;
        for (double v : w) s += v;
        return s;
    }
};

enum class MarketFamily { None, Point, Discrete, Gaussian, StudentT };
enum class LossFamily { None, Point, Uniform, Discrete };

// Law of the market part of a jump mark, a vector in R^d.
struct MarketLaw {
    MarketFamily family = MarketFamily::None;
    std::vector<double> weights;
    std::vector<std::vector<double>> points;
    std::vector<double> mean;
    std::vector<double> sd;
    double df = 0.0;

    bool bounded() const { return family == MarketFamily::Point || family == MarketFamily::Discrete; }

    std::vector<double> sample(Rng& rng, int d) const {
        std::vector<double> v(d, 0.0);
        switch (family) {
        case MarketFamily::None:
            break;
        case MarketFamily::Point:
            v = points.at(0);
            break;
        case MarketFamily::Discrete: {
            std::discrete_distribution<int> pick(weights.begin(), weights.end());
            v = points.at(pick(rng));
            break;
        }
        case MarketFamily::Gaussian: {
            std::normal_distribution<double> nd;
            for (int i = 0; i < d; ++i) v[i] = mean[i] + sd[i] * nd(rng);
            break;
        }
        case MarketFamily::StudentT: {
            std::student_t_distribution<double> td(df);
            for (int i = 0; i < d; ++i) v[i] = mean[i] + sd[i] * td(rng);
            break;
        }
        }
        return v;
    }

    // Quadrature atoms (probability weights). Gaussian laws use a tensor Gauss-Hermite rule.
    AtomSet atoms(int d, int nodes) const {
        AtomSet out(d);
        switch (family) {
        case MarketFamily::None: {
            std::vector<double> z(d, 0.0);
            out.push(1.0, z.data());
            break;
        }
        case MarketFamily::Point:
            out.push(1.0, points.at(0).data());
            break;
        case MarketFamily::Discrete: {
            double tot = 0.0;
            for (double w : weights) tot += w;
            for (std::size_t i = 0; i < points.size(); ++i) out.push(weights[i] / tot, points[i].data());
            break;
        }
        case MarketFamily::Gaussian: {
            const quad::Rule r = quad::gauss_hermite(nodes);
            std::vector<int> idx(d, 0);
            std::vector<double> p(d);
            while (true) {
                double w = 1.0;
                for (int i = 0; i < d; ++i) {
                    w *= r.weights[idx[i]];
                    p[i] = mean[i] + sd[i] * r.nodes[idx[i]];
                }
                out.push(w, p.data());
                int i = 0;
                while (i < d && ++idx[i] == nodes) idx[i++] = 0;
                if (i == d) break;
            }
            break;
        }
        case MarketFamily::StudentT:
            throw DataError("student_t market marks have no exponential moments; drift integrals are undefined");
        }
        return out;
    }
};

// Law of the raw loss mark, a number in (0,1]. At simulation time the mark is capped at 1 - A_{t-}.
struct LossLaw {
    LossFamily family = LossFamily::None;
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> weights;
    std::vector<double> values;

    double sample(Rng& rng) const {
        switch (family) {
        case LossFamily::None:
            return 0.0;
        case LossFamily::Point:
            return value;
        case LossFamily::Uniform: {
            std::uniform_real_distribution<double> u(lo, hi);
            return u(rng);
        }
        case LossFamily::Discrete: {
            std::discrete_distribution<int> pick(weights.begin(), weights.end());
            return values.at(pick(rng));
        }
        }
        return 0.0;
    }

    bool discrete() const { return family != LossFamily::Uniform; }

    // Probability that the capped mark takes the loss from a to strictly above x.
    double crossing_prob(double a, double x) const {
        if (x >= 1.0 || family == LossFamily::None) return 0.0;
        switch (family) {
        case LossFamily::Point:
            return crosses(a, std::min(value, 1.0 - a), x) ? 1.0 : 0.0;
        case LossFamily::Uniform: {
            const double cut = std::clamp(x - a, lo, hi);
            return (hi - cut) / (hi - lo);
        }
        case LossFamily::Discrete: {
            double tot = 0.0, hit = 0.0;
            for (std::size_t i = 0; i < values.size(); ++i) {
                tot += weights[i];
                if (crosses(a, std::min(values[i], 1.0 - a), x)) hit += weights[i];
            }
            return hit / tot;
        }
        default:
            return 0.0;
        }
    }

    // Probability atoms of the capped mark at loss level a. Uniform laws use Gauss-Legendre on
    // the pieces between `breaks` (shifted by a) and put the mass above 1 - a on the cap.
    std::vector<std::pair<double, double>> atoms(double a, const std::vector<double>& breaks,
                                                 const quad::Rule& gl) const {
        std::vector<std::pair<double, double>> out;
        const double cap = 1.0 - a;
        if (cap <= 0.0 || family == LossFamily::None) return out;
        switch (family) {
        case LossFamily::Point:
            out.emplace_back(1.0, std::min(value, cap));
            break;
        case LossFamily::Discrete: {
            double tot = 0.0;
            for (double w : weights) tot += w;
            for (std::size_t i = 0; i < values.size(); ++i) out.emplace_back(weights[i] / tot, std::min(values[i], cap));
            break;
        }
        case LossFamily::Uniform: {
            const double top = std::min(hi, cap);
            std::vector<double> cuts{lo, top};
            for (double b : breaks)
                if (b > lo && b < top) cuts.push_back(b);
            std::sort(cuts.begin(), cuts.end());
            const double dens = 1.0 / (hi - lo);
            for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
                const double l = cuts[p], h = cuts[p + 1];
                if (h <= l) continue;
                for (std::size_t q = 0; q < gl.nodes.size(); ++q)
                    out.emplace_back(dens * (h - l) * gl.weights[q], l + (h - l) * gl.nodes[q]);
            }
            if (hi > cap) out.emplace_back((hi - std::max(lo, cap)) * dens, cap);
            break;
        }
        default:
            break;
        }
        return out;
    }

    double mean_capped(double a) const {
        const double cap = 1.0 - a;
        if (cap <= 0.0) return 0.0;
        switch (family) {
        case LossFamily::Point:
            return std::min(value, cap);
        case LossFamily::Discrete: {
            double tot = 0.0, s = 0.0;
            for (std::size_t i = 0; i < values.size(); ++i) {
                tot += weights[i];
                s += weights[i] * std::min(values[i], cap);
            }
            return s / tot;
        }
        case LossFamily::Uniform: {
            const double top = std::min(hi, cap);
            double s = (top > lo) ? 0.5 * (top * top - lo * lo) / (hi - lo) : 0.0;
            if (hi > cap) s += cap * (hi - std::max(lo, cap)) / (hi - lo);
            return s;
        }
        default:
            return 0.0;
        }
    }
};

// A compound-Poisson piece of the driver, active on [from, to). Market and loss marks of one
// arrival are drawn independently unless an explicit joint discrete law is given.
// state_slope kappa scales the arrival rate to intensity * (1 + kappa * A_{t-}).
struct JumpComponent {
    std::string name;
    double from = 0.0;
    double to = 0.0;
    double intensity = 0.0;
    MarketLaw market;
    LossLaw loss;
    double state_slope = 0.0;
    std::vector<double> joint_weights;
    std::vector<std::vector<double>> joint_points;

    bool joint() const { return !joint_weights.empty(); }
    bool has_market() const { return joint() || market.family != MarketFamily::None; }
    bool has_loss() const { return joint() || loss.family != LossFamily::None; }
    bool active(double t) const { return t >= from && t < to; }
    double rate(double a) const { return intensity * (1.0 + state_slope * a); }
    double bound_rate() const { return intensity * std::max(1.0, 1.0 + state_slope); }
};

struct DiffusionSegment {
    double from = 0.0;
    double to = 0.0;
    Eigen::MatrixXd c;
};

struct Jump {
    double t = 0.0;
    std::vector<double> y;
};

// Candidate arrival from the bounding Poisson process; accepted against the state at its time.
struct Candidate {
    double t = 0.0;
    int component = 0;
    double u = 0.0;
    std::vector<double> market;
    double loss = 0.0;
};

class DriverSpec {
  public:
    int d = 1;
    std::vector<DiffusionSegment> diffusion;
    std::vector<JumpComponent> jumps;
    int quad_nodes = 32;
    std::vector<double> level_breaks; // loss levels; a mark crossing x from a splits at x - a
    std::vector<double> mark_breaks;  // mark values where contagion changes

    int dim() const { return d + 1; }

    void validate() const {
        require_data(d >= 1, "driver dimension d must be at least 1");
        for (const auto& s : diffusion) {
            require_data(s.to > s.from, "diffusion segment with empty time range");
            require_data(s.c.rows() == d + 1 && s.c.cols() == d + 1, "diffusion matrix must be (d+1)x(d+1)");
            require_data((s.c - s.c.transpose()).cwiseAbs().maxCoeff() <= 1e-14, "diffusion matrix not symmetric");
            for (int i = 0; i <= d; ++i)
                require_data(s.c(i, d) == 0.0 && s.c(d, i) == 0.0,
                             "diffusion matrix must have zero last row and column");
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.c);
            require_data(es.eigenvalues().minCoeff() >= -1e-12, "diffusion matrix not positive semidefinite");
        }
        for (const auto& j : jumps) {
            const std::string who = "jump component '" + j.name + "'";
            require_data(j.to > j.from, who + ": empty time range");
            require_data(std::isfinite(j.intensity) && j.intensity >= 0.0, who + ": intensity must be finite and >= 0");
            require_data(j.state_slope >= -1.0, who + ": state_slope must be >= -1");
            if (j.state_slope != 0.0)
                require_data(!j.has_market(), who + ": state-dependent rates are only allowed for pure loss components");
            if (j.joint()) {
                require_data(j.joint_weights.size() == j.joint_points.size(), who + ": joint weights/points mismatch");
                for (const auto& p : j.joint_points) {
                    require_data(static_cast<int>(p.size()) == d + 1, who + ": joint points need d+1 coordinates");
                    require_data(p[d] >= 0.0 && p[d] <= 1.0, who + ": joint loss marks must lie in [0,1]");
                }
                continue;
            }
            const auto& m = j.market;
            switch (m.family) {
            case MarketFamily::Point:
            case MarketFamily::Discrete:
                require_data(!m.points.empty(), who + ": market law needs points");
                if (m.family == MarketFamily::Discrete)
                    require_data(m.weights.size() == m.points.size(), who + ": market weights/points mismatch");
                for (const auto& p : m.points)
                    require_data(static_cast<int>(p.size()) == d, who + ": market points need d coordinates");
                break;
            case MarketFamily::Gaussian:
            case MarketFamily::StudentT:
                require_data(static_cast<int>(m.mean.size()) == d && static_cast<int>(m.sd.size()) == d,
                             who + ": market mean/sd need d coordinates");
                break;
            default:
                break;
            }
            const auto& l = j.loss;
            switch (l.family) {
            case LossFamily::Point:
                require_data(l.value > 0.0 && l.value <= 1.0, who + ": loss marks must lie in (0,1]");
                break;
            case LossFamily::Uniform:
                require_data(l.lo >= 0.0 && l.hi > l.lo && l.hi <= 1.0, who + ": uniform loss needs 0 <= lo < hi <= 1");
                break;
            case LossFamily::Discrete:
                require_data(!l.values.empty() && l.values.size() == l.weights.size(), who + ": loss weights/values mismatch");
                for (double v : l.values) require_data(v > 0.0 && v <= 1.0, who + ": loss marks must lie in (0,1]");
                break;
            default:
                break;
            }
        }
    }

    // Diffusion matrix in force at time t (zero outside all segments).
    const Eigen::MatrixXd& c_at(double t) const {
        for (const auto& s : diffusion)
            if (t >= s.from && t < s.to) return s.c;
        if (zero_.rows() != d + 1) zero_ = Eigen::MatrixXd::Zero(d + 1, d + 1);
        return zero_;
    }

    // Symmetric square root of c_s. Cholesky is unusable because the last row of c vanishes.
    Eigen::MatrixXd sqrt_c_at(double t) const {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c_at(t));
        Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    }

    // Times in (0, horizon) where any characteristic changes.
    std::vector<double> breakpoints(double horizon) const {
        std::vector<double> b;
        auto add = [&](double t) {
            if (t > 0.0 && t < horizon) b.push_back(t);
        };
        for (const auto& s : diffusion) add(s.from), add(s.to);
        for (const auto& j : jumps) add(j.from), add(j.to);
        std::sort(b.begin(), b.end());
        b.erase(std::unique(b.begin(), b.end()), b.end());
        return b;
    }

    // Signature of the set of components active at t; atoms can be cached per signature and loss level.
    std::uint64_t active_mask(double t) const {
        std::uint64_t m = 0;
        for (std::size_t i = 0; i < jumps.size() && i < 64; ++i)
            if (jumps[i].active(t)) m |= (std::uint64_t{1} << i);
        return m;
    }

    // Compensator kernel F_t(dy) at loss level a as weighted atoms in R^{d+1}. Atoms with a zero
    // mark are dropped.
    AtomSet kernel_atoms(double t, double a) const {
        prepare();
        AtomSet out(d + 1);
        std::vector<double> p(d + 1, 0.0);
        for (std::size_t ci = 0; ci < jumps.size(); ++ci) {
            const auto& j = jumps[ci];
            if (!j.active(t)) continue;
            const double r = j.rate(a);
            if (r <= 0.0) continue;
            if (j.joint()) {
                double tot = 0.0;
                for (double w : j.joint_weights) tot += w;
                for (std::size_t i = 0; i < j.joint_points.size(); ++i) {
                    p = j.joint_points[i];
                    p[d] = std::max(0.0, std::min(p[d], 1.0 - a));
                    if (nonzero(p)) out.push(r * j.joint_weights[i] / tot, p.data());
                }
                continue;
            }
            if (j.market.family == MarketFamily::StudentT)
                throw DataError("student_t market marks have no exponential moments; drift integrals are undefined");
            const AtomSet& ma = market_atoms_[ci];
            std::vector<std::pair<double, double>> la;
            if (j.loss.family == LossFamily::None)
                la.emplace_back(1.0, 0.0);
            else
                la = j.loss.atoms(a, shifted_breaks(a), gl_);
            for (int m = 0; m < ma.size(); ++m)
                for (const auto& [wl, yl] : la) {
                    std::copy(ma.at(m), ma.at(m) + d, p.begin());
                    p[d] = yl;
                    if (nonzero(p)) out.push(r * ma.w[m] * wl, p.data());
                }
        }
        return out;
    }

    // Candidate arrivals on [0, horizon) from the bounding rates of every component, sorted by time.
    std::vector<Candidate> draw_candidates(double horizon, Rng& rng) const {
        std::vector<Candidate> out;
        std::exponential_distribution<double> ex(1.0);
        std::uniform_real_distribution<double> un(0.0, 1.0);
        for (std::size_t ci = 0; ci < jumps.size(); ++ci) {
            const auto& j = jumps[ci];
            const double rate = j.bound_rate();
            const double end = std::min(j.to, horizon);
            if (rate <= 0.0 || end <= j.from) continue;
            double t = j.from;
            while (true) {
                t += ex(rng) / rate;
                if (t >= end) break;
                Candidate c;
                c.t = t;
                c.component = static_cast<int>(ci);
                c.u = un(rng);
                if (j.joint()) {
                    std::discrete_distribution<int> pick(j.joint_weights.begin(), j.joint_weights.end());
                    const auto& pt = j.joint_points[pick(rng)];
                    c.market.assign(pt.begin(), pt.begin() + d);
                    c.loss = pt[d];
                } else {
                    c.market = j.market.sample(rng, d);
                    c.loss = j.loss.sample(rng);
                }
                out.push_back(std::move(c));
            }
        }
        std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) { return a.t < b.t; });
        return out;
    }

    // Resolves a candidate against the loss level just before its time. Returns the jump mark in
    // R^{d+1} with the loss mark capped at 1 - a, or nothing when thinned out or null.
    std::optional<std::vector<double>> resolve(const Candidate& c, double a) const {
        const auto& j = jumps[c.component];
        if (c.u * j.bound_rate() >= j.rate(a)) return std::nullopt;
        std::vector<double> y(d + 1, 0.0);
        std::copy(c.market.begin(), c.market.end(), y.begin());
        y[d] = std::max(0.0, std::min(c.loss, 1.0 - a));
        if (!nonzero(y)) return std::nullopt;
        return y;
    }

    void prepare() const {
        if (prepared_nodes_ == quad_nodes && market_atoms_.size() == jumps.size()) return;
        market_atoms_.clear();
        for (const auto& j : jumps)
            market_atoms_.push_back(j.joint() || j.market.family == MarketFamily::StudentT
                                        ? AtomSet(d)
                                        : j.market.atoms(d, quad_nodes));
        gl_ = quad::gauss_legendre01(quad_nodes);
        prepared_nodes_ = quad_nodes;
    }

  private:
    bool nonzero(const std::vector<double>& p) const {
        for (double v : p)
            if (v != 0.0) return true;
        return false;
    }
    std::vector<double> shifted_breaks(double a) const {
        std::vector<double> b;
        for (double x : level_breaks) b.push_back(x - a);
        b.insert(b.end(), mark_breaks.begin(), mark_breaks.end());
        return b;
    }

    mutable Eigen::MatrixXd zero_;
    mutable std::vector<AtomSet> market_atoms_;
    mutable quad::Rule gl_;
    mutable int prepared_nodes_ = -1;
};

// Intensity of the indicator 1{A_t <= x} at loss level a: mass of the loss-mark kernel on (x-a, 1].
inline double loss_intensity(const DriverSpec& spec, double t, double a, double x) {
    if (!alive(a, x)) throw ContractViolation("loss_intensity: a > x, the indicator is already dead");
    double lam = 0.0;
    for (const auto& j : spec.jumps) {
        if (!j.active(t) || !j.has_loss()) continue;
        if (j.joint()) {
            double tot = 0.0, hit = 0.0;
            for (std::size_t i = 0; i < j.joint_points.size(); ++i) {
                tot += j.joint_weights[i];
                const double yl = std::min(j.joint_points[i][spec.d], 1.0 - a);
                if (x < 1.0 && crosses(a, yl, x)) hit += j.joint_weights[i];
            }
            lam += j.rate(a) * hit / tot;
        } else {
            lam += j.rate(a) * j.loss.crossing_prob(a, x);
        }
    }
    return lam;
}

// Compensator density of A itself: integral of y F^A_t(dy) at level a.
inline double loss_drift(const DriverSpec& spec, double t, double a) {
    double s = 0.0;
    for (const auto& j : spec.jumps) {
        if (!j.active(t) || !j.has_loss()) continue;
        if (j.joint()) {
            double tot = 0.0, m = 0.0;
            for (std::size_t i = 0; i < j.joint_points.size(); ++i) {
                tot += j.joint_weights[i];
                m += j.joint_weights[i] * std::max(0.0, std::min(j.joint_points[i][spec.d], 1.0 - a));
            }
            s += j.rate(a) * m / tot;
        } else {
            s += j.rate(a) * j.loss.mean_capped(a);
        }
    }
    return s;
}

struct MarginalCharacteristics {
    Eigen::MatrixXd c_market; // upper-left d x d block of c
    double c_loss = 0.0;      // always zero by construction
    AtomSet market_kernel;    // F~ on R^d, zero marks removed
    AtomSet loss_kernel;      // F^A on R at loss level a
};

// Characteristics of the two marginal processes at time t: the Levy factor and the loss process.
inline MarginalCharacteristics marginal_characteristics(const DriverSpec& spec, double t, double a = 0.0) {
    MarginalCharacteristics mc;
    const auto& c = spec.c_at(t);
    mc.c_market = c.topLeftCorner(spec.d, spec.d);
    mc.c_loss = c(spec.d, spec.d);
    mc.market_kernel = AtomSet(spec.d);
    mc.loss_kernel = AtomSet(1);
    const AtomSet k = spec.kernel_atoms(t, a);
    for (int i = 0; i < k.size(); ++i) {
        const double* p = k.at(i);
        bool mz = true;
        for (int q = 0; q < spec.d; ++q)
            if (p[q] != 0.0) mz = false;
        if (!mz) mc.market_kernel.push(k.w[i], p);
        if (p[spec.d] != 0.0) mc.loss_kernel.push(k.w[i], p + spec.d);
    }
    return mc;
}

enum class MomentCheck { Holds, Fails, CannotVerify };

inline const char* to_string(MomentCheck m) {
    switch (m) {
    case MomentCheck::Holds:
        return "holds";
    case MomentCheck::Fails:
        return "fails";
    default:
        return "cannot-verify";
    }
}

// Whether the integral of exp<u,y> over {|y| > 1} is finite for all u in the cube of half-width (1+eps)C.
// With finite activity this holds for bounded marks and for Gaussian marks; heavy-tailed families
// are reported as unverifiable rather than false.
inline MomentCheck check_exponential_moments(const DriverSpec& spec, double C, double eps) {
    require(C > 0.0 && eps > 0.0, "check_exponential_moments: C and eps must be positive");
    bool unknown = false;
    for (const auto& j : spec.jumps) {
        if (!std::isfinite(j.intensity)) return MomentCheck::Fails;
        if (j.market.family == MarketFamily::StudentT && !j.joint()) unknown = true;
    }
    return unknown ? MomentCheck::CannotVerify : MomentCheck::Holds;
}

// Relative change of a Gaussian quadrature integral of exp<u,y> when the node count is doubled.
inline double quadrature_convergence(const DriverSpec& spec, double u) {
    double worst = 0.0;
    for (const auto& j : spec.jumps) {
        if (j.joint() || j.market.family != MarketFamily::Gaussian) continue;
        auto integrate = [&](int nodes) {
            AtomSet a = j.market.atoms(spec.d, nodes);
            double s = 0.0;
            for (int i = 0; i < a.size(); ++i) {
                double dot = 0.0;
                for (int q = 0; q < spec.d; ++q) dot += u * a.at(i)[q];
                s += a.w[i] * std::exp(dot);
            }
            return s;
        };
        const double f1 = integrate(spec.quad_nodes), f2 = integrate(2 * spec.quad_nodes);
        worst = std::max(worst, std::abs(f2 - f1) / std::abs(f2));
    }
    return worst;
}

// Time grid containing multiples of dt, all tenor dates and all characteristic breakpoints.
inline std::vector<double> make_grid(const TenorStructure& tenor, const DriverSpec& spec, double dt) {
    require(dt > 0.0, "grid step must be positive");
    const double H = tenor.horizon();
    std::vector<double> g(tenor.dates());
    const auto steps = static_cast<long>(std::ceil(H / dt - 1e-9));
    for (long i = 1; i < steps; ++i) g.push_back(i * dt);
    for (double b : spec.breakpoints(H)) g.push_back(b);
    std::sort(g.begin(), g.end());
    std::vector<double> out;
    for (double t : g) {
        const int k = tenor.index_of(t);
        if (k >= 0) t = tenor.T(k); // keep tenor dates exact
        if (out.empty() || t - out.back() > kDateTol)
            out.push_back(t);
        else if (k >= 0)
            out.back() = t;
    }
    return out;
}

// One simulated path of the driver on a grid.
struct Scenario {
    std::vector<double> grid;
    std::vector<Eigen::VectorXd> dW; // increments of sqrt(c) W over each grid step, d+1 entries
    std::vector<Jump> jumps;
    std::vector<double> A; // loss at each grid point
    std::uint64_t seed = 0;
};

inline Scenario sample_path(const DriverSpec& spec, const TenorStructure& tenor, double grid_step,
                            std::uint64_t seed, std::uint64_t stream = 0) {
    Rng rng = make_rng(seed, stream);
    Scenario sc;
    sc.seed = seed;
    sc.grid = make_grid(tenor, spec, grid_step);
    const auto cands = spec.draw_candidates(tenor.horizon(), rng);
    std::normal_distribution<double> nd;
    double a = 0.0;
    std::size_t next = 0;
    sc.A.push_back(0.0);
    for (std::size_t m = 0; m + 1 < sc.grid.size(); ++m) {
        const double t0 = sc.grid[m], t1 = sc.grid[m + 1];
        Eigen::VectorXd z(spec.d + 1);
        for (int i = 0; i <= spec.d; ++i) z(i) = nd(rng);
        sc.dW.push_back(spec.sqrt_c_at(t0) * z * std::sqrt(t1 - t0));
        while (next < cands.size() && cands[next].t < t1) {
            if (auto y = spec.resolve(cands[next], a)) {
                a = add_loss(a, (*y)[spec.d]);
                sc.jumps.push_back({cands[next].t, *y});
            }
            ++next;
        }
        sc.A.push_back(a);
    }
    return sc;
}

// Exact law of A_T for discrete loss marks, by exponentiating the generator of the
// finite-state loss chain on each segment where the rates are constant.
struct LossDistribution {
    std::vector<double> values;
    std::vector<double> probs;

    double cdf(double x) const {
        double s = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i)
            if (alive(values[i], x)) s += probs[i];
        return s;
    }
    double expect(const std::function<double(double)>& f) const {
        double s = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) s += probs[i] * f(values[i]);
        return s;
    }
};

inline LossDistribution loss_distribution(const DriverSpec& spec, double T, std::size_t max_states = 4000) {
    std::vector<std::pair<std::vector<double>, std::vector<double>>> laws; // (weights, marks) per component
    for (const auto& j : spec.jumps) {
        if (!j.has_loss()) {
            laws.emplace_back();
            continue;
        }
        std::vector<double> w, v;
        if (j.joint()) {
            for (std::size_t i = 0; i < j.joint_points.size(); ++i) {
                w.push_back(j.joint_weights[i]);
                v.push_back(j.joint_points[i][spec.d]);
            }
        } else if (j.loss.family == LossFamily::Point) {
            w = {1.0};
            v = {j.loss.value};
        } else if (j.loss.family == LossFamily::Discrete) {
            w = j.loss.weights;
            v = j.loss.values;
        } else {
            throw DataError("exact loss law needs discrete loss marks");
        }
        double tot = 0.0;
        for (double x : w) tot += x;
        for (double& x : w) x /= tot;
        laws.emplace_back(w, v);
    }
    // reachable states
    std::vector<double> states{0.0};
    auto find = [&](double v) -> int {
        for (std::size_t i = 0; i < states.size(); ++i)
            if (std::abs(states[i] - v) <= kLevelTol) return static_cast<int>(i);
        return -1;
    };
    for (std::size_t s = 0; s < states.size(); ++s) {
        for (const auto& [w, v] : laws)
            for (double y : v) {
                if (y <= 0.0) continue;
                const double nv = std::min(1.0, states[s] + y);
                if (find(nv) < 0) states.push_back(nv);
                if (states.size() > max_states) throw DataError("loss chain has too many states");
            }
    }
    std::sort(states.begin(), states.end());
    const int S = static_cast<int>(states.size());
    std::vector<double> cuts{0.0};
    for (const auto& j : spec.jumps)
        for (double b : {j.from, j.to})
            if (b > 0.0 && b < T) cuts.push_back(b);
    cuts.push_back(T);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    Eigen::RowVectorXd p = Eigen::RowVectorXd::Zero(S);
    p(0) = 1.0;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        const double mid = 0.5 * (cuts[c] + cuts[c + 1]);
        Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(S, S);
        for (int s = 0; s < S; ++s)
            for (std::size_t ci = 0; ci < spec.jumps.size(); ++ci) {
                const auto& j = spec.jumps[ci];
                if (!j.active(mid) || laws[ci].first.empty()) continue;
                const double r = j.rate(states[s]);
                const auto& [w, v] = laws[ci];
                for (std::size_t i = 0; i < v.size(); ++i) {
                    const double nv = std::min(1.0, states[s] + v[i]);
                    const int to = find(nv);
                    if (to == s) continue;
                    Q(s, to) += r * w[i];
                    Q(s, s) -= r * w[i];
                }
            }
        Eigen::MatrixXd E = (Q * (cuts[c + 1] - cuts[c])).exp();
        p = p * E;
    }
    LossDistribution out;
    out.values = states;
    out.probs.assign(p.data(), p.data() + S);
    return out;
}

} // namespace cdomm
