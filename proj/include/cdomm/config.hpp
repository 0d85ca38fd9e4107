#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdomm/bootstrap.hpp"
#include "cdomm/driver.hpp"
#include "cdomm/engine.hpp"
#include "cdomm/errors.hpp"
#include "cdomm/model.hpp"
#include "cdomm/pricing.hpp"
#include "cdomm/rates.hpp"
#include "cdomm/tenor_market.hpp"

namespace cdomm {

using json = nlohmann::json;

// Everything a CLI run needs. Relative file names are resolved against the config directory.
struct RunConfig {
    std::string path;
    std::string text;
    Model model;
    SimOptions sim;
    double dt = 0.02;
    double tolerance = 1e-10;
    long drift_paths = 2000;
    bool has_tranche = false;
    STCDOSpec tranche;
    std::string riskfree_csv;
    std::string defaultable_csv;
    std::string t1_legs_csv;
    std::string quotes_csv;
};

namespace cfg {

inline json parse_text(const std::string& text, const std::string& source) {
    try {
        return json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        // what() reads "[json.exception.parse_error.101] parse error at line L, column C: ..."
        std::string msg = e.what();
        const auto p = msg.find("parse error");
        throw DataError(source + ": " + (p == std::string::npos ? msg : msg.substr(p)));
    }
}

// Typed access with the JSON path in every error message.
class Node {
  public:
    Node(const json& j, std::string where) : j_(j), where_(std::move(where)) {}

    const json& raw() const { return j_; }
    const std::string& where() const { return where_; }
    bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }
    Node operator[](const std::string& key) const {
        if (!has(key)) fail("missing key '" + key + "'");
        return Node(j_.at(key), where_ + "/" + key);
    }
    Node operator[](std::size_t i) const {
        if (!j_.is_array() || i >= j_.size()) fail("missing element " + std::to_string(i));
        return Node(j_.at(i), where_ + "/" + std::to_string(i));
    }
    std::size_t size() const {
        if (!j_.is_array()) fail("expected an array");
        return j_.size();
    }
    bool is_array() const { return j_.is_array(); }
    bool is_object() const { return j_.is_object(); }
    bool is_number() const { return j_.is_number(); }

    double num() const {
        if (!j_.is_number()) fail("expected a number");
        const double v = j_.get<double>();
        if (!std::isfinite(v)) fail("expected a finite number");
        return v;
    }
    long integer() const {
        if (!j_.is_number_integer()) fail("expected an integer");
        return j_.get<long>();
    }
    bool boolean() const {
        if (!j_.is_boolean()) fail("expected true or false");
        return j_.get<bool>();
    }
    std::string str() const {
        if (!j_.is_string()) fail("expected a string");
        return j_.get<std::string>();
    }
    std::vector<double> nums() const {
        std::vector<double> v;
        for (std::size_t i = 0; i < size(); ++i) v.push_back((*this)[i].num());
        return v;
    }
    double num_or(const std::string& key, double d) const { return has(key) ? (*this)[key].num() : d; }
    long int_or(const std::string& key, long d) const { return has(key) ? (*this)[key].integer() : d; }

    [[noreturn]] void fail(const std::string& msg) const { throw DataError(where_ + ": " + msg); }

  private:
    const json& j_;
    std::string where_;
};

inline Eigen::VectorXd vec_of(const Node& n, int size) {
    const auto v = n.nums();
    if (static_cast<int>(v.size()) != size) n.fail("expected " + std::to_string(size) + " entries");
    return Eigen::Map<const Eigen::VectorXd>(v.data(), size);
}

// A vector, or {"starts": [...], "values": [[...], ...]} for a piecewise-constant function of time.
inline PiecewiseVec piecewise_of(const Node& n, int size) {
    if (n.is_array()) return PiecewiseVec::constant(vec_of(n, size));
    PiecewiseVec p;
    p.starts = n["starts"].nums();
    const Node vals = n["values"];
    if (vals.size() != p.starts.size()) n.fail("starts and values differ in length");
    for (std::size_t i = 0; i < vals.size(); ++i) p.values.push_back(vec_of(vals[i], size));
    if (p.starts.empty() || p.starts.front() != 0.0) n["starts"].fail("first start must be 0");
    for (std::size_t i = 1; i < p.starts.size(); ++i)
        if (!(p.starts[i] > p.starts[i - 1])) n["starts"].fail("starts must increase");
    return p;
}

inline Contagion contagion_of(const Node& n) {
    if (n.is_number()) return Contagion::constant(n.num());
    Contagion c;
    c.breaks = n["breaks"].nums();
    c.values = n["values"].nums();
    if (c.values.size() != c.breaks.size() + 1) n.fail("contagion needs one more value than breaks");
    return c;
}

inline MarketLaw market_of(const Node& n, int d) {
    MarketLaw m;
    const std::string f = n["family"].str();
    if (f == "none") {
        m.family = MarketFamily::None;
    } else if (f == "point") {
        m.family = MarketFamily::Point;
        m.points.push_back(n["value"].nums());
    } else if (f == "discrete") {
        m.family = MarketFamily::Discrete;
        m.weights = n["weights"].nums();
        const Node p = n["points"];
        for (std::size_t i = 0; i < p.size(); ++i) m.points.push_back(p[i].nums());
    } else if (f == "gaussian" || f == "student_t") {
        m.family = f == "gaussian" ? MarketFamily::Gaussian : MarketFamily::StudentT;
        m.mean = n["mean"].nums();
        m.sd = n["sd"].nums();
        if (m.family == MarketFamily::StudentT) m.df = n["df"].num();
    } else {
        n["family"].fail("unknown market family '" + f + "'");
    }
    (void)d;
    return m;
}

inline LossLaw loss_of(const Node& n) {
    LossLaw l;
    const std::string f = n["family"].str();
    if (f == "none") {
        l.family = LossFamily::None;
    } else if (f == "point") {
        l.family = LossFamily::Point;
        l.value = n["value"].num();
    } else if (f == "uniform") {
        l.family = LossFamily::Uniform;
        l.lo = n["lo"].num();
        l.hi = n["hi"].num();
    } else if (f == "discrete") {
        l.family = LossFamily::Discrete;
        l.weights = n["weights"].nums();
        l.values = n["values"].nums();
    } else {
        n["family"].fail("unknown loss family '" + f + "'");
    }
    return l;
}

inline DriverSpec driver_of(const Node& n, double horizon) {
    DriverSpec s;
    s.d = static_cast<int>(n["d"].integer());
    if (s.d < 1) n["d"].fail("d must be at least 1");
    s.quad_nodes = static_cast<int>(n.int_or("quad_nodes", 32));
    if (n.has("diffusion")) {
        const Node df = n["diffusion"];
        for (std::size_t i = 0; i < df.size(); ++i) {
            DiffusionSegment seg;
            seg.from = df[i].num_or("from", 0.0);
            seg.to = df[i].num_or("to", horizon);
            const Node c = df[i]["c"];
            if (c.size() != static_cast<std::size_t>(s.d + 1)) c.fail("c must have d+1 rows");
            seg.c.resize(s.d + 1, s.d + 1);
            for (int r = 0; r <= s.d; ++r) seg.c.row(r) = vec_of(c[r], s.d + 1).transpose();
            s.diffusion.push_back(seg);
        }
    }
    if (n.has("jumps")) {
        const Node js = n["jumps"];
        for (std::size_t i = 0; i < js.size(); ++i) {
            const Node j = js[i];
            JumpComponent c;
            c.name = j.has("name") ? j["name"].str() : "jump" + std::to_string(i);
            c.from = j.num_or("from", 0.0);
            c.to = j.num_or("to", horizon);
            c.intensity = j["intensity"].num();
            c.state_slope = j.num_or("state_slope", 0.0);
            if (j.has("joint")) {
                c.joint_weights = j["joint"]["weights"].nums();
                const Node p = j["joint"]["points"];
                for (std::size_t q = 0; q < p.size(); ++q) c.joint_points.push_back(p[q].nums());
            } else {
                if (j.has("market")) c.market = market_of(j["market"], s.d);
                if (j.has("loss")) c.loss = loss_of(j["loss"]);
            }
            s.jumps.push_back(c);
        }
    }
    return s;
}

// sigma: one vector for every k >= 1, or an array of n entries (vector or piecewise object).
inline void sigma_of(const Node& n, VolStructure& v, int nt) {
    const int d1 = v.d + 1;
    if (n.is_array() && n.size() > 0 && n[0].is_number()) {
        const auto pv = PiecewiseVec::constant(vec_of(n, d1));
        for (int k = 1; k < nt; ++k) v.sigma[k] = pv;
        return;
    }
    if (n.size() != static_cast<std::size_t>(nt)) n.fail("expected one entry per tenor date T_0..T_{n-1}");
    for (int k = 0; k < nt; ++k) v.sigma[k] = piecewise_of(n[k], d1);
}

// gamma: one vector for every k >= 1 and every level below 1, or an n x levels array.
inline void gamma_of(const Node& n, VolStructure& v, int nt, int nl) {
    const int d1 = v.d + 1;
    if (n.is_array() && n.size() > 0 && n[0].is_number()) {
        const auto pv = PiecewiseVec::constant(vec_of(n, d1));
        for (int k = 1; k < nt; ++k)
            for (int j = 0; j + 1 < nl; ++j) v.gamma[k][j] = pv;
        return;
    }
    if (n.size() != static_cast<std::size_t>(nt)) n.fail("expected one row per tenor date T_0..T_{n-1}");
    for (int k = 0; k < nt; ++k) {
        if (n[k].size() != static_cast<std::size_t>(nl)) n[k].fail("expected one entry per loss level");
        for (int j = 0; j < nl; ++j) v.gamma[k][j] = piecewise_of(n[k][j], d1);
    }
}

inline void contagion_table(const Node& n, VolStructure& v, int nt, int nl) {
    if (n.is_number() || n.is_object()) {
        const Contagion c = contagion_of(n);
        for (int k = 1; k < nt; ++k)
            for (int j = 0; j + 1 < nl; ++j) v.contagion[k][j] = c;
        return;
    }
    if (n.size() != static_cast<std::size_t>(nt)) n.fail("expected one row per tenor date T_0..T_{n-1}");
    for (int k = 0; k < nt; ++k) {
        if (n[k].size() != static_cast<std::size_t>(nl)) n[k].fail("expected one entry per loss level");
        for (int j = 0; j < nl; ++j) v.contagion[k][j] = contagion_of(n[k][j]);
    }
}

inline std::string resolve(const std::filesystem::path& dir, const std::string& f) {
    std::filesystem::path p(f);
    return (p.is_absolute() ? p : dir / p).string();
}

} // namespace cfg

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Parses the JSON config; with load_snapshot the curves are read and the model finalized.
inline RunConfig load_config(const std::string& path, bool load_snapshot = true) {
    RunConfig rc;
    rc.path = path;
    rc.text = read_file(path);
    const json doc = cfg::parse_text(rc.text, path);
    const cfg::Node root(doc, "");
    const auto dir = std::filesystem::path(path).parent_path();

    if (root.has("simulation")) {
        const cfg::Node s = root["simulation"];
        rc.sim.paths = s.int_or("paths", rc.sim.paths);
        rc.sim.seed = static_cast<std::uint64_t>(s.int_or("seed", 1));
        rc.sim.antithetic = s.has("antithetic") ? s["antithetic"].boolean() : true;
        rc.sim.threads = static_cast<int>(s.int_or("threads", 1));
        rc.dt = s.num_or("dt", rc.dt);
    }
    if (root.has("validate")) {
        rc.tolerance = root["validate"].num_or("tolerance", rc.tolerance);
        rc.drift_paths = root["validate"].int_or("drift_paths", rc.drift_paths);
    }
    if (root.has("bootstrap")) {
        const cfg::Node b = root["bootstrap"];
        rc.t1_legs_csv = cfg::resolve(dir, b["t1_legs"].str());
        rc.quotes_csv = cfg::resolve(dir, b["quotes"].str());
        if (b.has("riskfree")) rc.riskfree_csv = cfg::resolve(dir, b["riskfree"].str());
    }
    if (root.has("snapshot")) {
        rc.riskfree_csv = cfg::resolve(dir, root["snapshot"]["riskfree"].str());
        rc.defaultable_csv = cfg::resolve(dir, root["snapshot"]["defaultable"].str());
    }
    if (!root.has("tenor")) return rc;

    Model& m = rc.model;
    m.tenor = TenorStructure(root["tenor"].nums());
    m.grid = LevelGrid(root["levels"].nums());
    const int nt = m.tenor.n(), nl = m.grid.size();
    m.driver = cfg::driver_of(root["driver"], m.tenor.horizon());
    m.vols = VolStructure::zero(m.driver.d, nt, nl);
    if (root.has("vols")) {
        const cfg::Node v = root["vols"];
        m.vols.C = v.num_or("C", 1.0);
        m.vols.eps = v.num_or("eps", 0.1);
        if (v.has("sigma")) cfg::sigma_of(v["sigma"], m.vols, nt);
        if (v.has("gamma")) cfg::gamma_of(v["gamma"], m.vols, nt, nl);
        if (v.has("contagion")) cfg::contagion_table(v["contagion"], m.vols, nt, nl);
    }
    if (root.has("spread_drift")) {
        const cfg::Node sd = root["spread_drift"];
        const std::string mode = sd["mode"].str();
        if (mode == "consistent") {
            m.mode = SpreadDriftMode::Consistent;
        } else if (mode == "user") {
            m.mode = SpreadDriftMode::User;
            m.user_b.assign(nt, std::vector<double>(nl, 0.0));
            if (sd.has("b")) {
                const cfg::Node b = sd["b"];
                if (b.is_number()) {
                    for (int k = 1; k < nt; ++k)
                        for (int j = 0; j + 1 < nl; ++j) m.user_b[k][j] = b.num();
                } else {
                    if (b.size() != static_cast<std::size_t>(nt)) b.fail("expected one row per tenor date");
                    for (int k = 0; k < nt; ++k) {
                        const auto row = b[k].nums();
                        if (static_cast<int>(row.size()) != nl) b[k].fail("expected one entry per loss level");
                        m.user_b[k] = row;
                    }
                }
            }
        } else {
            sd["mode"].fail("mode must be 'consistent' or 'user'");
        }
    }
    if (root.has("tranche")) {
        const cfg::Node t = root["tranche"];
        rc.has_tranche = true;
        rc.tranche.dates = t["dates"].nums();
        rc.tranche.x1 = t["x1"].num();
        rc.tranche.x2 = t["x2"].num();
        rc.tranche.S = t.num_or("S", 0.0);
    }
    if (load_snapshot) {
        if (rc.riskfree_csv.empty() || rc.defaultable_csv.empty()) root.fail("missing 'snapshot' section");
        m.snap = read_snapshot(rc.riskfree_csv, rc.defaultable_csv, m.tenor, m.grid);
        m.finalize();
    }
    return rc;
}

} // namespace cdomm
