#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "cdomm/bootstrap.hpp"
#include "cdomm/config.hpp"
#include "cdomm/csv.hpp"
#include "cdomm/diagnostics.hpp"
#include "cdomm/driver.hpp"
#include "cdomm/engine.hpp"
#include "cdomm/errors.hpp"
#include "cdomm/pricing.hpp"

using namespace cdomm;

namespace {

constexpr int kOk = 0;
constexpr int kDataError = 1;
constexpr int kNumeric = 2;
constexpr int kInconsistent = 3;

struct Flags {
    std::string config;
    std::string out = ".";
    std::optional<long> paths;
    std::optional<std::uint64_t> seed;
    std::optional<double> dt;
    std::optional<int> quad_nodes;
    std::optional<double> tolerance;
    std::optional<int> threads;
};

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

// Config file plus command-line overrides.
struct Run {
    RunConfig rc;
    Flags f;
    std::map<std::string, std::string> inputs; // file -> sha256

    void hash(const std::string& path) {
        if (!path.empty()) inputs[path] = sha256_hex(read_file(path));
    }

    SimOptions sim() const {
        SimOptions o = rc.sim;
        if (f.paths) o.paths = *f.paths;
        if (f.seed) o.seed = *f.seed;
        if (f.threads) o.threads = *f.threads;
        require_data(o.paths >= 1, "--paths must be at least 1");
        require_data(o.threads >= 1, "--threads must be at least 1");
        if (o.paths % 2 == 1) o.antithetic = false;
        return o;
    }
    double dt() const { return f.dt ? *f.dt : rc.dt; }
    double tolerance() const { return f.tolerance ? *f.tolerance : rc.tolerance; }

    nlohmann::ordered_json manifest(const std::string& command, const SimOptions* o) const {
        nlohmann::ordered_json j;
        j["command"] = command;
        j["config"] = rc.path;
        j["config_sha256"] = sha256_hex(rc.text);
        j["inputs"] = nlohmann::ordered_json::object();
        for (const auto& [p, h] : inputs) j["inputs"][p] = h;
        if (o) {
            j["seed"] = o->seed;
            j["paths"] = o->paths;
            j["antithetic"] = o->antithetic;
            j["threads"] = o->threads;
            j["dt"] = dt();
            j["quad_nodes"] = rc.model.driver.quad_nodes;
        } else {
            j["seed"] = f.seed ? *f.seed : rc.sim.seed;
        }
        j["tolerance"] = tolerance();
        return j;
    }
};

Run load(const Flags& f, bool with_model) {
    Run r;
    r.f = f;
    r.rc = load_config(f.config, false);
    if (f.quad_nodes) {
        require_data(*f.quad_nodes >= 1, "--quad-nodes must be at least 1");
        r.rc.model.driver.quad_nodes = *f.quad_nodes;
    }
    if (f.dt) require_data(*f.dt > 0.0, "--dt must be positive");
    if (f.tolerance) require_data(*f.tolerance > 0.0, "--tolerance must be positive");
    if (with_model) {
        require_data(!r.rc.riskfree_csv.empty() && !r.rc.defaultable_csv.empty(), f.config + ": missing 'snapshot' section");
        require_data(!r.rc.model.tenor.dates().empty(), f.config + ": missing 'tenor'");
        r.rc.model.snap = read_snapshot(r.rc.riskfree_csv, r.rc.defaultable_csv, r.rc.model.tenor, r.rc.model.grid);
        r.rc.model.finalize();
        r.hash(r.rc.riskfree_csv);
        r.hash(r.rc.defaultable_csv);
    }
    return r;
}

std::filesystem::path out_file(const Flags& f, const std::string& name) {
    std::filesystem::create_directories(f.out);
    return std::filesystem::path(f.out) / name;
}

void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw DataError("cannot write " + p.string());
    os << s;
}

void write_json(const std::filesystem::path& p, const nlohmann::ordered_json& j) { write_text(p, j.dump(2) + "\n"); }

nlohmann::ordered_json estimate_json(const mc::Estimate& e) {
    nlohmann::ordered_json j;
    j["mean"] = e.mean;
    j["se"] = e.se_defined() ? nlohmann::ordered_json(e.se) : nlohmann::ordered_json(nullptr);
    return j;
}

std::string g17(double v) { return std::isfinite(v) ? csv::fmt(v) : "undefined"; }

// Means under Q* at the tenor dates: loss, survival per level, Libor rates and the reweighted
// forward bond prices, which should stay at their initial values.
int cmd_simulate(const Flags& f) {
    Run r = load(f, true);
    const SimOptions o = r.sim();
    const Model& m = r.rc.model;
    Engine eng(m, {r.dt()});
    const int n = m.n(), nl = m.levels();
    const int per = 2 + nl + n + n * nl;
    auto acc = simulate(eng, o, (n + 1) * per, [&](const PathRecord& rec, double* out) {
        for (int i = 0; i <= n; ++i) {
            const PathState& st = rec.at[i];
            double* q = out + i * per;
            q[0] += st.A;
            q[1] += st.jumps;
            for (int j = 0; j < nl; ++j) q[2 + j] += alive(st.A, m.grid[j]) ? 1.0 : 0.0;
            for (int k = 0; k < n; ++k) q[2 + nl + k] += st.L[k];
            for (int k = 1; k <= n; ++k) {
                const double dens = forward_density(st.L, m.snap, m.tenor, k);
                for (int j = 0; j < nl; ++j) q[2 + nl + n + (k - 1) * nl + j] += st.F(m.tenor, m.grid, k, j) * dens;
            }
        }
    });
    std::ostringstream csvs;
    csvs << "t,quantity,k,x,mean,se\n";
    auto row = [&](int i, const char* what, int k, double x, int idx) {
        const auto e = acc.get(i * per + idx);
        csvs << csv::fmt(m.tenor.T(i)) << ',' << what << ',' << (k >= 0 ? std::to_string(k) : "") << ','
             << (std::isfinite(x) ? csv::fmt(x) : "") << ',' << csv::fmt(e.mean) << ','
             << (e.se_defined() ? csv::fmt(e.se) : "") << '\n';
    };
    for (int i = 0; i <= n; ++i) {
        row(i, "loss", -1, NAN, 0);
        row(i, "jumps", -1, NAN, 1);
        for (int j = 0; j < nl; ++j) row(i, "survival", -1, m.grid[j], 2 + j);
        for (int k = 0; k < n; ++k) row(i, "libor", k, NAN, 2 + nl + k);
        for (int k = 1; k <= n; ++k)
            for (int j = 0; j < nl; ++j)
                if (i <= k) row(i, "forward_bond", k, m.grid[j], 2 + nl + n + (k - 1) * nl + j);
    }
    const auto csv_path = out_file(f, "path_summary.csv");
    write_text(csv_path, csvs.str());
    auto man = r.manifest("simulate", &o);
    man["grid_points"] = eng.grid().size();
    man["outputs"] = {csv_path.filename().string()};
    write_json(out_file(f, "simulate.json"), man);
    std::cout << "simulate: " << o.paths << " paths, seed " << o.seed << ", " << eng.grid().size()
              << " grid points -> " << csv_path.string() << "\n";
    return kOk;
}

int cmd_price(const Flags& f) {
    Run r = load(f, true);
    require_data(r.rc.has_tranche, f.config + ": missing 'tranche' section");
    const SimOptions o = r.sim();
    Engine eng(r.rc.model, {r.dt()});
    const PriceResult p = stcdo_value(eng, r.rc.tranche, o);
    const double S_star = fair_spread(p);
    const bool se_ok = o.paths > 1;
    auto se = [&](double v) { return se_ok ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };

    auto man = r.manifest("price", &o);
    nlohmann::ordered_json t;
    t["dates"] = r.rc.tranche.dates;
    t["x1"] = r.rc.tranche.x1;
    t["x2"] = r.rc.tranche.x2;
    t["S"] = r.rc.tranche.S;
    man["tranche"] = t;
    nlohmann::ordered_json res;
    res["annuity"] = p.annuity;
    res["premium_leg"] = p.premium;
    res["premium_leg_se"] = 0.0;
    res["default_leg"] = p.default_leg;
    res["default_leg_se"] = se(p.default_se);
    res["value"] = p.value;
    res["value_se"] = se(p.value_se);
    res["fair_spread"] = S_star;
    res["fair_spread_se"] = se(p.fair_spread_se);
    res["se_undefined_single_sample"] = !se_ok;
    man["result"] = res;
    write_json(out_file(f, "price.json"), man);

    std::cout << "premium_leg = " << g17(p.premium) << "\n"
              << "premium_leg_se = 0\n"
              << "default_leg = " << g17(p.default_leg) << "\n"
              << "default_leg_se = " << (se_ok ? g17(p.default_se) : "undefined (one sample)") << "\n"
              << "value = " << g17(p.value) << "\n"
              << "value_se = " << (se_ok ? g17(p.value_se) : "undefined (one sample)") << "\n"
              << "fair_spread = " << g17(S_star) << "\n"
              << "fair_spread_se = " << (se_ok ? g17(p.fair_spread_se) : "undefined (one sample)") << "\n"
              << "paths = " << o.paths << "\n"
              << "seed = " << o.seed << "\n";
    return kOk;
}

int cmd_bootstrap(const Flags& f) {
    Run r = load(f, false);
    require_data(!r.rc.quotes_csv.empty(), f.config + ": missing 'bootstrap' section");
    require_data(!r.rc.riskfree_csv.empty(), f.config + ": 'bootstrap' needs a risk-free curve");
    r.hash(r.rc.riskfree_csv);
    r.hash(r.rc.t1_legs_csv);
    r.hash(r.rc.quotes_csv);
    const QuoteSurface q = read_quotes(r.rc.riskfree_csv, r.rc.t1_legs_csv, r.rc.quotes_csv);
    const BondSurface b = bootstrap(q);
    std::ostringstream os;
    write_surface(os, b);
    const auto surf = out_file(f, "bond_surface.csv");
    write_text(surf, os.str());

    auto man = r.manifest("bootstrap", nullptr);
    nlohmann::ordered_json flags = nlohmann::ordered_json::array();
    for (std::size_t k = 1; k <= b.maturities.size(); ++k)
        for (std::size_t i = 0; i < b.bands.size(); ++i)
            for (const auto& fl : b.flags[k][i])
                flags.push_back({{"maturity", b.maturities[k - 1]},
                                 {"band_lo", b.bands[i].lo},
                                 {"band_hi", b.bands[i].hi},
                                 {"flag", fl}});
    nlohmann::ordered_json rates = nlohmann::ordered_json::array();
    const auto br = implied_band_rates(b);
    for (std::size_t k = 1; k < b.maturities.size(); ++k)
        for (std::size_t i = 0; i < b.bands.size(); ++i) {
            nlohmann::ordered_json e{{"maturity", b.maturities[k - 1]}, {"band_lo", b.bands[i].lo},
                                     {"band_hi", b.bands[i].hi}};
            if (br[k][i].wiped) e["flag"] = "band-wiped";
            else e["rate"] = br[k][i].rate;
            rates.push_back(e);
        }
    man["flags"] = flags;
    man["implied_band_rates"] = rates;
    man["outputs"] = {surf.filename().string()};
    write_json(out_file(f, "bootstrap.json"), man);
    std::cout << "bootstrap: " << b.maturities.size() << " maturities x " << b.bands.size() << " bands, "
              << flags.size() << " flags -> " << surf.string() << "\n";
    for (const auto& fl : flags)
        std::cerr << "flag: maturity " << fl["maturity"].get<double>() << " band [" << fl["band_lo"].get<double>()
                  << "," << fl["band_hi"].get<double>() << "]: " << fl["flag"].get<std::string>() << "\n";
    return b.flagged() ? kInconsistent : kOk;
}

nlohmann::ordered_json violation_json(const std::string& rule, int k, int j, double x, const std::string& detail) {
    nlohmann::ordered_json v{{"rule", rule}};
    v["k"] = k >= 0 ? nlohmann::ordered_json(k) : nlohmann::ordered_json(nullptr);
    v["level"] = j >= 0 ? nlohmann::ordered_json(j) : nlohmann::ordered_json(nullptr);
    v["x"] = std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(nullptr);
    v["detail"] = detail;
    return v;
}

int cmd_validate(const Flags& f) {
    Run r = load(f, true);
    const Model& m = r.rc.model;
    SimOptions o = r.sim();
    if (!f.paths) {
        o.paths = r.rc.drift_paths;
        o.antithetic = o.antithetic && o.paths % 2 == 0;
    }
    const double tol = r.tolerance();

    nlohmann::ordered_json violations = nlohmann::ordered_json::array();
    nlohmann::ordered_json warnings = nlohmann::ordered_json::array();
    for (const auto& v : m.validate().violations) violations.push_back(violation_json(v.rule, v.k, v.j, v.x, v.detail));
    const MomentCheck mom = check_exponential_moments(m.driver, m.vols.C, m.vols.eps);
    if (mom == MomentCheck::Fails)
        violations.push_back(violation_json("A1", -1, -1, NAN, "exponential moments of the driver are infinite"));
    if (mom == MomentCheck::CannotVerify)
        warnings.push_back(violation_json("A1", -1, -1, NAN, "exponential moments cannot be verified for this mark law"));
    const double qc = quadrature_convergence(m.driver, (1.0 + m.vols.eps) * m.vols.C);
    if (qc > tol)
        warnings.push_back(violation_json("quadrature", -1, -1, NAN,
                                          "doubling the quadrature nodes changes the moment integral by " + csv::fmt(qc)));

    Engine eng(m, {r.dt()});
    const DriftReport rep = drift_report(eng, o);
    nlohmann::ordered_json drift = nlohmann::ordered_json::array();
    for (const auto& c : rep.cells) {
        nlohmann::ordered_json e{{"k", c.k}, {"x", c.x}, {"max_residual", c.max_residual}, {"F0", c.drift.target}};
        nlohmann::ordered_json at = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < c.drift.at.size(); ++i) {
            auto ej = estimate_json(c.drift.at[i]);
            ej["t"] = m.tenor.T(static_cast<int>(i));
            ej["drift"] = c.drift.at[i].mean - c.drift.target;
            at.push_back(ej);
        }
        e["mc_drift"] = at;
        const double z = c.drift.max_z();
        e["max_z"] = std::isfinite(z) ? nlohmann::ordered_json(z) : nlohmann::ordered_json(nullptr);
        drift.push_back(e);
        if (c.max_residual > tol)
            violations.push_back(violation_json("drift-condition", c.k, c.level, c.x,
                                                "residual " + csv::fmt(c.max_residual) + " exceeds tolerance"));
        if (o.paths > 1 && !(z <= 3.0))
            warnings.push_back(violation_json("mc-drift", c.k, c.level, c.x,
                                              "mean of F moves by more than 3 standard errors"));
    }
    auto man = r.manifest("validate", &o);
    man["spread_drift_mode"] = to_string(m.mode);
    man["exponential_moments"] = to_string(mom);
    man["violations"] = violations;
    man["warnings"] = warnings;
    man["drift_report"] = drift;
    write_json(out_file(f, "validate.json"), man);

    std::cout << "validate: " << violations.size() << " violations, " << warnings.size() << " warnings, max residual "
              << csv::fmt(rep.max_residual) << "\n";
    for (const auto& v : violations) std::cout << "violation " << v["rule"].get<std::string>() << ": " << v["detail"].get<std::string>() << "\n";
    for (const auto& v : warnings) std::cout << "warning " << v["rule"].get<std::string>() << ": " << v["detail"].get<std::string>() << "\n";
    return violations.empty() ? kOk : kInconsistent;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Top-down CDO market model: simulation, tranche pricing, bootstrap and validation"};
    app.require_subcommand(1);
    Flags f;
    auto add_common = [&](CLI::App* sub, bool mc) {
        sub->add_option("--config", f.config, "JSON model configuration")->required();
        sub->add_option("--out", f.out, "output directory");
        sub->add_option("--tolerance", f.tolerance, "drift-condition residual tolerance");
        sub->add_option("--seed", f.seed, "random seed");
        if (mc) {
            sub->add_option("--paths", f.paths, "number of Monte Carlo paths");
            sub->add_option("--dt", f.dt, "simulation grid step in years");
            sub->add_option("--quad-nodes", f.quad_nodes, "quadrature nodes for continuous mark laws");
            sub->add_option("--threads", f.threads, "worker threads (results do not depend on it)");
        }
    };
    auto* sim = app.add_subcommand("simulate", "simulate paths and write tenor-date summaries");
    auto* price = app.add_subcommand("price", "price the configured single tranche CDO");
    auto* boot = app.add_subcommand("bootstrap", "extract band bond prices from tranche quotes");
    auto* val = app.add_subcommand("validate", "check the assumptions and the drift condition");
    add_common(sim, true);
    add_common(price, true);
    add_common(boot, false);
    add_common(val, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kDataError;
    }
    try {
        if (*sim) return cmd_simulate(f);
        if (*price) return cmd_price(f);
        if (*boot) return cmd_bootstrap(f);
        if (*val) return cmd_validate(f);
    } catch (const NumericSingularity& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kNumeric;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const InsufficientPaths& e) {
        std::cerr << "insufficient paths: " << e.what() << "\n";
        return kDataError;
    } catch (const ContractViolation& e) {
        std::cerr << "invalid request: " << e.what() << "\n";
        return kDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDataError;
    }
    return kDataError;
}
