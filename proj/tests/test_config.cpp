#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "cdomm/config.hpp"

using namespace cdomm;

namespace {

std::string tmp_config(const std::string& name, const std::string& body) {
    const auto p = std::filesystem::temp_directory_path() / ("cdomm_cfg_" + name);
    std::ofstream(p) << body;
    return p.string();
}

std::string error_of(const std::string& path) {
    try {
        load_config(path, false);
    } catch (const DataError& e) {
        return e.what();
    }
    return "";
}

const char* kMinimal = R"({
  "tenor": [0, 1, 2],
  "levels": [0.1, 1],
  "driver": { "d": 1 },
  "vols": { "sigma": [0.2, 0], "gamma": [0.1, 0], "contagion": 0.3 }
})";

} // namespace

TEST(Config, ParseErrorHasLineAndColumn) {
    const auto p = tmp_config("bad.json", "{\n  \"tenor\": [0, 1,\n  ]\n}\n");
    const std::string e = error_of(p);
    EXPECT_NE(e.find("line 3, column 3"), std::string::npos) << e;
}

TEST(Config, SemanticErrorNamesThePath) {
    const auto p = tmp_config("sem.json", R"({"tenor": [0, 1], "levels": [1], "driver": {"d": 1,
        "jumps": [{"intensity": 1, "loss": {"family": "weird"}}]}})");
    const std::string e = error_of(p);
    EXPECT_NE(e.find("/driver/jumps/0/loss/family"), std::string::npos) << e;
    const auto q = tmp_config("sem2.json", R"({"tenor": [0, 1], "levels": [1], "driver": {"d": "one"}})");
    EXPECT_NE(error_of(q).find("/driver/d: expected an integer"), std::string::npos) << error_of(q);
}

TEST(Config, ConstantVolsFillEveryTenorAndLevel) {
    const RunConfig rc = load_config(tmp_config("min.json", kMinimal), false);
    const Model& m = rc.model;
    EXPECT_EQ(m.tenor.n(), 2);
    EXPECT_EQ(m.vols.sigma_at(m.tenor, 1, 0.5)(0), 0.2);
    EXPECT_EQ(m.vols.sigma_at(m.tenor, 0, 0.0).norm(), 0.0);
    EXPECT_EQ(m.vols.gamma_at(m.tenor, 1, 0, 0.5)(0), 0.1);
    EXPECT_EQ(m.vols.gamma_at(m.tenor, 1, 1, 0.5).norm(), 0.0);
    EXPECT_EQ(m.vols.contagion[1][0](0.01), 0.3);
    EXPECT_EQ(m.vols.contagion[1][1](0.01), 0.0);
    EXPECT_EQ(m.mode, SpreadDriftMode::Consistent);
    EXPECT_EQ(rc.sim.paths, 10000);
}

TEST(Config, PiecewiseSigma) {
    const auto p = tmp_config("pw.json", R"({
      "tenor": [0, 1, 2], "levels": [1], "driver": {"d": 1},
      "vols": {"sigma": [[0, 0], {"starts": [0, 0.5], "values": [[0.1, 0], [0.3, 0]]}]}})");
    const RunConfig rc = load_config(p, false);
    EXPECT_EQ(rc.model.vols.sigma_at(rc.model.tenor, 1, 0.2)(0), 0.1);
    EXPECT_EQ(rc.model.vols.sigma_at(rc.model.tenor, 1, 0.7)(0), 0.3);
    const auto bad = tmp_config("pw2.json", R"({
      "tenor": [0, 1, 2], "levels": [1], "driver": {"d": 1},
      "vols": {"sigma": [[0, 0], {"starts": [0.5], "values": [[0.1, 0]]}]}})");
    EXPECT_NE(error_of(bad).find("/vols/sigma/1/starts: first start must be 0"), std::string::npos) << error_of(bad);
}

TEST(Config, UserSpreadDrifts) {
    const auto p = tmp_config("user.json", R"({
      "tenor": [0, 1, 2], "levels": [0.1, 1], "driver": {"d": 1},
      "spread_drift": {"mode": "user", "b": 0.02}})");
    const RunConfig rc = load_config(p, false);
    EXPECT_EQ(rc.model.mode, SpreadDriftMode::User);
    EXPECT_EQ(rc.model.user_b[1][0], 0.02);
    EXPECT_EQ(rc.model.user_b[1][1], 0.0);
    EXPECT_EQ(rc.model.user_b[0][0], 0.0);
}

TEST(Config, ExampleConfigValidates) {
    const RunConfig rc = load_config(CDOMM_EXAMPLE_CONFIG);
    EXPECT_TRUE(rc.model.validate().ok());
    EXPECT_TRUE(rc.has_tranche);
    EXPECT_EQ(check_exponential_moments(rc.model.driver, rc.model.vols.C, rc.model.vols.eps), MomentCheck::Holds);
}

TEST(Config, MissingSnapshotFile) {
    const auto p = tmp_config("snap.json", std::string(kMinimal).insert(1, "\"snapshot\": {\"riskfree\": \"nope.csv\", \"defaultable\": \"nope2.csv\"},"));
    EXPECT_THROW(load_config(p), DataError);
}
