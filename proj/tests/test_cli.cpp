#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "mms/scenario.hpp"

using namespace mms;
namespace fs = std::filesystem;

namespace {

const char* grid41 = R"({"generator": {"type": "euclidean_grid", "dims": [41, 41], "h": 0.05}})";
const char* strip_spec =
    R"({"generator": {"type": "product", "factor": {"type": "euclidean_grid", "dims": [11], "h": 0.1}, "interval": [-5, 5], "h": 0.1}})";
const char* linf_strip = R"({"generator": {"type": "normed_plane", "p": "inf", "side": 10, "width": 1, "h": 0.1}})";

std::string out_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("mms_cli_" + name);
    fs::remove_all(p);
    return p.string();
}

json report_of(const ScenarioOutput& o) { return json::parse(o.files.at("report.json")); }

}  // namespace

TEST(Scenario, MissingFieldIsExitOneWithoutFiles) {
    ScenarioConfig c;
    c.space = grid41;
    c.task = "w2";
    c.out = out_dir("missing");
    c.mu = "dirac:0";
    std::ostringstream err;
    EXPECT_EQ(run_scenario(c, err), 1);
    EXPECT_NE(err.str().find("nu"), std::string::npos);
    EXPECT_FALSE(fs::exists(c.out));
}

TEST(Scenario, UnknownTaskAndBadOverride) {
    ScenarioConfig c;
    c.space = grid41;
    c.task = "ricci";
    c.out = out_dir("unknown");
    std::ostringstream err;
    EXPECT_EQ(run_scenario(c, err), 1);
    EXPECT_NE(err.str().find("task"), std::string::npos);
    c.task = "validate";
    c.tol_overrides = {"no_such_key=1"};
    EXPECT_EQ(run_scenario(c, err), 1);
    EXPECT_FALSE(fs::exists(c.out));
}

TEST(Scenario, InvalidSpaceFileIsExitOne) {
    ScenarioConfig c;
    c.space = R"({"dist": [[0, 1, 3], [1, 0, 1], [3, 1, 0]], "weight": [1, 1, 1]})";
    c.task = "w2";
    c.mu = "dirac:0";
    c.nu = "dirac:2";
    c.out = out_dir("invalid");
    std::ostringstream err;
    EXPECT_EQ(run_scenario(c, err), 1);
    EXPECT_FALSE(fs::exists(c.out));
    // the validate task reports the violation instead
    c.task = "validate";
    auto o = execute_scenario(c);
    EXPECT_EQ(o.exit_code, 2);
    EXPECT_EQ(report_of(o)["checks"][4]["name"], "triangle_inequality");
}

TEST(Scenario, TwoDiracsReportTheDistance) {
    ScenarioConfig c;
    c.space = grid41;
    c.task = "w2";
    c.mu = "dirac:0";
    c.nu = "dirac:1680";
    c.out = out_dir("w2");
    auto o = execute_scenario(c);
    EXPECT_EQ(o.exit_code, 0);
    auto j = report_of(o);
    EXPECT_EQ(j["schema"], "mms-report/1");
    EXPECT_DOUBLE_EQ(j["data"]["w2"].get<double>(), 2.0 * std::sqrt(2.0));
    for (auto& chk : j["checks"]) EXPECT_FALSE(chk["anchor"].get<std::string>().empty());
    EXPECT_TRUE(o.files.count("coupling.csv"));
}

TEST(Scenario, HilbertOnLInfinityIsNonHilbertian) {
    ScenarioConfig c;
    c.space = R"({"generator": {"type": "normed_plane", "p": "inf", "side": 2, "h": 0.05}})";
    c.task = "hilbert";
    c.out = out_dir("hilbert");
    auto o = execute_scenario(c);
    auto j = report_of(o);
    EXPECT_EQ(o.exit_code, 2);
    EXPECT_NEAR(j["data"]["hilbert_defect"].get<double>(), 1.0, 1e-6);
    EXPECT_EQ(j["data"]["classification"], "non-Hilbertian");
}

TEST(Scenario, HilbertOnTheEuclideanGrid) {
    ScenarioConfig c;
    c.space = grid41;
    c.task = "hilbert";
    c.out = out_dir("hilbert_e");
    auto o = execute_scenario(c);
    EXPECT_EQ(o.exit_code, 0);
    EXPECT_EQ(report_of(o)["data"]["classification"], "Hilbertian");
}

TEST(Scenario, FullPipelineOnTheProductStrip) {
    ScenarioConfig c;
    c.space = strip_spec;
    c.task = "full-pipeline";
    c.out = out_dir("pipeline");
    auto code = run_scenario(c);
    EXPECT_EQ(code, 0);
    auto j = json::parse(read_file(c.out + "/report.json"));
    std::vector<std::string> stages = j["stages"];
    std::vector<std::string> want{"line", "busemann", "flow", "quotient", "pythagoras", "hilbert", "cd"};
    EXPECT_EQ(stages, want);
    EXPECT_TRUE(fs::exists(c.out + "/pythagoras.csv"));
    EXPECT_TRUE(fs::exists(c.out + "/quotient.json"));
    // the exported quotient is a valid space file
    EXPECT_EQ(load_space(c.out + "/quotient.json")->size(), 11u);
}

TEST(Scenario, NegativeControlFails) {
    ScenarioConfig c;
    c.space = linf_strip;
    c.task = "full-pipeline";
    c.out = out_dir("negative");
    auto o = execute_scenario(c);
    EXPECT_EQ(o.exit_code, 2);
    auto r = o.report;
    EXPECT_EQ(r.find("pythagoras")->verdict, Verdict::fail);
    EXPECT_EQ(r.find("bilipschitz_envelope")->verdict, Verdict::pass);
    EXPECT_EQ(r.find("hilbert_defect")->verdict, Verdict::fail);
}

TEST(Scenario, ShortLineIsInconclusiveNotPass) {
    ScenarioConfig c;
    c.space = R"({"generator": {"type": "product", "factor": {"type": "euclidean_grid", "dims": [11], "h": 0.1}, "interval": [-1, 1], "h": 0.1}})";
    c.task = "split";
    c.out = out_dir("short");
    auto o = execute_scenario(c);
    EXPECT_EQ(o.report.find("line_span_confidence")->verdict, Verdict::inconclusive);
    EXPECT_NE(o.exit_code, 0);
}

TEST(Scenario, DeterministicApartFromTheTimestamp) {
    ScenarioConfig c;
    c.space = grid41;
    c.task = "laplace";
    c.seed = 42;
    c.out = out_dir("det");
    auto a = report_of(execute_scenario(c)), b = report_of(execute_scenario(c));
    a.erase("timestamp");
    b.erase("timestamp");
    EXPECT_EQ(a.dump(), b.dump());
}

TEST(Scenario, OverridesTightenAGate) {
    ScenarioConfig c;
    c.space = grid41;
    c.task = "laplace";
    c.out = out_dir("override");
    EXPECT_EQ(execute_scenario(c).exit_code, 0);
    c.tol_overrides = {"lap_rel=-0.9"};
    EXPECT_EQ(execute_scenario(c).exit_code, 2);
}
