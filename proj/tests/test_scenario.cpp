#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "gyrolimit/scenario.hpp"

using namespace gyrolimit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gyrolimit_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void expect_schema(const std::string& doc, const std::string& prefix) {
  try {
    parse_scenario(doc);
    ADD_FAILURE() << "accepted: " << doc;
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaError);
    EXPECT_EQ(std::string(e.what()).find(prefix) != std::string::npos, true) << e.what();
  }
}

const char* kOrbit = R"({"kind": "orbit", "field": {"kind": "uniform", "b0": [0, 0, 1]},
  "x0": [0, 0, 0], "v0": [1, 0, 1], "omega": 10, "T": 2, "tol": 1e-10})";

}  // namespace

TEST(ParseScenario, MinimalOrbit) {
  const Scenario sc = parse_scenario(kOrbit);
  EXPECT_EQ(sc.kind, "orbit");
  EXPECT_EQ(sc.output_dir, "out");
}

TEST(ParseScenario, SchemaErrorsNamePaths) {
  expect_schema(R"({"kind": "converge", "field": {"kind": "uniform", "b0": [0, 0, 1]},
    "x0": [0, 0, 0], "v0": [1, 0, 1], "omegas": [1e3, 1e2], "T": 1})",
                "/omegas: not sorted");
  expect_schema(R"({"kind": "wibble"})", "/kind");
  expect_schema(R"({"x0": [0, 0, 0]})", "/kind");
  expect_schema(R"({"kind": "orbit", "field": {"kind": "uniform", "b0": [0, 0]},
    "x0": [0, 0, 0], "v0": [1, 0, 1], "omega": 10, "T": 2})",
                "/field/b0");
  expect_schema(R"({"kind": "orbit", "field": {"kind": "uniform", "b0": [0, 0, 1]},
    "x0": [0, 0, 0], "v0": [1, 0, 1], "omega": 10, "T": 2, "tol": 1e-2})",
                "/tol");
  expect_schema(R"({"kind": "orbit", "field": {"kind": "bump_column", "a0": 1},
    "x0": [0, 0, 0], "v0": [1, 0, 1], "T": 2})",
                "/omega");
  expect_schema(R"({"kind": "zdrift", "a0": 1, "x0": [0.5, 0, 0], "phi_dot0": 1,
    "omegas": [10, 100], "T": 1})",
                "/x0");
}

TEST(ParseScenario, MalformedJson) {
  try {
    parse_scenario("{\"kind\": ");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
  }
}

TEST(RunScenario, OrbitPassesAndWritesArtifacts) {
  const fs::path dir = scratch("orbit");
  const RunOutcome r = run(parse_scenario(kOrbit), RunOptions{dir.string(), 1});
  EXPECT_EQ(r.exit_code, 0) << r.summary;
  EXPECT_TRUE(fs::exists(dir / "report.json"));
  EXPECT_TRUE(fs::exists(dir / "summary.txt"));
  EXPECT_NE(r.summary.find("status: PASS"), std::string::npos);
  bool csv = false;
  for (const auto& e : fs::directory_iterator(dir))
    csv |= e.path().filename().string().rfind("trajectory_", 0) == 0;
  EXPECT_TRUE(csv);
  EXPECT_EQ(r.report["status"], "pass");
}

TEST(RunScenario, ConvergeUniformReportsSlope) {
  const char* doc = R"({"kind": "converge", "field": {"kind": "uniform", "b0": [0, 0, 1]},
    "x0": [0, 0, 0], "v0": [1, 0, 1], "omegas": [100, 316.2, 1000, 3162, 10000],
    "T": 5, "tol": 1e-10})";
  const RunOutcome r = run(parse_scenario(doc), RunOptions{scratch("conv").string(), 1});
  EXPECT_EQ(r.exit_code, 0) << r.summary;
  EXPECT_NE(r.summary.find("slope"), std::string::npos);
}

TEST(RunScenario, ContractFailureExitsTwo) {
  const char* doc = R"({"kind": "converge", "field": {"kind": "uniform", "b0": [0, 0, 1]},
    "x0": [0, 0, 0], "v0": [1, 0, 1], "omegas": [100, 316.2, 1000, 3162, 10000],
    "T": 1, "tol": 1e-10, "slope_window": [-0.5, 0.5]})";
  const RunOutcome r = run(parse_scenario(doc), RunOptions{scratch("fail").string(), 1});
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.summary.find("status: FAIL"), std::string::npos);
}

TEST(RunScenario, DisplacementExitCarriesTime) {
  const char* doc = R"({"kind": "displacement", "field": {"kind": "screw_pinch", "c": 1, "Bz": 1},
    "x0": [1, 0, 0], "v0": [0.5, 0.5, 0.2], "omegas": [20], "T": 2, "tol": 1e-10,
    "domain": {"r_in": 0.99, "r_out": 1.01}})";
  const RunOutcome r = run(parse_scenario(doc), RunOptions{scratch("exit").string(), 1});
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(r.report["error"]["code"], "DomainExit");
  EXPECT_TRUE(r.report["error"].contains("time"));
  const std::string msg = r.report["error"]["message"];
  EXPECT_NE(msg.find("[displacement]"), std::string::npos);
  EXPECT_NE(msg.find("diagnostics::"), std::string::npos);
  EXPECT_NE(msg.find("t = "), std::string::npos);
}

TEST(RunScenario, IdentitiesTable) {
  const RunOutcome r = run(parse_scenario(R"({"kind": "identities", "points": 200, "seed": 4})"),
                           RunOptions{scratch("ident").string(), 1});
  EXPECT_EQ(r.exit_code, 0) << r.summary;
  EXPECT_EQ(r.report["results"]["identities"].size(), 3u);
}

TEST(RunScenario, ByteIdenticalReruns) {
  const Scenario sc = parse_scenario(R"({"kind": "confine",
    "field": {"kind": "screw_pinch", "c": 1, "Bz": 1}, "x0": [1, 0, 0], "omega": 50, "T": 2,
    "seeds": 3, "seed": 11})");
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  run(sc, RunOptions{a.string(), 1});
  run(sc, RunOptions{b.string(), 2});
  for (const auto& e : fs::directory_iterator(a))
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path().filename();
}

TEST(RunScenario, ResonanceBothBranches) {
  const char* helical = R"({"kind": "resonance",
    "boozer": {"alpha": 1, "beta": 0.5, "a": 0.2, "c": 1, "M": 1, "N": 1,
               "profile": {"mean": 1, "cos": [0.1]}},
    "v0_sq": 4, "mu0": 0.5, "t_grid": {"T": 3, "n": 31}})";
  EXPECT_EQ(run(parse_scenario(helical), RunOptions{scratch("res1").string(), 1}).exit_code, 0);
  const char* res = R"({"kind": "resonance",
    "boozer": {"alpha": 1, "beta": -1, "a": 1, "c": 0, "M": 1, "N": 1,
               "profile": {"mean": 1, "sin": [0.1]}, "phi0": 0.3},
    "v0_sq": 4, "mu0": 0.5, "times": [0.5, 1, 2]})";
  const RunOutcome r = run(parse_scenario(res), RunOptions{scratch("res0").string(), 1});
  EXPECT_EQ(r.exit_code, 0) << r.summary;
  EXPECT_EQ(r.report["results"]["vanishes"], false);
}
