#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "lqm/runner.hpp"

using namespace lqm;
using lqm::testing::dm2_bc;
using lqm::testing::dm2_net;

namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  EXPECT_TRUE(in) << p;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ScenarioFile load(const char* name) {
  return parse_scenario(read_file(fs::path(SCENARIO_DIR) / name));
}

fs::path tmpdir(const char* name) {
  const fs::path p = fs::temp_directory_path() / "lqm_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(Conservation, Dm2BothEngines) {
  const Network net = dm2_net();
  const auto bc = dm2_bc(net, 0.45);
  const NetworkState ic = make_empty_state(net);
  const ScnSimulation sim{{Engine::lq, Engine::ctm}, 1.75e-4, 0.0125, 0.3, 1,
                          false};
  for (Engine e : sim.engines) {
    const auto run = run_engine(net, ic, bc, sim, e);
    EXPECT_LE(run.conservation, 1e-6) << engine_name(e);
  }
}

TEST(RunEngine, CflRejectionNamesBound) {
  const Network net = dm2_net();
  const auto bc = dm2_bc(net, 0.45);
  const ScnSimulation sim{{Engine::lq}, 0.02, 0.0125, 0.1, 1, false};
  try {
    run_engine(net, make_empty_state(net), bc, sim, Engine::lq);
    FAIL() << "expected CFL rejection";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("0.015"), std::string::npos);
  }
}

TEST(TrajectoryCsv, DeterministicBytes) {
  const auto dir = tmpdir("determinism");
  const auto scn = load("single_link.scn");
  run_scenario(scn, dir / "a");
  run_scenario(scn, dir / "b");
  EXPECT_EQ(read_file(dir / "a" / "lq_trajectory.csv"),
            read_file(dir / "b" / "lq_trajectory.csv"));
  EXPECT_EQ(read_file(dir / "a" / "ctm_trajectory.csv"),
            read_file(dir / "b" / "ctm_trajectory.csv"));
  EXPECT_EQ(read_file(dir / "a" / "ctm_cells.csv"),
            read_file(dir / "b" / "ctm_cells.csv"));
}

TEST(TrajectoryCsv, SchemaAndPrecision) {
  const auto dir = tmpdir("schema");
  auto scn = load("dm2_xi45.scn");
  scn.sim.horizon = 0.02;  // keep the test quick
  scn.sim.engines = {Engine::lq};
  run_scenario(scn, dir);
  std::ifstream in(dir / "lq_trajectory.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "t,link,k,f,g,commodity,k_w,f_w,g_w");

  // The single-link network has no commodities, so no optional columns.
  auto single = load("single_link.scn");
  single.sim.horizon = 0.02;
  single.sim.engines = {Engine::lq};
  run_scenario(single, dir / "plain");
  std::ifstream in2(dir / "plain" / "lq_trajectory.csv");
  std::getline(in2, header);
  EXPECT_EQ(header, "t,link,k,f,g");
}

TEST(TrajectoryCsv, PrecisionEnvOverride) {
  EXPECT_EQ(csv_precision(), 12);
  setenv("LQM_FLOAT_PRECISION", "4", 1);
  EXPECT_EQ(csv_precision(), 4);
  setenv("LQM_FLOAT_PRECISION", "99", 1);  // out of range, ignored
  EXPECT_EQ(csv_precision(), 12);
  unsetenv("LQM_FLOAT_PRECISION");
  EXPECT_EQ(csv_num(1.0 / 3, 4), "0.3333");
}

TEST(RunScenario, ReportContents) {
  const auto dir = tmpdir("report");
  auto scn = load("dm2_xi70.scn");
  scn.sim.engines = {Engine::lq};
  const auto rep = run_scenario(scn, dir);
  ASSERT_EQ(rep.jsonl.size(), 1u);
  const auto j = nlohmann::json::parse(rep.jsonl[0]);
  EXPECT_EQ(j["engine"], "lq");
  EXPECT_LE(j["conservation_rel"].get<double>(), 1e-6);
  ASSERT_TRUE(j.contains("oscillation"));
  EXPECT_EQ(j["oscillation"].size(), 2u);
  EXPECT_EQ(j["oscillation"][0]["class"], "converged");
  EXPECT_TRUE(fs::exists(dir / "lq_trajectory.csv"));
}

TEST(CompareEngines, SingleLinkAgrees) {
  const auto dir = tmpdir("compare");
  auto scn = load("single_link.scn");
  const auto rep = compare_engines(scn, dir);
  const auto j = nlohmann::json::parse(rep.jsonl[0]);
  // Both engines settle at the congested stationary density.
  const auto& link = j["comparison"][0];
  EXPECT_LE(link["terminal_rel_diff"].get<double>(), 0.01);
  EXPECT_TRUE(fs::exists(dir / "compare.jsonl"));
}

TEST(Bench, StateCountsAndValidation) {
  auto scn = load("dm2_xi45.scn");
  scn.sim.horizon = 0.02;
  const auto rep = bench(scn, 1);
  ASSERT_EQ(rep.engines.size(), 2u);
  EXPECT_EQ(rep.engines[0].engine, "lq");
  EXPECT_EQ(rep.engines[0].states, 4);
  EXPECT_EQ(rep.engines[1].engine, "ctm");
  EXPECT_EQ(rep.engines[1].states, 80 + 80 + 160 + 80);
  EXPECT_GT(rep.engines[0].seconds_per_sim_hour, 0.0);
  EXPECT_THROW(bench(scn, 0), std::invalid_argument);
}

TEST(SingleLinkOracle, WritesTable) {
  const auto dir = tmpdir("oracle");
  write_single_link_oracle(dir);
  std::ifstream in(dir / "single_link_oracle.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "t,k,f_kw,g_kw");
  std::string row;
  std::getline(in, row);
  EXPECT_EQ(row.substr(0, 2), "0,");
}

TEST(DensitySeries, RejectsDummyLinks) {
  const Network net = dm2_net();
  Trajectory traj;
  EXPECT_THROW(density_series(net, traj, 4), std::invalid_argument);
}

}  // namespace
