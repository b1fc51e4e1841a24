#include "modplan/generators.hpp"
#include "modplan/io.hpp"
#include "modplan/run.hpp"
#include "modplan/svg.hpp"

#include "support/oracle.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <regex>

using namespace modplan;
namespace fs = std::filesystem;

namespace {

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + needle.size())) ++n;
  return n;
}

BnbConfig group_side() {
  BnbConfig c;
  c.branching = BranchingRule::GroupSide;
  return c;
}

Solution straight_solution(const Scenario& s) {
  Solution sol;
  sol.model = s.model;
  const Eigen::Vector2d a = position(s.start), b = position(s.goal);
  for (int k = 0; k < s.horizon; ++k) {
    const Eigen::Vector2d p = a + (b - a) * (double(k) / (s.horizon - 1));
    sol.states.push_back(PoseState{p.x(), p.y(), 0});
  }
  const Eigen::Vector2d u = (b - a) / ((s.horizon - 1) * s.tau);
  sol.controls.assign(static_cast<std::size_t>(s.horizon - 1), PoseControl{u.x(), u.y(), 0});
  return sol;
}

}  // namespace

TEST(Run, ObstacleFreeSingleRow) {
  const Scenario s = oracle::random_scenario(1, 6, 0);
  RunOptions o;
  o.m_list = {1};
  const auto report = run(s, o);
  ASSERT_EQ(report.rows.size(), 1u);
  ASSERT_TRUE(report.rows[0].gap);
  EXPECT_NEAR(*report.rows[0].gap, 0.0, 1e-9);
  EXPECT_EQ(report.rows[0].obstacle_cost, 0.0);
  EXPECT_TRUE(report.failures.empty());
}

TEST(Run, SweepWithReference) {
  const Scenario s = oracle::random_scenario(7, 12, 4);
  RunOptions o;
  o.m_list = {1, 2, 3};
  o.with_reference = true;
  o.config = group_side();
  const auto report = run(s, o);
  ASSERT_EQ(report.rows.size(), 3u);
  ASSERT_TRUE(report.rows[0].gap);
  EXPECT_NEAR(*report.rows[0].gap, 0.0, 1e-12);
  for (std::size_t i = 1; i < 3; ++i) {
    ASSERT_TRUE(report.rows[i].gap);
    EXPECT_GE(*report.rows[i].gap, -1e-6);
    ASSERT_TRUE(report.rows[i].gap_report);
    EXPECT_EQ(report.rows[i].gap_report->m, report.rows[i].m);
  }
  // Table columns in order.
  const std::string csv = report.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "scenario,model,m,cpu_s,gap,J_r,J_o,status,nodes");
  EXPECT_EQ(count(csv, "\n"), 4u);
  const std::string text = report.to_text();
  EXPECT_NE(text.find("Gap/eps"), std::string::npos);
  EXPECT_NE(text.find("J^o"), std::string::npos);
}

TEST(Run, SlicingIsFasterOnTenObstacles) {
  GeneratorParams p;
  p.obstacles = 10;
  const Scenario s = generate(p);
  RunOptions o;
  o.m_list = {1, 2};
  o.with_reference = true;
  o.config = group_side();
  const auto report = run(s, o);
  ASSERT_EQ(report.rows.size(), 2u);
  const auto& full = report.rows[0];
  const auto& sliced = report.rows[1];
  EXPECT_GE(full.wall_seconds, 5.0 * sliced.wall_seconds);
  ASSERT_TRUE(sliced.gap);
  EXPECT_LT(*sliced.gap, 1.0);
}

TEST(Run, FailuresAreRecordedWithoutAborting) {
  const Scenario s = oracle::random_scenario(2, 6, 1);
  RunOptions o;
  o.m_list = {1, 9, 2};
  const auto report = run(s, o);
  EXPECT_EQ(report.rows.size(), 2u);
  ASSERT_EQ(report.failures.size(), 1u);
  EXPECT_EQ(report.failures[0].m, 9);
  EXPECT_NE(report.to_text().find("m=9 failed"), std::string::npos);
}

TEST(Run, WritesSolutionFiles) {
  const fs::path dir = fs::temp_directory_path() / "modplan_test_run_files";
  fs::remove_all(dir);
  Scenario s = oracle::random_scenario(3, 6, 1);
  s.name = "my scenario/1";
  RunOptions o;
  o.m_list = {1, 2};
  o.output_dir = dir;
  o.write_timing = false;
  const auto report = run(s, o);
  ASSERT_EQ(report.rows.size(), 2u);
  for (const auto& r : report.rows) {
    ASSERT_TRUE(r.solution_file);
    EXPECT_TRUE(fs::exists(*r.solution_file));
    EXPECT_TRUE(check_feasibility(load_solution(*r.solution_file), s).empty());
  }
  EXPECT_TRUE(fs::exists(dir / "my_scenario_1_m2.json"));
}

TEST(FileStem, Sanitises) {
  EXPECT_EQ(file_stem("square-9-s1"), "square-9-s1");
  EXPECT_EQ(file_stem("a b/c"), "a_b_c");
  EXPECT_EQ(file_stem(""), "scenario");
}

TEST(Svg, ObstacleFreeStraightLine) {
  const Scenario s = oracle::random_scenario(1, 5, 0);
  const std::string svg = render_svg(s, straight_solution(s));
  EXPECT_EQ(svg.rfind("<svg", 0) == 0 || svg.rfind("<?xml", 0) == 0, true);
  EXPECT_EQ(count(svg, "<polyline"), 1u);
  EXPECT_EQ(count(svg, "class=\"robot-path\""), 1u);
  EXPECT_EQ(count(svg, "class=\"marker-start\""), 1u);
  EXPECT_EQ(count(svg, "class=\"marker-goal\""), 1u);
  EXPECT_EQ(count(svg, "class=\"displacement-arrow\""), 0u);
  EXPECT_EQ(count(svg, "class=\"robot\""), 5u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Svg, OneDisplacedObstacleOneArrow) {
  const Scenario s = oracle::two_corridor_scenario();
  const auto res = solve_exact(s, group_side());
  int displaced = 0;
  for (const auto& traj : res.solution.obstacle_states) displaced += total_displacement(traj).planar_norm() > 1e-3;
  ASSERT_EQ(displaced, 1);
  const std::string svg = render_svg(s, res.solution);
  EXPECT_EQ(count(svg, "class=\"displacement-arrow\""), 1u);
  EXPECT_EQ(count(svg, "class=\"obstacle-initial\""), 4u);
  EXPECT_EQ(count(svg, "class=\"obstacle-final\""), 4u);
}

TEST(Svg, DeterministicBytes) {
  const Scenario s = oracle::random_scenario(5, 6, 2);
  const auto a = solve_exact(s);
  const auto b = solve_exact(s);
  EXPECT_EQ(render_svg(s, a.solution), render_svg(s, b.solution));
  const fs::path dir = fs::temp_directory_path() / "modplan_test_svg";
  fs::create_directories(dir);
  write_svg(s, a.solution, dir / "a.svg");
  EXPECT_EQ(read_file(dir / "a.svg"), render_svg(s, a.solution));
  // No negative zero in coordinates.
  EXPECT_FALSE(std::regex_search(render_svg(s, a.solution), std::regex("-0\\.0000[^0-9]")));
}

TEST(Svg, InconsistentPairThrows) {
  const Scenario s = oracle::random_scenario(1, 5, 1);
  Solution sol = straight_solution(oracle::random_scenario(1, 5, 0));
  EXPECT_THROW(render_svg(s, sol), ModelError);
}
