#include "modplan/bnb.hpp"
#include "modplan/formulation.hpp"

#include "support/oracle.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <random>

using namespace modplan;

namespace {

Scenario bounded(RobotModel model, int T, int nobs) { return oracle::random_scenario(11, T, nobs, model); }

}  // namespace

TEST(Layout, ZeroObstaclesIsPureQp) {
  Scenario s = bounded(RobotModel::FirstOrder, 3, 0);
  const auto built = build(s);
  EXPECT_TRUE(built.problem.binaries.empty());
  EXPECT_EQ(built.problem.qp.A.rows(), 0);
  EXPECT_EQ(built.problem.qp.Aeq.rows(), 3 * (3 - 1) + 3);
}

TEST(Layout, OneObstacleCounts) {
  Scenario s = bounded(RobotModel::FirstOrder, 4, 1);
  const auto built = build(s);
  EXPECT_EQ(built.problem.binaries.size(), 12u);
  EXPECT_EQ(built.problem.groups.size(), 3u);
  // Four big-M rows and one disjunction row per group.
  EXPECT_EQ(built.problem.qp.A.rows(), 15);
  int disjunctions = 0;
  for (int r = 0; r < built.problem.qp.A.rows(); ++r) {
    if (built.problem.qp.b[r] == 3.0) ++disjunctions;
  }
  EXPECT_EQ(disjunctions, 3);
}

TEST(Layout, DoubleIntegratorTotals) {
  const auto L = VariableLayout::make(RobotModel::DoubleIntegrator, 11, 2);
  EXPECT_EQ(L.binaries.size, 80);
  EXPECT_EQ(L.total, 11 * 4 + 10 * 2 + 11 * 3 * 2 + 10 * 3 * 2 + 80);
  EXPECT_EQ(L.total, 270);
}

TEST(Layout, RangesDisjointAndExhaustive) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int T = 2 + static_cast<int>(rng() % 15);
    const int nobs = static_cast<int>(rng() % 5);
    const auto model = (rng() % 2) ? RobotModel::FirstOrder : RobotModel::DoubleIntegrator;
    const bool terminal = rng() % 2;
    const auto L = VariableLayout::make(model, T, nobs, terminal);
    const int dx = state_dim(model), du = control_dim(model);
    const int steps = terminal ? T : T - 1;
    EXPECT_EQ(L.total, T * dx + (T - 1) * du + nobs * (T * 3 + (T - 1) * 3) + 4 * steps * nobs);
    std::vector<int> hit(static_cast<std::size_t>(L.total), 0);
    for (int k = 0; k < T; ++k)
      for (int c = 0; c < dx; ++c) ++hit[static_cast<std::size_t>(L.robot_state(k, c))];
    for (int k = 0; k + 1 < T; ++k)
      for (int c = 0; c < du; ++c) ++hit[static_cast<std::size_t>(L.control(k, c))];
    for (int i = 0; i < nobs; ++i) {
      for (int k = 0; k < T; ++k)
        for (int c = 0; c < 3; ++c) ++hit[static_cast<std::size_t>(L.obstacle_state(i, k, c))];
      for (int k = 0; k + 1 < T; ++k)
        for (int c = 0; c < 3; ++c) ++hit[static_cast<std::size_t>(L.obstacle_velocity(i, k, c))];
      for (int k = 0; k < steps; ++k)
        for (int j = 0; j < 4; ++j) ++hit[static_cast<std::size_t>(L.binary(i, k, j))];
    }
    for (int h : hit) ASSERT_EQ(h, 1);
  }
}

TEST(BigM, Examples) {
  Scenario s;
  s.state_bounds.lower << 0, 0, -1;
  s.state_bounds.upper << 10, 10, 1;
  s.robot_radius = 0.5;
  Obstacle o;
  o.radius = 0.5;
  s.obstacles = {o};
  EXPECT_DOUBLE_EQ(default_big_M(s), 22.0);
  s.state_bounds.upper << 1, 1, 1;
  s.robot_radius = 0.1;
  s.obstacles[0].radius = 0.1;
  EXPECT_DOUBLE_EQ(default_big_M(s), 2.4);
}

TEST(BigM, RowsVacuousAtWorkspaceCorners) {
  for (const auto& [w, r] : {std::pair{10.0, 0.5}, std::pair{1.0, 0.1}}) {
    Scenario s;
    s.state_bounds.lower << 0, 0, -1;
    s.state_bounds.upper << w, w, 1;
    s.robot_radius = r;
    Obstacle o;
    o.radius = r;
    s.obstacles = {o};
    const double M = default_big_M(s);
    const double R = 2 * r;
    // Every row of the form +-(p - o) - M <= -R must hold for any robot and
    // obstacle positions in the box.
    for (double px : {0.0, w})
      for (double ox : {0.0, w}) {
        EXPECT_LE(-(px - ox) - M, -R + 1e-12);
        EXPECT_LE((px - ox) - M, -R + 1e-12);
      }
  }
}

TEST(BigM, DegenerateWorkspaceRejected) {
  Scenario s;
  s.state_bounds.lower << 0, 0, 0;
  s.state_bounds.upper << 0, 0, 0;
  s.robot_radius = 0.0;
  EXPECT_THROW(default_big_M(s), ModelError);
}

TEST(BigM, UnboundedWorkspaceRejected) {
  Scenario s;
  EXPECT_THROW(default_big_M(s), ModelError);
}

TEST(Build, ObstacleFreeNeedsNoWorkspace) {
  Scenario s;
  s.goal = PoseState{3, 1, 0};
  s.horizon = 4;
  const auto built = build(s);
  EXPECT_TRUE(built.problem.groups.empty());
  EXPECT_EQ(built.problem.qp.A.rows(), 0);
}

TEST(Build, RejectsStartOutsideBounds) {
  Scenario s = bounded(RobotModel::FirstOrder, 5, 1);
  Eigen::Vector3d far(100, 0, 0);
  EXPECT_THROW(build(s, robot_state_from(s.model, far), std::vector<ObstacleState>{s.obstacles[0].initial}, 1.0, 20.0),
               ModelError);
}

TEST(Build, RejectsTooSmallBigM) {
  Scenario s = bounded(RobotModel::FirstOrder, 5, 1);
  s.big_m = 0.01;
  EXPECT_THROW(build(s), ModelError);
}

TEST(Build, ObjectiveMatchesEvaluateCost) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(-2, 2);
  for (auto model : {RobotModel::FirstOrder, RobotModel::DoubleIntegrator}) {
    for (bool hard : {false, true}) {
      for (bool heading : {false, true}) {
        Scenario s = oracle::random_scenario(rng(), 6, 2, model);
        s.terminal = hard ? TerminalMode::Hard : TerminalMode::Soft;
        s.heading_in_path_cost = heading;
        const auto built = build(s);
        Eigen::VectorXd z(built.layout.total);
        for (int i = 0; i < z.size(); ++i) z[i] = U(rng);
        for (int b : built.problem.binaries) z[b] = static_cast<double>(rng() % 2);
        const Solution sol = extract(z, built.layout, s);
        EXPECT_NEAR(built.problem.qp.objective(z), sol.cost.total, 1e-9 * (1 + std::abs(sol.cost.total)));
      }
    }
  }
}

TEST(Extract, StationaryRobotAtGoalCostsNothing) {
  Scenario s = bounded(RobotModel::FirstOrder, 4, 1);
  s.start = s.goal;
  const auto built = build(s);
  const auto& L = built.layout;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(L.total);
  const Eigen::VectorXd g = to_vector(s.goal);
  for (int k = 0; k < s.horizon; ++k) z.segment(L.robot_state(k, 0), L.state_dim) = g;
  for (int k = 0; k < s.horizon; ++k) z.segment<3>(L.obstacle_state(0, k, 0)) = to_vector(s.obstacles[0].initial);
  const Solution sol = extract(z, L, s);
  EXPECT_EQ(sol.cost.total, 0.0);
}

TEST(Extract, FractionalBinaryThrows) {
  Scenario s = bounded(RobotModel::FirstOrder, 4, 1);
  const auto built = build(s);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(built.layout.total);
  z[built.problem.binaries[2]] = 0.4;
  EXPECT_THROW(extract(z, built.layout, s), ModelError);
}

TEST(Extract, SolvedVectorPassesFeasibility) {
  Scenario s = oracle::random_scenario(3, 5, 1);
  const auto built = build(s);
  const BnbResult r = solve_miqp(built.problem);
  ASSERT_TRUE(r.has_incumbent());
  const Solution sol = extract(r.incumbent, built.layout, s);
  EXPECT_TRUE(check_feasibility(sol, s).empty());
}

// Any point meeting one big-M side exactly (xi = 0) is Euclidean-clear.
TEST(Linearisation, AxisSeparationImpliesEuclidean) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> U(-1, 1);
  const double R = 0.9;
  for (int trial = 0; trial < 2000; ++trial) {
    const int side = static_cast<int>(rng() % 4);
    const double t = 3 * U(rng);
    Eigen::Vector2d d;
    switch (side) {
      case 0: d = {R, t}; break;
      case 1: d = {-R, t}; break;
      case 2: d = {t, R}; break;
      default: d = {t, -R}; break;
    }
    EXPECT_GE(d.norm(), R - 1e-12);
  }
}

// The diagonal near-contact point is Euclidean-clear yet no side is open.
TEST(Linearisation, DiagonalPointIsExcluded) {
  Scenario s = oracle::random_scenario(1, 3, 1);
  s.obstacles[0].initial = ObstacleState{3, 0, 0};
  const double R = s.robot_radius + s.obstacles[0].radius;
  const auto built = build(s);
  const auto& L = built.layout;
  const auto& qp = built.problem.qp;
  const double eps = 1e-3;
  const Eigen::Vector2d d = (R / std::sqrt(2.0) + eps) * Eigen::Vector2d(1, 1);
  ASSERT_GT(d.norm(), R);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(L.total);
  z.segment<2>(L.robot_state(1, 0)) = Eigen::Vector2d(3, 0) + d;
  z.segment<2>(L.obstacle_state(0, 1, 0)) = Eigen::Vector2d(3, 0);
  const auto& g = built.problem.groups[1];
  ASSERT_EQ(g.step, 1);
  // For every assignment with at most three ones, some big-M row is violated.
  for (int mask = 0; mask < 16; ++mask) {
    if (__builtin_popcount(static_cast<unsigned>(mask)) > 3) continue;
    for (int j = 0; j < 4; ++j) z[g.binaries[static_cast<std::size_t>(j)]] = (mask >> j) & 1;
    const Eigen::VectorXd Az = qp.A * z;
    bool violated = false;
    for (int j = 0; j < 4; ++j) violated |= Az[g.rows[static_cast<std::size_t>(j)]] > qp.b[g.rows[static_cast<std::size_t>(j)]] + 1e-12;
    EXPECT_TRUE(violated) << "mask " << mask;
  }
}

TEST(DumpJson, ContainsDimensions) {
  Scenario s = bounded(RobotModel::FirstOrder, 3, 1);
  const auto built = build(s);
  const auto j = nlohmann::json::parse(dump_json(built.problem));
  EXPECT_EQ(j["H"]["rows"].get<int>(), built.layout.total);
  EXPECT_EQ(j["binaries"].size(), built.problem.binaries.size());
}
