#include "modplan/slicing.hpp"

#include "support/oracle.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cmath>

using namespace modplan;

namespace {

BnbConfig group_side() {
  BnbConfig c;
  c.branching = BranchingRule::GroupSide;
  return c;
}

std::vector<int> sizes(const SlicePlan& p) {
  std::vector<int> out;
  for (const auto& r : p.ranges) out.push_back(r.size());
  return out;
}

}  // namespace

TEST(PlanSlices, EvenSplit) {
  const auto p = plan_slices(20, 4);
  EXPECT_EQ(sizes(p), (std::vector<int>{5, 5, 5, 5}));
  EXPECT_EQ(p.ranges.front().first, 1);
  EXPECT_EQ(p.ranges.back().last, 20);
}

TEST(PlanSlices, SingleSliceCoversHorizon) {
  const auto p = plan_slices(10, 1);
  ASSERT_EQ(p.ranges.size(), 1u);
  EXPECT_EQ(p.ranges[0].first, 1);
  EXPECT_EQ(p.ranges[0].last, 10);
}

TEST(PlanSlices, RemainderToLastSlice) {
  const auto p = plan_slices(10, 3);
  EXPECT_EQ(sizes(p), (std::vector<int>{3, 3, 4}));
}

TEST(PlanSlices, ContiguousCover) {
  for (int T = 2; T <= 30; ++T) {
    for (int m = 1; m < T; ++m) {
      const auto p = plan_slices(T, m, 7.0);
      ASSERT_EQ(static_cast<int>(p.ranges.size()), m);
      ASSERT_EQ(p.terminal_weights.size(), p.ranges.size());
      int next = 1;
      for (const auto& r : p.ranges) {
        EXPECT_EQ(r.first, next);
        EXPECT_GE(r.size(), T / m);
        next = r.last + 1;
      }
      EXPECT_EQ(next, T + 1);
      for (double w : p.terminal_weights) EXPECT_EQ(w, 7.0);
    }
  }
}

TEST(PlanSlices, RejectsInvalidCount) {
  EXPECT_THROW(plan_slices(10, 0), std::invalid_argument);
  EXPECT_THROW(plan_slices(10, 10), std::invalid_argument);
  EXPECT_THROW(plan_slices(10, -2), std::invalid_argument);
}

TEST(SolveSliced, SingleSliceMatchesFullSolve) {
  const Scenario s = oracle::random_scenario(12, 8, 2);
  const auto built = build(s);
  const auto direct = solve_miqp(built.problem, group_side());
  const auto sliced = solve_sliced(s, 1, group_side());
  ASSERT_TRUE(direct.has_incumbent());
  EXPECT_NEAR(sliced.solution.cost.total, direct.value, 1e-6 * std::max(1.0, direct.value));
  ASSERT_EQ(sliced.slices.size(), 1u);
}

TEST(SolveSliced, ConcatenationIsConsistent) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    for (int m : {2, 3}) {
      const Scenario s = oracle::random_scenario(seed, 12, 2);
      const auto res = solve_sliced(s, m, group_side());
      const Solution& sol = res.solution;
      // Full-length trajectories with the original start pinned.
      ASSERT_EQ(sol.horizon(), s.horizon);
      ASSERT_EQ(static_cast<int>(sol.controls.size()), s.horizon - 1);
      ASSERT_EQ(sol.obstacle_count(), 2);
      EXPECT_LT((to_vector(sol.states.front()) - to_vector(s.start)).norm(), 1e-9);
      for (int i = 0; i < 2; ++i) {
        EXPECT_LT((to_vector(sol.obstacle_states[static_cast<std::size_t>(i)].front()) -
                   to_vector(s.obstacles[static_cast<std::size_t>(i)].initial))
                      .norm(),
                  1e-9);
      }
      // Dynamics hold across slice junctions and clearance everywhere.
      EXPECT_TRUE(check_feasibility(sol, s).empty()) << "seed " << seed << " m " << m;
      // Recomputed cost equals the stored cost.
      const auto c = evaluate_cost(sol, s);
      EXPECT_NEAR(c.total, sol.cost.total, 1e-9 * std::max(1.0, c.total));
      ASSERT_EQ(static_cast<int>(res.slices.size()), m);
    }
  }
}

TEST(SolveSliced, NotBetterThanFullSolve) {
  for (std::uint64_t seed = 20; seed <= 25; ++seed) {
    const Scenario s = oracle::random_scenario(seed, 10, 2);
    const auto full = solve_exact(s, group_side());
    for (int m : {2, 3, 4}) {
      const auto sliced = solve_sliced(s, m, group_side());
      EXPECT_GE(sliced.solution.cost.total, full.solution.cost.total - 1e-6 * std::max(1.0, full.solution.cost.total))
          << "seed " << seed << " m " << m;
    }
  }
}

TEST(GapAnalysis, HalfAgainIsHalf) {
  // Robot resting at the goal, one obstacle pushed at constant velocity;
  // scaling the velocity by sqrt(1.5) scales J by 1.5.
  Scenario s = oracle::random_scenario(31, 5, 1);
  s.start = s.goal;
  const auto make = [&](double speed) {
    Solution sol;
    sol.model = s.model;
    sol.states.assign(static_cast<std::size_t>(s.horizon), s.goal);
    sol.controls.assign(static_cast<std::size_t>(s.horizon - 1), PoseControl{});
    std::vector<ObstacleState> traj{s.obstacles[0].initial};
    const ObstacleVelocity v{0, speed, 0};
    for (int k = 0; k + 1 < s.horizon; ++k) traj.push_back(step_obstacle(traj.back(), v, s.tau));
    sol.obstacle_states = {traj};
    sol.obstacle_velocities = {std::vector<ObstacleVelocity>(static_cast<std::size_t>(s.horizon - 1), v)};
    sol.cost = evaluate_cost(sol, s);
    return sol;
  };
  const Solution ref = make(0.2), worse = make(0.2 * std::sqrt(1.5));
  const auto plan = plan_slices(s.horizon, 2, s.weights.alpha_re);
  const auto g = gap_analysis(worse, ref, s, plan);
  ASSERT_TRUE(g.epsilon.has_value());
  EXPECT_NEAR(*g.epsilon, 0.5, 1e-12);
  ASSERT_TRUE(g.delta_max && g.bound);
  EXPECT_GT(*g.delta_max, 0.0);
  EXPECT_LE(*g.epsilon, *g.bound + 1e-12);
}

TEST(GapAnalysis, SelfComparisonIsZero) {
  const Scenario s = oracle::random_scenario(32, 9, 2);
  const auto full = solve_exact(s, group_side());
  const auto plan = plan_slices(s.horizon, 3, s.weights.alpha_re);
  const auto g = gap_analysis(full.solution, full.solution, s, plan);
  ASSERT_TRUE(g.epsilon && g.delta_max && g.bound);
  EXPECT_NEAR(*g.epsilon, 0.0, 1e-12);
  EXPECT_NEAR(*g.delta_max, 0.0, 1e-12);
  ASSERT_EQ(g.deltas.size(), 3u);
}

TEST(GapAnalysis, SliceCostsPartitionTotal) {
  const Scenario s = oracle::random_scenario(33, 12, 2);
  const auto full = solve_exact(s, group_side());
  const auto sliced = solve_sliced(s, 3, group_side());
  const auto g = gap_analysis(sliced.solution, full.solution, s, sliced.plan);
  double a = 0, b = 0;
  for (double c : g.sliced_slice_costs) a += c;
  for (double c : g.optimal_slice_costs) b += c;
  EXPECT_NEAR(a, g.sliced_cost, 1e-9 * std::max(1.0, a));
  ASSERT_TRUE(g.optimal_cost);
  EXPECT_NEAR(b, *g.optimal_cost, 1e-9 * std::max(1.0, b));
  // The sum of per-slice excesses is the total excess, so eps <= m delta_max / J*.
  ASSERT_TRUE(g.epsilon && g.bound);
  EXPECT_LE(*g.epsilon, *g.bound + 1e-12);
}

TEST(GapAnalysis, WithoutReferenceOmitsRatios) {
  const Scenario s = oracle::random_scenario(34, 8, 1);
  const auto sliced = solve_sliced(s, 2, group_side());
  const auto g = gap_analysis(sliced.solution, std::nullopt, s, sliced.plan);
  EXPECT_FALSE(g.epsilon);
  EXPECT_FALSE(g.optimal_cost);
  EXPECT_TRUE(g.deltas.empty());
  const auto j = nlohmann::json::parse(to_json(g));
  EXPECT_FALSE(j.contains("epsilon"));
  EXPECT_TRUE(j.contains("J_s"));
  EXPECT_FALSE(j.contains("J_star"));
}

TEST(TwoCorridors, SlicingChangesTheActiveSet) {
  const Scenario s = oracle::two_corridor_scenario();
  const auto full = solve_exact(s, group_side());
  const auto sliced = solve_sliced(s, 2, group_side());
  ASSERT_TRUE(check_feasibility(full.solution, s).empty());
  ASSERT_TRUE(check_feasibility(sliced.solution, s).empty());
  const auto moved = [](const Solution& sol) {
    std::vector<int> out;
    for (int i = 0; i < sol.obstacle_count(); ++i) {
      if (total_displacement(sol.obstacle_states[static_cast<std::size_t>(i)]).planar_norm() > 1e-3) out.push_back(i);
    }
    return out;
  };
  // Obstacles: 0 wall, 1 A, 2 B, 3 C.
  EXPECT_EQ(moved(full.solution), (std::vector<int>{3}));
  EXPECT_EQ(moved(sliced.solution), (std::vector<int>{1, 2}));
  EXPECT_NEAR(total_displacement_magnitude(full.solution), 3.0, 0.01);
  EXPECT_NEAR(total_displacement_magnitude(sliced.solution), 4.0, 0.01);
}
