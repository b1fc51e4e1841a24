#pragma once

/// Translation of a Scenario into a mixed-integer QP in the standard form of
/// qp.hpp. Collisions are linearised with four big-M rows per obstacle and
/// step plus a disjunction row requiring at least one separating side.

#include "modplan/model.hpp"
#include "modplan/qp.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace modplan {

struct IndexRange {
  int offset = 0;
  int size = 0;
  int end() const { return offset + size; }
};

/// Variable order: robot states, controls, obstacle states, obstacle
/// velocities, binaries. All step indices below are 0-based.
struct VariableLayout {
  RobotModel model = RobotModel::FirstOrder;
  int horizon = 0;
  int obstacles = 0;
  int collision_steps = 0;  // T-1, or T when the final state is constrained
  int state_dim = 0;
  int control_dim = 0;

  IndexRange robot_states;
  IndexRange controls;
  IndexRange obstacle_states;
  IndexRange obstacle_velocities;
  IndexRange binaries;
  int total = 0;

  static VariableLayout make(RobotModel model, int horizon, int obstacles, bool collide_terminal = false);

  int robot_state(int k, int c) const { return robot_states.offset + k * state_dim + c; }
  int control(int k, int c) const { return controls.offset + k * control_dim + c; }
  int obstacle_state(int i, int k, int c) const { return obstacle_states.offset + (i * horizon + k) * 3 + c; }
  int obstacle_velocity(int i, int k, int c) const {
    return obstacle_velocities.offset + (i * (horizon - 1) + k) * 3 + c;
  }
  int binary(int i, int k, int j) const { return binaries.offset + (i * collision_steps + k) * 4 + j; }
};

/// The four binaries and five inequality rows of one (obstacle, step) pair.
/// Side j = 0..3 separates the robot to the +x, -x, +y, -y side of the
/// obstacle; rows[j] is its big-M row and rows[4] the disjunction row.
struct CollisionGroup {
  int obstacle = 0;
  int step = 0;
  std::array<int, 4> binaries{};
  std::array<int, 5> rows{};
};

struct MiqpProblem {
  QpProblem qp;
  std::vector<int> binaries;  // sorted
  std::vector<CollisionGroup> groups;
  double big_m = 0.0;
};

struct BuildOptions {
  std::optional<double> terminal_weight;  // defaults to weights.alpha_re
  std::optional<double> big_m;            // defaults to scenario.big_m, then default_big_M
};

struct BuiltProblem {
  MiqpProblem problem;
  VariableLayout layout;
};

/// Uses scenario.start and the obstacles' initial states as the pinned
/// initial configuration. Throws ModelError when the initial configuration
/// is out of bounds, not axis-separated at the first step, or when big-M is
/// too small to relax the first-step rows.
BuiltProblem build(const Scenario& scenario, const BuildOptions& options = {});

/// Same, with the initial robot and obstacle states replaced.
BuiltProblem build(const Scenario& scenario, const RobotState& initial,
                   std::span<const ObstacleState> obstacle_initial, double terminal_weight,
                   double big_m);

/// Workspace x-extent + y-extent + 2 (r^r + max r^o). Throws ModelError for
/// an unbounded workspace or a non-positive result.
double default_big_M(const Scenario& scenario);

/// Binaries further than `integrality_tol` from {0,1} throw ModelError.
Solution extract(const Eigen::VectorXd& z, const VariableLayout& layout, const Scenario& scenario,
                 double integrality_tol = 1e-6);

/// Coordinate-sparse JSON debug dump of the problem.
std::string dump_json(const MiqpProblem& problem);

}  // namespace modplan
