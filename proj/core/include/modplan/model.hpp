#pragma once

/// Domain types for minimum-obstacle-displacement planning: robot and
/// obstacle states, scenarios, solutions, dynamics propagation and cost /
/// feasibility evaluation.

#include <Eigen/Core>

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace modplan {

enum class RobotModel { FirstOrder, DoubleIntegrator };
enum class TerminalMode { Soft, Hard };

/// Pose (x, y, theta) of the first-order robot model.
struct PoseState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

/// Position and velocity of the double-integrator robot model.
struct KinoState {
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
};

using RobotState = std::variant<PoseState, KinoState>;

struct PoseControl {
  double ux = 0.0;
  double uy = 0.0;
  double utheta = 0.0;
};

struct AccelControl {
  double ax = 0.0;
  double ay = 0.0;
};

using RobotControl = std::variant<PoseControl, AccelControl>;

struct ObstacleState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

struct ObstacleVelocity {
  double sx = 0.0;
  double sy = 0.0;
  double stheta = 0.0;
};

struct Displacement {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;

  /// Euclidean length of the translational part.
  double planar_norm() const;
};

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

int state_dim(RobotModel model);
int control_dim(RobotModel model);
RobotModel model_of(const RobotState& state);
RobotModel model_of(const RobotControl& control);

Eigen::VectorXd to_vector(const RobotState& state);
Eigen::VectorXd to_vector(const RobotControl& control);
Eigen::Vector3d to_vector(const ObstacleState& state);
Eigen::Vector3d to_vector(const ObstacleVelocity& velocity);

RobotState robot_state_from(RobotModel model, const Eigen::VectorXd& v);
RobotControl robot_control_from(RobotModel model, const Eigen::VectorXd& v);
ObstacleState obstacle_state_from(const Eigen::Vector3d& v);
ObstacleVelocity obstacle_velocity_from(const Eigen::Vector3d& v);

Eigen::Vector2d position(const RobotState& state);
inline Eigen::Vector2d position(const ObstacleState& state) { return {state.x, state.y}; }

/// Axis-aligned box; infinite entries mean unbounded.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static Box unbounded(int dim);
  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Eigen::VectorXd& v, double tol = 0.0) const;
  /// Largest amount by which v leaves the box (0 if inside).
  double violation(const Eigen::VectorXd& v) const;
};

struct Obstacle {
  ObstacleState initial;
  double radius = 0.5;
  Box state_bounds = Box::unbounded(3);
  Box velocity_bounds = Box::unbounded(3);
};

struct Weights {
  double alpha_r = 0.5;
  double alpha_o = 100.0;
  double alpha_re = 10.0;
};

struct Scenario {
  std::string name;
  RobotModel model = RobotModel::FirstOrder;
  RobotState start = PoseState{};
  RobotState goal = PoseState{};
  double robot_radius = 0.5;
  int horizon = 10;  // T, number of states
  double tau = 0.5;
  Box state_bounds = Box::unbounded(3);
  Box control_bounds = Box::unbounded(3);
  std::vector<Obstacle> obstacles;
  Weights weights;
  TerminalMode terminal = TerminalMode::Soft;
  // Include the heading change of the first-order model in the path term.
  bool heading_in_path_cost = false;
  // Also impose collision constraints on the final state x_T.
  bool collide_terminal = false;
  std::optional<double> big_m;
};

/// Throws ModelError naming the first violated condition.
void validate(const Scenario& scenario);

struct CostBreakdown {
  double total = 0.0;     // J = alpha_r J^r + alpha_o J^o
  double robot = 0.0;     // J^r
  double obstacle = 0.0;  // J^o
};

struct SolverInfo {
  std::string status = "unknown";
  long nodes = 0;
  double wall_seconds = 0.0;
  double cpu_seconds = 0.0;
};

struct Solution {
  RobotModel model = RobotModel::FirstOrder;
  std::vector<RobotState> states;                               // x_1..x_T
  std::vector<RobotControl> controls;                           // u_1..u_{T-1}
  std::vector<std::vector<ObstacleState>> obstacle_states;      // [i][k], k = 1..T
  std::vector<std::vector<ObstacleVelocity>> obstacle_velocities;  // [i][k], k = 1..T-1
  std::vector<std::vector<std::array<int, 4>>> binaries;        // [i][k]
  CostBreakdown cost;
  SolverInfo solver;

  int horizon() const { return static_cast<int>(states.size()); }
  int obstacle_count() const { return static_cast<int>(obstacle_states.size()); }
};

RobotState step_robot(const RobotState& state, const RobotControl& control, double tau,
                      RobotModel model);
ObstacleState step_obstacle(const ObstacleState& state, const ObstacleVelocity& velocity,
                            double tau);
Displacement total_displacement(std::span<const ObstacleState> trajectory);

/// Weighted per-step costs c_1..c_T: c_k (k < T) carries the robot step
/// k -> k+1 and the obstacle velocities s_k; c_T carries the terminal goal
/// penalty (zero in hard terminal mode).
std::vector<double> stage_costs(const Solution& solution, const Scenario& scenario);

CostBreakdown evaluate_cost(const Solution& solution, const Scenario& scenario);

struct FeasibilityTolerances {
  double general = 1e-6;
  double dynamics = 1e-9;
};

enum class ConstraintFamily {
  Dynamics,
  Endpoints,
  StateBounds,
  ControlBounds,
  ObstacleStateBounds,
  ObstacleVelocityBounds,
  Clearance,
};

std::string to_string(ConstraintFamily family);

struct Violation {
  ConstraintFamily family;
  double amount;
};

/// Maximum violation per constraint family; `violations` lists the families
/// above tolerance (empty iff feasible).
struct ViolationReport {
  double dynamics = 0.0;
  double endpoints = 0.0;
  double state_bounds = 0.0;
  double control_bounds = 0.0;
  double obstacle_state_bounds = 0.0;
  double obstacle_velocity_bounds = 0.0;
  double clearance = 0.0;
  std::vector<Violation> violations;

  bool empty() const { return violations.empty(); }
};

ViolationReport check_feasibility(const Solution& solution, const Scenario& scenario,
                                  FeasibilityTolerances tol = {});

/// Sum over obstacles of the planar displacement length ||d^i||.
double total_displacement_magnitude(const Solution& solution);

}  // namespace modplan
