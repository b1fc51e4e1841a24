#include "modplan/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace modplan {

double Displacement::planar_norm() const { return std::hypot(dx, dy); }

int state_dim(RobotModel model) { return model == RobotModel::FirstOrder ? 3 : 4; }
int control_dim(RobotModel model) { return model == RobotModel::FirstOrder ? 3 : 2; }

RobotModel model_of(const RobotState& state) {
  return std::holds_alternative<PoseState>(state) ? RobotModel::FirstOrder
                                                  : RobotModel::DoubleIntegrator;
}

RobotModel model_of(const RobotControl& control) {
  return std::holds_alternative<PoseControl>(control) ? RobotModel::FirstOrder
                                                      : RobotModel::DoubleIntegrator;
}

Eigen::VectorXd to_vector(const RobotState& state) {
  if (const auto* p = std::get_if<PoseState>(&state)) {
    return Eigen::Vector3d(p->x, p->y, p->theta);
  }
  const auto& s = std::get<KinoState>(state);
  return Eigen::Vector4d(s.x, s.y, s.vx, s.vy);
}

Eigen::VectorXd to_vector(const RobotControl& control) {
  if (const auto* p = std::get_if<PoseControl>(&control)) {
    return Eigen::Vector3d(p->ux, p->uy, p->utheta);
  }
  const auto& a = std::get<AccelControl>(control);
  return Eigen::Vector2d(a.ax, a.ay);
}

Eigen::Vector3d to_vector(const ObstacleState& state) {
  return {state.x, state.y, state.theta};
}

Eigen::Vector3d to_vector(const ObstacleVelocity& velocity) {
  return {velocity.sx, velocity.sy, velocity.stheta};
}

RobotState robot_state_from(RobotModel model, const Eigen::VectorXd& v) {
  if (v.size() != state_dim(model)) throw ModelError("robot state has wrong dimension");
  if (model == RobotModel::FirstOrder) return PoseState{v[0], v[1], v[2]};
  return KinoState{v[0], v[1], v[2], v[3]};
}

RobotControl robot_control_from(RobotModel model, const Eigen::VectorXd& v) {
  if (v.size() != control_dim(model)) throw ModelError("robot control has wrong dimension");
  if (model == RobotModel::FirstOrder) return PoseControl{v[0], v[1], v[2]};
  return AccelControl{v[0], v[1]};
}

ObstacleState obstacle_state_from(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }
ObstacleVelocity obstacle_velocity_from(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }

Eigen::Vector2d position(const RobotState& state) {
  return std::visit([](const auto& s) { return Eigen::Vector2d(s.x, s.y); }, state);
}

Box Box::unbounded(int dim) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {Eigen::VectorXd::Constant(dim, -inf), Eigen::VectorXd::Constant(dim, inf)};
}

bool Box::contains(const Eigen::VectorXd& v, double tol) const { return violation(v) <= tol; }

double Box::violation(const Eigen::VectorXd& v) const {
  if (v.size() != lower.size()) throw ModelError("box dimension mismatch");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    worst = std::max({worst, lower[i] - v[i], v[i] - upper[i]});
  }
  return worst;
}

namespace {

void check_box(const Box& box, int dim, const std::string& what) {
  if (box.lower.size() != dim || box.upper.size() != dim) {
    throw ModelError(what + " has dimension " + std::to_string(box.lower.size()) +
                     ", expected " + std::to_string(dim));
  }
  for (int i = 0; i < dim; ++i) {
    if (std::isnan(box.lower[i]) || std::isnan(box.upper[i]) || box.lower[i] > box.upper[i]) {
      throw ModelError(what + " has lower > upper at component " + std::to_string(i));
    }
  }
}

}  // namespace

void validate(const Scenario& s) {
  const int nx = state_dim(s.model);
  if (s.horizon < 2) throw ModelError("T must be at least 2");
  if (!(s.tau > 0.0)) throw ModelError("tau must be positive");
  if (!(s.robot_radius > 0.0)) throw ModelError("robot_radius must be positive");
  if (s.weights.alpha_r < 0.0 || s.weights.alpha_o < 0.0 || s.weights.alpha_re < 0.0) {
    throw ModelError("weights must be non-negative");
  }
  if (model_of(s.start) != s.model) throw ModelError("start does not match the robot model");
  if (model_of(s.goal) != s.model) throw ModelError("goal does not match the robot model");
  check_box(s.state_bounds, nx, "state bounds");
  check_box(s.control_bounds, control_dim(s.model), "control bounds");
  if (!s.state_bounds.contains(to_vector(s.start), 1e-9)) {
    throw ModelError("start lies outside the state bounds");
  }
  if (!s.state_bounds.contains(to_vector(s.goal), 1e-9)) {
    throw ModelError("goal lies outside the state bounds");
  }
  if (s.big_m && !(*s.big_m > 0.0)) throw ModelError("big_m must be positive");
  const Eigen::Vector2d start = position(s.start);
  for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
    const auto& o = s.obstacles[i];
    const std::string tag = "obstacle " + std::to_string(i);
    if (!(o.radius > 0.0)) throw ModelError(tag + " radius must be positive");
    check_box(o.state_bounds, 3, tag + " state bounds");
    check_box(o.velocity_bounds, 3, tag + " velocity bounds");
    if (!o.state_bounds.contains(to_vector(o.initial), 1e-9)) {
      throw ModelError(tag + " initial state lies outside its bounds");
    }
    if ((start - position(o.initial)).norm() < s.robot_radius + o.radius - 1e-9) {
      throw ModelError("start is in collision with " + tag);
    }
  }
}

RobotState step_robot(const RobotState& state, const RobotControl& control, double tau,
                      RobotModel model) {
  if (model_of(state) != model || model_of(control) != model) {
    throw ModelError("state/control form does not match the robot model");
  }
  if (model == RobotModel::FirstOrder) {
    const auto& x = std::get<PoseState>(state);
    const auto& u = std::get<PoseControl>(control);
    return PoseState{x.x + tau * u.ux, x.y + tau * u.uy, x.theta + tau * u.utheta};
  }
  const auto& x = std::get<KinoState>(state);
  const auto& a = std::get<AccelControl>(control);
  const double half = 0.5 * tau * tau;
  return KinoState{x.x + tau * x.vx + half * a.ax, x.y + tau * x.vy + half * a.ay,
                   x.vx + tau * a.ax, x.vy + tau * a.ay};
}

ObstacleState step_obstacle(const ObstacleState& state, const ObstacleVelocity& velocity,
                            double tau) {
  return {state.x + tau * velocity.sx, state.y + tau * velocity.sy,
          state.theta + tau * velocity.stheta};
}

Displacement total_displacement(std::span<const ObstacleState> trajectory) {
  if (trajectory.empty()) throw ModelError("empty obstacle trajectory");
  const auto& first = trajectory.front();
  const auto& last = trajectory.back();
  return {last.x - first.x, last.y - first.y, last.theta - first.theta};
}

namespace {

void check_dimensions(const Solution& sol, const Scenario& s) {
  const auto T = static_cast<std::size_t>(s.horizon);
  if (sol.model != s.model) throw ModelError("solution model differs from scenario model");
  if (sol.states.size() != T || sol.controls.size() != T - 1) {
    throw ModelError("solution horizon does not match scenario T");
  }
  if (sol.obstacle_states.size() != s.obstacles.size() ||
      sol.obstacle_velocities.size() != s.obstacles.size()) {
    throw ModelError("solution obstacle count does not match scenario");
  }
  for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
    if (sol.obstacle_states[i].size() != T || sol.obstacle_velocities[i].size() != T - 1) {
      throw ModelError("obstacle trajectory length does not match scenario T");
    }
  }
  for (const auto& x : sol.states) {
    if (model_of(x) != s.model) throw ModelError("state form does not match the robot model");
  }
  for (const auto& u : sol.controls) {
    if (model_of(u) != s.model) throw ModelError("control form does not match the robot model");
  }
}

double step_term(const RobotState& a, const RobotState& b, const Scenario& s) {
  double d = (position(b) - position(a)).squaredNorm();
  if (s.heading_in_path_cost && s.model == RobotModel::FirstOrder) {
    const double dth = std::get<PoseState>(b).theta - std::get<PoseState>(a).theta;
    d += dth * dth;
  }
  return d;
}

double terminal_term(const Solution& sol, const Scenario& s) {
  if (s.terminal == TerminalMode::Hard) return 0.0;
  return s.weights.alpha_re * (to_vector(sol.states.back()) - to_vector(s.goal)).squaredNorm();
}

double velocity_term(const Solution& sol, const Scenario& s, std::size_t k) {
  double sum = 0.0;
  for (const auto& traj : sol.obstacle_velocities) {
    sum += s.tau * to_vector(traj[k]).squaredNorm();
  }
  return sum;
}

}  // namespace

std::vector<double> stage_costs(const Solution& sol, const Scenario& s) {
  check_dimensions(sol, s);
  const auto T = static_cast<std::size_t>(s.horizon);
  std::vector<double> c(T, 0.0);
  for (std::size_t k = 0; k + 1 < T; ++k) {
    c[k] = s.weights.alpha_r * step_term(sol.states[k], sol.states[k + 1], s) +
           s.weights.alpha_o * velocity_term(sol, s, k);
  }
  c[T - 1] = s.weights.alpha_r * terminal_term(sol, s);
  return c;
}

CostBreakdown evaluate_cost(const Solution& sol, const Scenario& s) {
  check_dimensions(sol, s);
  const auto T = static_cast<std::size_t>(s.horizon);
  CostBreakdown out;
  for (std::size_t k = 0; k + 1 < T; ++k) {
    out.robot += step_term(sol.states[k], sol.states[k + 1], s);
    out.obstacle += velocity_term(sol, s, k);
  }
  out.robot += terminal_term(sol, s);
  out.total = s.weights.alpha_r * out.robot + s.weights.alpha_o * out.obstacle;
  return out;
}

std::string to_string(ConstraintFamily family) {
  switch (family) {
    case ConstraintFamily::Dynamics: return "dynamics";
    case ConstraintFamily::Endpoints: return "endpoints";
    case ConstraintFamily::StateBounds: return "state_bounds";
    case ConstraintFamily::ControlBounds: return "control_bounds";
    case ConstraintFamily::ObstacleStateBounds: return "obstacle_state_bounds";
    case ConstraintFamily::ObstacleVelocityBounds: return "obstacle_velocity_bounds";
    case ConstraintFamily::Clearance: return "clearance";
  }
  return "unknown";
}

ViolationReport check_feasibility(const Solution& sol, const Scenario& s,
                                  FeasibilityTolerances tol) {
  check_dimensions(sol, s);
  ViolationReport r;
  const auto T = static_cast<std::size_t>(s.horizon);
  const auto inf_norm = [](const Eigen::VectorXd& v) { return v.lpNorm<Eigen::Infinity>(); };

  for (std::size_t k = 0; k + 1 < T; ++k) {
    const auto next = step_robot(sol.states[k], sol.controls[k], s.tau, s.model);
    r.dynamics = std::max(r.dynamics, inf_norm(to_vector(sol.states[k + 1]) - to_vector(next)));
    r.control_bounds = std::max(r.control_bounds, s.control_bounds.violation(to_vector(sol.controls[k])));
  }
  for (const auto& x : sol.states) {
    r.state_bounds = std::max(r.state_bounds, s.state_bounds.violation(to_vector(x)));
  }
  r.endpoints = inf_norm(to_vector(sol.states.front()) - to_vector(s.start));
  if (s.terminal == TerminalMode::Hard) {
    r.endpoints = std::max(r.endpoints, (position(sol.states.back()) - position(s.goal))
                                            .lpNorm<Eigen::Infinity>());
  }

  const std::size_t collision_steps = s.collide_terminal ? T : T - 1;
  for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
    const auto& ob = s.obstacles[i];
    const auto& states = sol.obstacle_states[i];
    const auto& vels = sol.obstacle_velocities[i];
    r.endpoints = std::max(r.endpoints, inf_norm(to_vector(states.front()) - to_vector(ob.initial)));
    for (std::size_t k = 0; k + 1 < T; ++k) {
      const auto next = step_obstacle(states[k], vels[k], s.tau);
      r.dynamics = std::max(r.dynamics, inf_norm(to_vector(states[k + 1]) - to_vector(next)));
      r.obstacle_velocity_bounds =
          std::max(r.obstacle_velocity_bounds, ob.velocity_bounds.violation(to_vector(vels[k])));
    }
    for (const auto& o : states) {
      r.obstacle_state_bounds = std::max(r.obstacle_state_bounds, ob.state_bounds.violation(to_vector(o)));
    }
    for (std::size_t k = 0; k < collision_steps; ++k) {
      const double gap = (position(sol.states[k]) - position(states[k])).norm();
      r.clearance = std::max(r.clearance, s.robot_radius + ob.radius - gap);
    }
  }

  const auto flag = [&](ConstraintFamily f, double amount, double limit) {
    if (amount > limit) r.violations.push_back({f, amount});
  };
  flag(ConstraintFamily::Dynamics, r.dynamics, tol.dynamics);
  flag(ConstraintFamily::Endpoints, r.endpoints, tol.general);
  flag(ConstraintFamily::StateBounds, r.state_bounds, tol.general);
  flag(ConstraintFamily::ControlBounds, r.control_bounds, tol.general);
  flag(ConstraintFamily::ObstacleStateBounds, r.obstacle_state_bounds, tol.general);
  flag(ConstraintFamily::ObstacleVelocityBounds, r.obstacle_velocity_bounds, tol.general);
  flag(ConstraintFamily::Clearance, r.clearance, tol.general);
  return r;
}

double total_displacement_magnitude(const Solution& sol) {
  double sum = 0.0;
  for (const auto& traj : sol.obstacle_states) {
    sum += total_displacement(traj).planar_norm();
  }
  return sum;
}

}  // namespace modplan
