#include "modplan/formulation.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace modplan {

namespace {

using Triplet = Eigen::Triplet<double>;

class ProblemBuilder {
 public:
  explicit ProblemBuilder(int n) : n_(n), f_(Eigen::VectorXd::Zero(n)) {}

  // Adds w * (z_a - z_b - target)^2 to the objective.
  void add_square_diff(int a, int b, double w, double target = 0.0) {
    H_.emplace_back(a, a, 2.0 * w);
    H_.emplace_back(b, b, 2.0 * w);
    H_.emplace_back(a, b, -2.0 * w);
    H_.emplace_back(b, a, -2.0 * w);
    f_[a] -= 2.0 * w * target;
    f_[b] += 2.0 * w * target;
    c0_ += w * target * target;
  }

  // Adds w * (z_a - target)^2 to the objective.
  void add_square(int a, double w, double target = 0.0) {
    H_.emplace_back(a, a, 2.0 * w);
    f_[a] -= 2.0 * w * target;
    c0_ += w * target * target;
  }

  int add_eq(std::initializer_list<std::pair<int, double>> terms, double rhs) {
    for (const auto& [j, v] : terms) eq_.emplace_back(eq_rows_, j, v);
    beq_.push_back(rhs);
    return eq_rows_++;
  }

  int add_ineq(std::initializer_list<std::pair<int, double>> terms, double rhs) {
    for (const auto& [j, v] : terms) in_.emplace_back(in_rows_, j, v);
    b_.push_back(rhs);
    return in_rows_++;
  }

  QpProblem finish(Eigen::VectorXd lower, Eigen::VectorXd upper) {
    QpProblem p;
    p.H.resize(n_, n_);
    p.H.setFromTriplets(H_.begin(), H_.end());
    p.f = f_;
    p.c0 = c0_;
    p.A.resize(in_rows_, n_);
    p.A.setFromTriplets(in_.begin(), in_.end());
    p.b = Eigen::Map<Eigen::VectorXd>(b_.data(), in_rows_);
    p.Aeq.resize(eq_rows_, n_);
    p.Aeq.setFromTriplets(eq_.begin(), eq_.end());
    p.beq = Eigen::Map<Eigen::VectorXd>(beq_.data(), eq_rows_);
    p.lower = std::move(lower);
    p.upper = std::move(upper);
    return p;
  }

 private:
  int n_;
  std::vector<Triplet> H_, eq_, in_;
  Eigen::VectorXd f_;
  double c0_ = 0.0;
  std::vector<double> b_, beq_;
  int eq_rows_ = 0;
  int in_rows_ = 0;
};

void set_box(Eigen::VectorXd& lower, Eigen::VectorXd& upper, int offset, const Box& box) {
  for (int c = 0; c < box.dim(); ++c) {
    lower[offset + c] = box.lower[c];
    upper[offset + c] = box.upper[c];
  }
}

// Signed separation of the four sides: positive means separated.
std::array<double, 4> side_margins(const Eigen::Vector2d& robot, const Eigen::Vector2d& obstacle,
                                   double R) {
  const Eigen::Vector2d d = robot - obstacle;
  return {d.x() - R, -d.x() - R, d.y() - R, -d.y() - R};
}

}  // namespace

VariableLayout VariableLayout::make(RobotModel model, int horizon, int obstacles, bool collide_terminal) {
  if (horizon < 2) throw ModelError("horizon T must be at least 2");
  if (obstacles < 0) throw ModelError("negative obstacle count");
  VariableLayout l;
  l.model = model;
  l.horizon = horizon;
  l.obstacles = obstacles;
  l.collision_steps = collide_terminal ? horizon : horizon - 1;
  l.state_dim = modplan::state_dim(model);
  l.control_dim = modplan::control_dim(model);
  int at = 0;
  const auto next = [&at](int size) {
    IndexRange r{at, size};
    at += size;
    return r;
  };
  l.robot_states = next(horizon * l.state_dim);
  l.controls = next((horizon - 1) * l.control_dim);
  l.obstacle_states = next(horizon * 3 * obstacles);
  l.obstacle_velocities = next((horizon - 1) * 3 * obstacles);
  l.binaries = next(4 * l.collision_steps * obstacles);
  l.total = at;
  return l;
}

double default_big_M(const Scenario& s) {
  const Box& b = s.state_bounds;
  if (b.dim() < 2) throw ModelError("state bounds missing positional components");
  for (int c = 0; c < 2; ++c) {
    if (!std::isfinite(b.lower[c]) || !std::isfinite(b.upper[c])) {
      throw ModelError("default big-M needs a bounded workspace");
    }
  }
  double r_max = 0.0;
  for (const auto& ob : s.obstacles) r_max = std::max(r_max, ob.radius);
  const double M = (b.upper[0] - b.lower[0]) + (b.upper[1] - b.lower[1]) + 2.0 * (s.robot_radius + r_max);
  if (!(M > 0.0)) throw ModelError("big-M must be positive");
  return M;
}

BuiltProblem build(const Scenario& s, const BuildOptions& options) {
  // Without obstacles there are no big-M rows, so no workspace bound is needed.
  const bool need_m = !s.obstacles.empty();
  const double M = options.big_m ? *options.big_m : (s.big_m ? *s.big_m : (need_m ? default_big_M(s) : 0.0));
  const double tw = options.terminal_weight ? *options.terminal_weight : s.weights.alpha_re;
  if (need_m && !(M > 0.0)) throw ModelError("big-M must be positive");
  if (tw < 0.0) throw ModelError("terminal weight must be non-negative");
  if (model_of(s.start) != s.model || model_of(s.goal) != s.model) {
    throw ModelError("start/goal form does not match the robot model");
  }
  const int T = s.horizon;
  const int nobs = static_cast<int>(s.obstacles.size());
  const VariableLayout L = VariableLayout::make(s.model, T, nobs, s.collide_terminal);
  const int dx = L.state_dim;
  const double tau = s.tau;

  const Eigen::VectorXd x0 = to_vector(s.start);
  const Eigen::VectorXd xg = to_vector(s.goal);
  if (s.state_bounds.violation(x0) > 1e-6) throw ModelError("initial robot state violates state bounds");
  for (int i = 0; i < nobs; ++i) {
    const auto& ob = s.obstacles[static_cast<std::size_t>(i)];
    if (ob.state_bounds.violation(to_vector(ob.initial)) > 1e-6) {
      throw ModelError("initial state of obstacle " + std::to_string(i) + " violates its bounds");
    }
  }

  ProblemBuilder pb(L.total);
  const double ar = s.weights.alpha_r;
  const double ao = s.weights.alpha_o;

  // Path length over positions (and heading when enabled), then terminal goal tracking.
  const int path_dims = (s.heading_in_path_cost && s.model == RobotModel::FirstOrder) ? 3 : 2;
  if (ar > 0.0) {
    for (int k = 0; k + 1 < T; ++k) {
      for (int c = 0; c < path_dims; ++c) pb.add_square_diff(L.robot_state(k + 1, c), L.robot_state(k, c), ar);
    }
    if (s.terminal == TerminalMode::Soft && tw > 0.0) {
      for (int c = 0; c < dx; ++c) pb.add_square(L.robot_state(T - 1, c), ar * tw, xg[c]);
    }
  }
  if (ao > 0.0) {
    for (int i = 0; i < nobs; ++i) {
      for (int k = 0; k + 1 < T; ++k) {
        for (int c = 0; c < 3; ++c) pb.add_square(L.obstacle_velocity(i, k, c), ao * tau);
      }
    }
  }

  // Initial pin and robot dynamics.
  for (int c = 0; c < dx; ++c) pb.add_eq({{L.robot_state(0, c), 1.0}}, x0[c]);
  for (int k = 0; k + 1 < T; ++k) {
    if (s.model == RobotModel::FirstOrder) {
      for (int c = 0; c < 3; ++c) {
        pb.add_eq({{L.robot_state(k + 1, c), 1.0}, {L.robot_state(k, c), -1.0}, {L.control(k, c), -tau}}, 0.0);
      }
    } else {
      for (int c = 0; c < 2; ++c) {
        pb.add_eq({{L.robot_state(k + 1, c), 1.0},
                   {L.robot_state(k, c), -1.0},
                   {L.robot_state(k, c + 2), -tau},
                   {L.control(k, c), -0.5 * tau * tau}},
                  0.0);
        pb.add_eq({{L.robot_state(k + 1, c + 2), 1.0}, {L.robot_state(k, c + 2), -1.0}, {L.control(k, c), -tau}},
                  0.0);
      }
    }
  }
  if (s.terminal == TerminalMode::Hard) {
    for (int c = 0; c < 2; ++c) pb.add_eq({{L.robot_state(T - 1, c), 1.0}}, xg[c]);
  }

  // Obstacle pins and kinematics.
  for (int i = 0; i < nobs; ++i) {
    const Eigen::Vector3d o0 = to_vector(s.obstacles[static_cast<std::size_t>(i)].initial);
    for (int c = 0; c < 3; ++c) pb.add_eq({{L.obstacle_state(i, 0, c), 1.0}}, o0[c]);
    for (int k = 0; k + 1 < T; ++k) {
      for (int c = 0; c < 3; ++c) {
        pb.add_eq({{L.obstacle_state(i, k + 1, c), 1.0},
                   {L.obstacle_state(i, k, c), -1.0},
                   {L.obstacle_velocity(i, k, c), -tau}},
                  0.0);
      }
    }
  }

  // Big-M collision rows and disjunctions.
  MiqpProblem out;
  out.big_m = M;
  for (int i = 0; i < nobs; ++i) {
    const auto& ob = s.obstacles[static_cast<std::size_t>(i)];
    const double R = s.robot_radius + ob.radius;
    const auto m0 = side_margins(position(s.start), position(ob.initial), R);
    const double best = *std::max_element(m0.begin(), m0.end());
    if (best < -1e-9) {
      throw ModelError("initial configuration is not axis-separated from obstacle " + std::to_string(i));
    }
    for (double m : m0) {
      if (-m > M + 1e-9) {
        throw ModelError("big-M too small to relax the initial collision rows of obstacle " + std::to_string(i));
      }
    }
    for (int k = 0; k < L.collision_steps; ++k) {
      CollisionGroup g;
      g.obstacle = i;
      g.step = k;
      const int xr = L.robot_state(k, 0), yr = L.robot_state(k, 1);
      const int xo = L.obstacle_state(i, k, 0), yo = L.obstacle_state(i, k, 1);
      for (int j = 0; j < 4; ++j) g.binaries[static_cast<std::size_t>(j)] = L.binary(i, k, j);
      g.rows[0] = pb.add_ineq({{xr, -1.0}, {xo, 1.0}, {g.binaries[0], -M}}, -R);
      g.rows[1] = pb.add_ineq({{xr, 1.0}, {xo, -1.0}, {g.binaries[1], -M}}, -R);
      g.rows[2] = pb.add_ineq({{yr, -1.0}, {yo, 1.0}, {g.binaries[2], -M}}, -R);
      g.rows[3] = pb.add_ineq({{yr, 1.0}, {yo, -1.0}, {g.binaries[3], -M}}, -R);
      g.rows[4] = pb.add_ineq(
          {{g.binaries[0], 1.0}, {g.binaries[1], 1.0}, {g.binaries[2], 1.0}, {g.binaries[3], 1.0}}, 3.0);
      out.groups.push_back(g);
    }
  }

  Eigen::VectorXd lower = Eigen::VectorXd::Constant(L.total, -std::numeric_limits<double>::infinity());
  Eigen::VectorXd upper = Eigen::VectorXd::Constant(L.total, std::numeric_limits<double>::infinity());
  for (int k = 0; k < T; ++k) set_box(lower, upper, L.robot_state(k, 0), s.state_bounds);
  for (int k = 0; k + 1 < T; ++k) set_box(lower, upper, L.control(k, 0), s.control_bounds);
  for (int i = 0; i < nobs; ++i) {
    const auto& ob = s.obstacles[static_cast<std::size_t>(i)];
    for (int k = 0; k < T; ++k) set_box(lower, upper, L.obstacle_state(i, k, 0), ob.state_bounds);
    for (int k = 0; k + 1 < T; ++k) set_box(lower, upper, L.obstacle_velocity(i, k, 0), ob.velocity_bounds);
  }
  for (int j = L.binaries.offset; j < L.binaries.end(); ++j) {
    lower[j] = 0.0;
    upper[j] = 1.0;
    out.binaries.push_back(j);
  }
  out.qp = pb.finish(std::move(lower), std::move(upper));
  return {std::move(out), L};
}

BuiltProblem build(const Scenario& scenario, const RobotState& initial,
                   std::span<const ObstacleState> obstacle_initial, double terminal_weight,
                   double big_m) {
  if (obstacle_initial.size() != scenario.obstacles.size()) {
    throw ModelError("initial obstacle state count does not match scenario");
  }
  Scenario s = scenario;
  s.start = initial;
  for (std::size_t i = 0; i < s.obstacles.size(); ++i) s.obstacles[i].initial = obstacle_initial[i];
  return build(s, BuildOptions{terminal_weight, big_m});
}

Solution extract(const Eigen::VectorXd& z, const VariableLayout& L, const Scenario& s,
                 double integrality_tol) {
  if (z.size() != L.total) throw ModelError("solution vector length does not match layout");
  if (L.horizon != s.horizon || L.obstacles != static_cast<int>(s.obstacles.size()) || L.model != s.model) {
    throw ModelError("layout does not match scenario");
  }
  Solution sol;
  sol.model = L.model;
  for (int k = 0; k < L.horizon; ++k) {
    sol.states.push_back(robot_state_from(L.model, z.segment(L.robot_state(k, 0), L.state_dim)));
  }
  for (int k = 0; k + 1 < L.horizon; ++k) {
    sol.controls.push_back(robot_control_from(L.model, z.segment(L.control(k, 0), L.control_dim)));
  }
  sol.obstacle_states.resize(static_cast<std::size_t>(L.obstacles));
  sol.obstacle_velocities.resize(static_cast<std::size_t>(L.obstacles));
  sol.binaries.resize(static_cast<std::size_t>(L.obstacles));
  for (int i = 0; i < L.obstacles; ++i) {
    const auto is = static_cast<std::size_t>(i);
    for (int k = 0; k < L.horizon; ++k) {
      sol.obstacle_states[is].push_back(obstacle_state_from(z.segment<3>(L.obstacle_state(i, k, 0))));
    }
    for (int k = 0; k + 1 < L.horizon; ++k) {
      sol.obstacle_velocities[is].push_back(obstacle_velocity_from(z.segment<3>(L.obstacle_velocity(i, k, 0))));
    }
    for (int k = 0; k < L.collision_steps; ++k) {
      std::array<int, 4> xi{};
      for (int j = 0; j < 4; ++j) {
        const double v = z[L.binary(i, k, j)];
        const double r = std::round(v);
        if ((r != 0.0 && r != 1.0) || std::abs(v - r) > integrality_tol) {
          throw ModelError("binary " + std::to_string(L.binary(i, k, j)) + " is not integral (" +
                           std::to_string(v) + ")");
        }
        xi[static_cast<std::size_t>(j)] = static_cast<int>(r);
      }
      sol.binaries[is].push_back(xi);
    }
  }
  sol.cost = evaluate_cost(sol, s);
  return sol;
}

std::string dump_json(const MiqpProblem& p) {
  using nlohmann::json;
  const auto coo = [](const SparseMatrix& M) {
    json entries = json::array();
    for (Eigen::Index k = 0; k < M.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(M, k); it; ++it) {
        entries.push_back({it.row(), it.col(), it.value()});
      }
    }
    return json{{"rows", M.rows()}, {"cols", M.cols()}, {"entries", entries}};
  };
  const auto vec = [](const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (std::isfinite(v[i])) a.push_back(v[i]);
      else a.push_back(nullptr);
    }
    return a;
  };
  json groups = json::array();
  for (const auto& g : p.groups) {
    groups.push_back({{"obstacle", g.obstacle}, {"step", g.step}, {"binaries", g.binaries}, {"rows", g.rows}});
  }
  json j = {{"format_version", 1},
            {"H", coo(p.qp.H)},
            {"f", vec(p.qp.f)},
            {"c0", p.qp.c0},
            {"A", coo(p.qp.A)},
            {"b", vec(p.qp.b)},
            {"Aeq", coo(p.qp.Aeq)},
            {"beq", vec(p.qp.beq)},
            {"lower", vec(p.qp.lower)},
            {"upper", vec(p.qp.upper)},
            {"binaries", p.binaries},
            {"groups", groups},
            {"big_m", p.big_m}};
  return j.dump(1);
}

}  // namespace modplan
