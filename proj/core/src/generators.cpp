#include "modplan/generators.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace modplan {

std::string to_string(Family family) {
  switch (family) {
    case Family::Square: return "square";
    case Family::Corridor: return "corridor";
    case Family::Random: return "random";
  }
  return "square";
}

Family family_from_string(const std::string& text) {
  if (text == "square") return Family::Square;
  if (text == "corridor") return Family::Corridor;
  if (text == "random") return Family::Random;
  throw GeneratorError("unknown scenario family '" + text + "'");
}

std::string to_string(WeightPreset preset) {
  switch (preset) {
    case WeightPreset::Default: return "default";
    case WeightPreset::Light: return "light";
    case WeightPreset::Heavy: return "heavy";
  }
  return "default";
}

WeightPreset weight_preset_from_string(const std::string& text) {
  if (text == "default") return WeightPreset::Default;
  if (text == "light") return WeightPreset::Light;
  if (text == "heavy") return WeightPreset::Heavy;
  throw GeneratorError("unknown weight preset '" + text + "'");
}

Weights weights_for(WeightPreset preset) {
  switch (preset) {
    case WeightPreset::Default: return Weights{0.5, 100.0, 10.0};
    case WeightPreset::Light: return Weights{1.0, 10.0, 1.0};
    case WeightPreset::Heavy: return Weights{1.0, 1000.0, 1.0};
  }
  return Weights{};
}

namespace {

// Portable uniform in [0, 1); std distributions differ between standard libraries.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }

std::vector<Eigen::Vector2d> square_layout(const GeneratorParams& p, std::mt19937_64& rng) {
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p.obstacles))));
  const int rows = (p.obstacles + cols - 1) / cols;
  const double dx = p.width / cols;
  const double dy = p.height / rows;
  if (std::min(dx, dy) < 2.0 * p.obstacle_radius + 2.0 * p.jitter) {
    throw GeneratorError("square family: " + std::to_string(p.obstacles) + " obstacles do not fit the field");
  }
  std::vector<Eigen::Vector2d> out;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols && static_cast<int>(out.size()) < p.obstacles; ++c) {
      Eigen::Vector2d pos(-0.5 * p.width + dx * (c + 0.5), -0.5 * p.height + dy * (r + 0.5));
      if (p.jitter > 0.0) {
        pos.x() += uniform(rng, -p.jitter, p.jitter);
        pos.y() += uniform(rng, -p.jitter, p.jitter);
      }
      out.push_back(pos);
    }
  }
  return out;
}

// Two staggered rows straddling the straight start-goal line.
std::vector<Eigen::Vector2d> corridor_layout(const GeneratorParams& p, std::mt19937_64& rng) {
  std::vector<Eigen::Vector2d> out;
  if (p.obstacles == 0) return out;
  const double dx = p.width / p.obstacles;
  if (dx < p.obstacle_radius) {
    throw GeneratorError("corridor family: " + std::to_string(p.obstacles) + " obstacles do not fit the field");
  }
  const double lane = std::min(0.25 * p.height, p.obstacle_radius);
  const double slack = std::max(0.0, 0.5 * dx - p.obstacle_radius);
  for (int i = 0; i < p.obstacles; ++i) {
    const double x = -0.5 * p.width + dx * (i + 0.5) + uniform(rng, -slack, slack);
    const double y = (i % 2 == 0 ? lane : -lane) + uniform(rng, -0.25 * lane, 0.25 * lane);
    out.emplace_back(x, y);
  }
  return out;
}

std::vector<Eigen::Vector2d> random_layout(const GeneratorParams& p, std::mt19937_64& rng) {
  std::vector<Eigen::Vector2d> out;
  const double hx = 0.5 * p.width - p.obstacle_radius;
  const double hy = 0.5 * p.height - p.obstacle_radius;
  if (p.obstacles > 0 && (hx < 0.0 || hy < 0.0)) throw GeneratorError("random family: field smaller than one obstacle");
  const long attempts = 1000L * std::max(1, p.obstacles);
  for (long a = 0; a < attempts && static_cast<int>(out.size()) < p.obstacles; ++a) {
    const Eigen::Vector2d c(uniform(rng, -hx, hx), uniform(rng, -hy, hy));
    bool clear = true;
    for (const auto& o : out) {
      if ((o - c).lpNorm<Eigen::Infinity>() < 2.0 * p.obstacle_radius) {
        clear = false;
        break;
      }
    }
    if (clear) out.push_back(c);
  }
  if (static_cast<int>(out.size()) < p.obstacles) {
    throw GeneratorError("random family: could only place " + std::to_string(out.size()) + " of " +
                         std::to_string(p.obstacles) + " obstacles");
  }
  return out;
}

RobotState at(RobotModel model, double x, double y) {
  if (model == RobotModel::FirstOrder) return PoseState{x, y, 0.0};
  return KinoState{x, y, 0.0, 0.0};
}

}  // namespace

Scenario generate(const GeneratorParams& p) {
  if (p.obstacles < 0) throw GeneratorError("obstacle count must be non-negative");
  if (!(p.width > 0.0) || !(p.height > 0.0)) throw GeneratorError("field extent must be positive");
  if (!(p.obstacle_radius > 0.0) || !(p.robot_radius > 0.0)) throw GeneratorError("radii must be positive");
  if (p.jitter < 0.0) throw GeneratorError("jitter must be non-negative");

  std::mt19937_64 rng(p.seed);
  std::vector<Eigen::Vector2d> centres;
  switch (p.family) {
    case Family::Square: centres = square_layout(p, rng); break;
    case Family::Corridor: centres = corridor_layout(p, rng); break;
    case Family::Random: centres = random_layout(p, rng); break;
  }

  Scenario s;
  s.name = p.name ? *p.name : to_string(p.family) + "-" + std::to_string(p.obstacles) + "-s" + std::to_string(p.seed);
  s.model = p.model;
  const double margin = p.robot_radius + p.obstacle_radius + 0.5;
  s.start = at(p.model, -0.5 * p.width - margin, 0.0);
  s.goal = at(p.model, 0.5 * p.width + margin, 0.0);
  s.robot_radius = p.robot_radius;
  s.horizon = p.horizon;
  s.tau = p.tau;
  // Workspace box around the field and both endpoints; obstacles share it so
  // the default big-M stays valid.
  const double pad = 1.0;
  const Eigen::Vector2d lo(-0.5 * p.width - margin - pad, -0.5 * p.height - pad);
  const Eigen::Vector2d hi(0.5 * p.width + margin + pad, 0.5 * p.height + pad);
  s.state_bounds = Box::unbounded(state_dim(p.model));
  s.state_bounds.lower.head<2>() = lo;
  s.state_bounds.upper.head<2>() = hi;
  s.control_bounds = Box::unbounded(control_dim(p.model));
  if (p.max_control) {
    s.control_bounds.lower.setConstant(-*p.max_control);
    s.control_bounds.upper.setConstant(*p.max_control);
  }
  s.weights = weights_for(p.weights);
  s.terminal = p.terminal;
  for (const auto& c : centres) {
    Obstacle ob;
    ob.initial = ObstacleState{c.x(), c.y(), 0.0};
    ob.radius = p.obstacle_radius;
    ob.state_bounds.lower.head<2>() = lo;
    ob.state_bounds.upper.head<2>() = hi;
    if (p.max_obstacle_speed) {
      ob.velocity_bounds.lower.setConstant(-*p.max_obstacle_speed);
      ob.velocity_bounds.upper.setConstant(*p.max_obstacle_speed);
    }
    s.obstacles.push_back(ob);
  }
  try {
    validate(s);
  } catch (const ModelError& e) {
    throw GeneratorError(std::string("generated scenario is invalid: ") + e.what());
  }
  return s;
}

}  // namespace modplan
