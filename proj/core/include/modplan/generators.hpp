#pragma once

/// Benchmark scenario families. Every generator is a pure function of its
/// parameters: the same parameters, seed included, give the same scenario.
/// The robot starts left of the obstacle field and is asked to reach a goal
/// on its right.

#include "modplan/model.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace modplan {

enum class Family { Square, Corridor, Random };
std::string to_string(Family family);
Family family_from_string(const std::string& text);

enum class WeightPreset { Default, Light, Heavy };
std::string to_string(WeightPreset preset);
WeightPreset weight_preset_from_string(const std::string& text);
Weights weights_for(WeightPreset preset);

struct GeneratorParams {
  Family family = Family::Square;
  int obstacles = 9;
  std::uint64_t seed = 1;
  // Obstacle field extent, centred on the origin.
  double width = 6.0;
  double height = 6.0;
  double obstacle_radius = 0.4;
  double robot_radius = 0.3;
  // Uniform random offset of each grid position (square family), in metres.
  double jitter = 0.0;
  int horizon = 12;
  double tau = 0.5;
  RobotModel model = RobotModel::FirstOrder;
  TerminalMode terminal = TerminalMode::Soft;
  WeightPreset weights = WeightPreset::Default;
  // Per-axis bound on robot control; unbounded when absent.
  std::optional<double> max_control;
  // Per-axis bound on obstacle velocity; unbounded when absent.
  std::optional<double> max_obstacle_speed;
  std::optional<std::string> name;
};

/// Parameters that cannot produce a scenario (for example obstacles that do
/// not fit the field).
class GeneratorError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The result passes validate().
Scenario generate(const GeneratorParams& params);

}  // namespace modplan
