#pragma once

/// Static SVG plots of a solved scenario. Output bytes depend only on the
/// inputs.

#include "modplan/model.hpp"

#include <filesystem>
#include <string>

namespace modplan {

struct SvgOptions {
  double pixels_per_metre = 60.0;
  double margin = 0.5;  // metres around the drawn content
  // Obstacles displaced less than this (metres) get no arrow.
  double arrow_threshold = 1e-3;
};

/// Elements carry classes "workspace", "marker-start", "marker-goal",
/// "robot-path", "robot", "obstacle-initial", "obstacle-final" and
/// "displacement-arrow". Throws ModelError if the pair is inconsistent.
std::string render_svg(const Scenario& scenario, const Solution& solution, const SvgOptions& options = {});

void write_svg(const Scenario& scenario, const Solution& solution, const std::filesystem::path& path,
               const SvgOptions& options = {});

}  // namespace modplan
