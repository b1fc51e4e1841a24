#pragma once

/// Slice-count sweeps over one scenario and their report tables.

#include "modplan/bnb.hpp"
#include "modplan/model.hpp"
#include "modplan/slicing.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace modplan {

/// One (scenario, m) run. J_r and J_o are summed over slices.
struct RunRow {
  std::string scenario;
  RobotModel model = RobotModel::FirstOrder;
  int m = 1;
  double cpu_seconds = 0.0;
  double wall_seconds = 0.0;
  // epsilon against the reference solve; for m = 1 without a reference the
  // proven branch-and-bound gap.
  std::optional<double> gap;
  double robot_cost = 0.0;
  double obstacle_cost = 0.0;
  double total_cost = 0.0;
  std::string status;
  long nodes = 0;
  std::optional<GapReport> gap_report;
  std::optional<std::filesystem::path> solution_file;
};

struct RunFailure {
  int m = 1;
  std::string message;
};

struct RunReport {
  std::vector<RunRow> rows;        // completed or limit-terminated runs
  std::vector<RunFailure> failures;

  static const std::vector<std::string>& columns();
  std::string to_csv() const;
  std::string to_text() const;
};

struct RunOptions {
  std::vector<int> m_list{1};
  BnbConfig config;
  // Also solve m = 1 (reused if m = 1 is in the list) and attach gap reports.
  bool with_reference = false;
  // Solution JSON files are written here as <scenario>_m<m>.json when set.
  std::optional<std::filesystem::path> output_dir;
  bool write_timing = true;
};

/// Solver errors are recorded as failures without aborting the sweep.
RunReport run(const Scenario& scenario, const RunOptions& options);

/// File-system friendly form of a scenario name.
std::string file_stem(const std::string& name);

}  // namespace modplan
