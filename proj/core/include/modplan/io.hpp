#pragma once

/// JSON files for scenarios and solutions. Every document carries a
/// top-level "format_version".

#include "modplan/model.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

namespace modplan {

inline constexpr int kScenarioFormatVersion = 1;
inline constexpr int kSolutionFormatVersion = 1;

/// Malformed document; the message names the offending key.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string to_string(RobotModel model);
RobotModel robot_model_from_string(const std::string& text);
std::string to_string(TerminalMode mode);
TerminalMode terminal_mode_from_string(const std::string& text);

/// Parses and validates; throws SchemaError or ModelError.
Scenario scenario_from_json(const std::string& text);
std::string scenario_to_json(const Scenario& scenario);

Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

struct SolutionWriteOptions {
  // Wall and CPU seconds vary between runs; leave them out for reproducible files.
  bool include_timing = true;
};

std::string solution_to_json(const Solution& solution, const SolutionWriteOptions& options = {});
Solution solution_from_json(const std::string& text);

Solution load_solution(const std::filesystem::path& path);
void save_solution(const Solution& solution, const std::filesystem::path& path,
                   const SolutionWriteOptions& options = {});

std::string read_file(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace modplan
