#pragma once

/// Best-bound branch-and-bound over the binaries of a MiqpProblem, with QP
/// relaxations from qp.hpp, plus an exhaustive enumeration oracle for tests.

#include "modplan/formulation.hpp"
#include "modplan/qp.hpp"

#include <cmath>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>

namespace modplan {

enum class BranchingRule {
  MostFractional,  // two children on the binary closest to 1/2, lowest index on ties
  GroupSide,       // four children per collision group, one side forced open each
};

enum class NodeSelection { BestBound, DepthFirst };

enum class BnbStatus { Optimal, GapLimit, NodeLimit, TimeLimit, Infeasible };
std::string to_string(BnbStatus status);

struct BnbConfig {
  double integrality_tol = 1e-6;
  double abs_gap = 1e-9;
  double rel_gap = 1e-6;
  long node_limit = 2'000'000;
  double time_limit = std::numeric_limits<double>::infinity();  // wall seconds
  // Stop early once the proven relative gap falls to this value.
  std::optional<double> gap_limit;
  BranchingRule branching = BranchingRule::MostFractional;
  NodeSelection selection = NodeSelection::BestBound;
  // Open-node count above which selection falls back to depth-first.
  std::size_t memory_threshold = 200'000;
  // Rounding heuristic runs at the root and every this many nodes (0: root only).
  int heuristic_frequency = 25;
  int workers = 1;
  // Forces a single worker so the node sequence is reproducible.
  bool deterministic = true;
  // One line per processed node: id, depth, bound, fractional count.
  std::ostream* node_log = nullptr;
  QpSettings qp;
};

struct BnbResult {
  Eigen::VectorXd incumbent;
  double value = std::numeric_limits<double>::infinity();
  double lower_bound = -std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
  BnbStatus status = BnbStatus::Infeasible;
  long nodes = 0;
  double wall_seconds = 0.0;

  bool has_incumbent() const { return std::isfinite(value); }
};

/// Throws QpError when the problem data is malformed.
BnbResult solve_miqp(const MiqpProblem& problem, const BnbConfig& config = {});

struct OracleResult {
  double value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd z;
  long qp_solves = 0;
  bool feasible() const { return std::isfinite(value); }
};

/// Exact optimum by depth-first enumeration of one open side per collision
/// group (and 0/1 for binaries outside any group), pruned by the bound of the
/// problem with all undecided groups removed. Throws std::length_error when
/// the number of assignments exceeds `cap`.
OracleResult enumerate_oracle(const MiqpProblem& problem, long cap, const QpSettings& settings = {});

}  // namespace modplan
