#pragma once

/// Horizon slicing: the T-state problem is split into m consecutive
/// sub-problems, each pinned to the final state of its predecessor, and the
/// concatenated result is compared against the full solve.

#include "modplan/bnb.hpp"
#include "modplan/model.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace modplan {

/// 1-based states [first, last] owned by one slice.
struct SliceRange {
  int first = 1;
  int last = 1;
  int size() const { return last - first + 1; }
};

struct SlicePlan {
  int horizon = 0;
  int m = 0;
  std::vector<SliceRange> ranges;
  // Goal-tracking weight on each slice's final state.
  std::vector<double> terminal_weights;
};

/// q = floor(T/m) states per slice, remainder to the last slice.
/// Throws std::invalid_argument unless 1 <= m <= T-1.
SlicePlan plan_slices(int horizon, int m, double terminal_weight = Weights{}.alpha_re);

class SliceInfeasibleError : public std::runtime_error {
 public:
  SliceInfeasibleError(int slice, const std::string& what)
      : std::runtime_error(what), slice_(slice) {}
  /// 0-based index of the failing slice.
  int slice() const { return slice_; }

 private:
  int slice_;
};

struct SliceInfo {
  BnbStatus status = BnbStatus::Optimal;
  long nodes = 0;
  double wall_seconds = 0.0;
  double value = 0.0;  // sub-problem objective, goal tracking included
  double gap = 0.0;    // proven relative gap of the sub-problem
};

struct SlicedResult {
  Solution solution;
  SlicePlan plan;
  std::vector<SliceInfo> slices;
};

/// Slices are solved in order. Non-final slices carry soft goal tracking
/// with weight alpha_re and constrain their last state's clearance; the
/// final slice keeps the scenario's terminal mode and terminal-collision flag.
SlicedResult solve_sliced(const Scenario& scenario, int m, const BnbConfig& config = {});

/// The unsliced problem (m = 1).
SlicedResult solve_exact(const Scenario& scenario, const BnbConfig& config = {});

struct GapReport {
  int m = 1;
  double sliced_cost = 0.0;                  // J^s
  std::optional<double> optimal_cost;        // J*
  std::vector<double> sliced_slice_costs;    // J^s_i
  std::vector<double> optimal_slice_costs;   // J*_i, empty without J*
  std::vector<double> deltas;                // delta_i = J^s_i - J*_i
  std::optional<double> delta_max;
  std::optional<double> epsilon;             // (J^s - J*) / J*, needs J* > 0
  std::optional<double> bound;               // m delta_max / J*, needs J* > 0
};

/// Per-slice costs use the stage attribution of stage_costs(); goal-tracking
/// terms of non-final slices are not part of it.
GapReport gap_analysis(const Solution& sliced, const std::optional<Solution>& optimal,
                       const Scenario& scenario, const SlicePlan& plan);

/// Optional fields are omitted when absent.
std::string to_json(const GapReport& report, int indent = 2);

}  // namespace modplan
