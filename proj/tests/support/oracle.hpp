#pragma once

// Test-side reference solvers and scenario builders. Nothing here calls the
// library's QP or branch-and-bound code.

#include "modplan/model.hpp"
#include "modplan/qp.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace oracle {

struct DenseQp {
  Eigen::MatrixXd H;
  Eigen::VectorXd f;
  double c0 = 0.0;
  Eigen::MatrixXd A;  // A z <= b
  Eigen::VectorXd b;
  Eigen::MatrixXd Aeq;
  Eigen::VectorXd beq;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static DenseQp from(const modplan::QpProblem& qp);
  double objective(const Eigen::VectorXd& z) const { return 0.5 * z.dot(H * z) + f.dot(z) + c0; }
  double max_violation(const Eigen::VectorXd& z) const;
};

struct Result {
  bool feasible = false;
  Eigen::VectorXd z;
  double value = 0.0;
};

// Exhaustive active-set enumeration; exact for strictly convex problems with
// a handful of inequality rows and finite bounds.
Result active_set(const DenseQp& qp);

// Dense ADMM followed by an active-set polish step. Feasibility is decided by
// the polished point; adequate for the small MIQP leaves used in tests.
Result admm(const DenseQp& qp, int max_iterations = 200000);

// The QP with the listed binaries fixed; others keep their bounds.
DenseQp with_fixed(DenseQp qp, const std::vector<std::pair<int, double>>& fixed);

// Squared-step path cost of the obstacle-free problem without bounds,
// from a dense KKT solve over an independent variable layout.
struct FreePath {
  std::vector<Eigen::VectorXd> states;
  double robot_cost = 0.0;  // J^r
  double total = 0.0;       // alpha_r J^r
};
FreePath free_path(const modplan::Scenario& scenario);

// Small first-order scenario with obstacles near the straight start-goal line.
modplan::Scenario random_scenario(std::uint64_t seed, int horizon, int obstacles,
                                  modplan::RobotModel model = modplan::RobotModel::FirstOrder);

// Two corridors of equal length around an immovable wall; A and B block the
// upper corridor and need 2 units each, C blocks the lower one and needs 3.
modplan::Scenario two_corridor_scenario();

}  // namespace oracle
