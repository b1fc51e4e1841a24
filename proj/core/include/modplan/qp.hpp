#pragma once

/// Convex quadratic programming:
///
///   min  1/2 z'Hz + f'z + c0
///   s.t. A z <= b,  Aeq z = beq,  lower <= z <= upper
///
/// solved by a Mehrotra predictor-corrector interior point method on the
/// presolved problem. Infeasibility is certified by a phase-1 LP that
/// minimises the uniform constraint relaxation t; t* is reported as the
/// infeasibility measure.

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <map>
#include <span>
#include <stdexcept>
#include <string>

namespace modplan {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct QpProblem {
  SparseMatrix H;  // symmetric, both triangles stored
  Eigen::VectorXd f;
  double c0 = 0.0;
  SparseMatrix A;
  Eigen::VectorXd b;
  SparseMatrix Aeq;
  Eigen::VectorXd beq;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int num_variables() const { return static_cast<int>(f.size()); }
  double objective(const Eigen::VectorXd& z) const;
};

/// Builds an n-variable problem with empty constraint blocks and free bounds.
QpProblem make_qp(int n);

enum class QpStatus { Optimal, Infeasible, Unbounded, MaxIterations };
std::string to_string(QpStatus status);

struct QpSettings {
  double primal_tol = 1e-8;
  double dual_tol = 1e-8;
  int max_iterations = 20000;
  // Phase-1 relaxation above which the problem is declared infeasible.
  double infeasibility_threshold = 1e-6;
  // Iterations without primal progress before the phase-1 check runs.
  int stall_window = 20;
};

struct QpSolution {
  Eigen::VectorXd z;
  double objective = 0.0;
  QpStatus status = QpStatus::MaxIterations;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double infeasibility = 0.0;
  // Multipliers on the original rows and bounds, all >= 0 except eq_duals.
  Eigen::VectorXd eq_duals;
  Eigen::VectorXd ineq_duals;
  Eigen::VectorXd lower_duals;
  Eigen::VectorXd upper_duals;
};

class QpError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Checks dimensions, symmetry and positive semidefiniteness of H.
void validate(const QpProblem& problem);

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;
  double dual_sign = 0.0;  // most negative inequality/bound multiplier, as a positive number
};

/// Direct evaluation of the KKT conditions at (z, duals) of `solution`.
KktResiduals kkt_residuals(const QpProblem& problem, const QpSolution& solution);

using Fixings = std::map<int, int>;

/// Holds the factorisation workspace; one instance per thread.
class QpSolver {
 public:
  explicit QpSolver(QpSettings settings = {});

  QpSolution solve(const QpProblem& problem);
  QpSolution solve_with_fixings(const QpProblem& problem, const Fixings& fixings,
                                std::span<const int> relaxed_box);
  /// No validation; bounds replace problem.lower / problem.upper.
  QpSolution solve_unchecked(const QpProblem& problem, const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper);

  const QpSettings& settings() const { return settings_; }

 private:
  QpSettings settings_;
};

QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings = {});
QpSolution solve_qp_with_fixings(const QpProblem& problem, const Fixings& fixings,
                                 std::span<const int> relaxed_box,
                                 const QpSettings& settings = {});

/// Applies fixings (lower = upper = value) and [0,1] relaxations to the
/// problem's bounds. Throws QpError on out-of-range or conflicting entries.
void apply_fixings(const QpProblem& problem, const Fixings& fixings,
                   std::span<const int> relaxed_box, Eigen::VectorXd& lower,
                   Eigen::VectorXd& upper);

}  // namespace modplan
