#pragma once

#include "persistify/persistence.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace persistify {

/// Per-robot strictly convex program
///   min |u - u_hat|^2 + kappa delta^2
///   s.t. a.u <= b            (CBF rows, hard)
///        a.u - delta <= b    (CLF rows, relaxable)
/// The identity-plus-kappa Hessian makes the minimizer unique.
struct QpProblem {
  Eigen::VectorXd u_hat;
  double kappa = 1.0;
  std::vector<ConstraintRow> rows;
  std::optional<double> u_max;  // post-solve norm saturation of u, off by default
};

enum class QpStatus { Optimal, Infeasible, DegenerateRowDropped };

struct QpSolution {
  Eigen::VectorXd u;
  double delta = 0.0;
  std::vector<int> active_set;  // indices into QpProblem::rows
  double objective = 0.0;
  double kkt_residual = 0.0;
  QpStatus status = QpStatus::Optimal;
  bool saturated = false;
};

const char* to_string(QpStatus s);

/// Exact minimizer via a dual active-set method; optimal solutions carry a
/// KKT certificate in kkt_residual. If the hard rows are jointly infeasible
/// the solution falls back to u_hat projected onto its least-violated hard
/// halfspace and is flagged Infeasible.
QpSolution solve_robot_qp(const QpProblem& p);

/// Block-diagonal program over independent robots; equals the elementwise
/// per-robot solve.
std::vector<QpSolution> solve_joint_qp(const std::vector<QpProblem>& problems);

/// Test oracle: enumerates every active-set hypothesis (lexicographically),
/// solves each equality-constrained problem in closed form, and returns the
/// feasible candidate with the smallest objective. Intended for small
/// instances only.
QpSolution brute_force_qp(const QpProblem& p);

}  // namespace persistify
