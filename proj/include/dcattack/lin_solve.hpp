#pragma once

#include <string>

#include <Eigen/Dense>

namespace dcattack {

struct FeasibilityMatrices;

// min c'x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lower <= x <= upper.
// Empty bound vectors mean free variables.
struct LpProblem {
  Eigen::VectorXd objective;
  Eigen::MatrixXd A_ub;
  Eigen::VectorXd b_ub;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int num_vars() const { return static_cast<int>(objective.size()); }
  // Throws PreconditionError on inconsistent shapes, NaN entries or crossed bounds.
  void check() const;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };
std::string to_string(LpStatus status);

// y_ub >= 0 and y_eq combine the rows so that min over the variable box of
// (A_ub'y_ub + A_eq'y_eq)'x exceeds y_ub'b_ub + y_eq'b_eq.
struct FarkasCertificate {
  Eigen::VectorXd y_ub;
  Eigen::VectorXd y_eq;
};

struct FarkasCheck {
  bool valid = false;
  double margin = 0.0;    // box minimum of g'x minus y'b, positive proves infeasibility
  double residual = 0.0;  // largest entry of g along an unbounded box side, or negative y_ub
};

struct LpOptions {
  double primal_tol = 1e-9;
  double dual_tol = 1e-9;
  double pivot_tol = 1e-10;
  int max_iterations = 0;  // 0 picks a size-based limit
  int degenerate_before_bland = 50;
  int refactor_every = 64;
};

struct LpResult {
  LpStatus status = LpStatus::kOptimal;
  Eigen::VectorXd x;
  double objective = 0.0;
  // Lagrange multipliers: c + A_ub'y_ub + A_eq'y_eq - z = 0 with y_ub >= 0.
  Eigen::VectorXd y_ub;
  Eigen::VectorXd y_eq;
  Eigen::VectorXd z;
  double dual_objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double phase1_objective = 0.0;
  FarkasCertificate farkas;  // set when infeasible
  Eigen::VectorXd ray;       // set when unbounded: feasible direction with c'ray < 0
  int iterations = 0;
};

LpResult lp_solve(const LpProblem& prob, const LpOptions& options = {});

FarkasCheck verify_farkas(const LpProblem& prob, const FarkasCertificate& cert,
                          double tol = 1e-9);

struct ProjectionResult {
  Eigen::VectorXd delta;
  double norm_sq = 0.0;
  int constraint_index = -1;
};

// Smallest delta placing row i on its boundary with the dispatch held at p0.
// A row that does not depend on delta yields norm_sq = +inf.
ProjectionResult project_fixed(const FeasibilityMatrices& mats, const Eigen::VectorXd& p0,
                               int row, double zero_tol = 1e-12);

// Same under the affine policy p = p0 + G delta.
ProjectionResult project_policy(const FeasibilityMatrices& mats, const Eigen::VectorXd& p0,
                                const Eigen::MatrixXd& G, int row, double zero_tol = 1e-12);

// Core formula shared by both: minimize |delta|^2 s.t. margin_term + v'delta = 0.
ProjectionResult project_onto_row(double offset, const Eigen::VectorXd& direction,
                                  int row, double zero_tol = 1e-12);

}  // namespace dcattack
