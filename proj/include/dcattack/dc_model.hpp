#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dcattack/case_ingest.hpp"
#include "dcattack/lin_solve.hpp"
#include "dcattack/tolerances.hpp"

namespace dcattack {

struct PtdfSet {
  Eigen::MatrixXd E;        // n_l x n_b signed incidence, +1 at the from-bus
  Eigen::VectorXd y;        // diagonal of Y_l
  Eigen::MatrixXd phi_hat;  // n_l x (n_b - 1)
  Eigen::MatrixXd phi;      // n_l x n_b, zero column at ref_bus
  int ref_bus = 0;          // bus index
};

// Flows are positive from the from-bus towards the to-bus.
PtdfSet build_ptdf(const NetworkCase& net, int ref_bus);

enum class RowKind { kFlowUpper, kFlowLower, kSlackGenUpper, kGenUpper, kSlackGenLower, kGenLower };

struct RowLabel {
  RowKind kind;
  int element;  // branch index for flow rows, generator index otherwise
};

std::string to_string(const RowLabel& label, const NetworkCase& net);

// Reduced polytope {p : A p + B delta + c <= 0} over the non-slack generators.
struct FeasibilityMatrices {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::VectorXd c;
  std::vector<RowLabel> row_labels;
  Eigen::MatrixXd Ng;  // n_b x n_g
  Eigen::MatrixXd Nd;  // n_b x n_delta
  Eigen::MatrixXd phi;
  int slack_gen = 0;
  std::vector<int> reduced_gens;   // generator index of each column of A
  std::vector<int> load_buses;     // bus index of each entry of delta
  std::vector<int> bounded_lines;  // branch index of each flow row pair
  std::vector<bool> pinned;        // reduced generators with p_min == p_max
  Eigen::VectorXd load;            // nominal p_d over all buses

  int rows() const { return static_cast<int>(A.rows()); }
  int dim_p() const { return static_cast<int>(A.cols()); }
  int dim_delta() const { return static_cast<int>(B.cols()); }
};

// Generator with the widest operating range, lowest index on ties.
int default_slack(const NetworkCase& net);

FeasibilityMatrices build_feasibility(const NetworkCase& net, const PtdfSet& ptdf,
                                      int slack_gen);

// PTDF referenced at the slack generator's bus followed by build_feasibility.
FeasibilityMatrices build_model(const NetworkCase& net, std::optional<int> slack_gen = {});

struct DispatchResult {
  bool feasible = false;
  Eigen::VectorXd p;       // reduced dispatch
  Eigen::VectorXd p_full;  // all generators, slack recovered from balance
  double cost = 0.0;
  double max_residual = 0.0;
  FarkasCertificate certificate;  // set when infeasible
  double phase1_objective = 0.0;
};

DispatchResult solve_dcopf(const NetworkCase& net, const FeasibilityMatrices& mats,
                           const Eigen::VectorXd& delta, const Tolerances& tol = {});

// Slack output from power balance for a reduced dispatch.
Eigen::VectorXd full_dispatch(const FeasibilityMatrices& mats, const Eigen::VectorXd& p,
                              const Eigen::VectorXd& delta);

// Feasibility LP {p : A p <= -(B delta + c)} used by phase-1 checks.
LpProblem feasibility_problem(const FeasibilityMatrices& mats, const Eigen::VectorXd& delta);

}  // namespace dcattack
