#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dcattack/dc_model.hpp"
#include "dcattack/tolerances.hpp"

namespace dcattack {

struct AttackResiduals {
  double dual_stationarity = 0.0;  // |A'mu|_inf
  double epsilon_gap = 0.0;        // mu'(B delta + c) - eps
  double min_mu = 0.0;
};

struct CertificationRecord {
  bool certified = false;
  double scale = 1.0;          // delta was multiplied by this before the check
  double stationarity = 0.0;   // |A'y|_inf of the normalized ray
  double min_y = 0.0;
  double separation = 0.0;     // y'(B delta' + c)
  double phase1_objective = 0.0;
};

struct AttackSolution {
  Eigen::VectorXd delta;
  Eigen::VectorXd mu;
  double norm_sq = 0.0;    // delta'delta
  double objective = 0.0;  // delta'W delta
  double eps_used = 0.0;
  AttackResiduals residuals;
  bool converged = false;
  bool certified = false;
  bool used_fallback = false;
  int iterations = 0;
  CertificationRecord certification;
};

struct AttackConfig {
  double eps = 1e-3;
  int restarts = 5;
  std::optional<Eigen::VectorXd> weight;  // diagonal of W
  int max_alternations = 500;
  double tolerance = 1e-10;  // relative decrease needed to accept an alternation
  uint64_t seed = 0;
  int threads = 1;
  double overshoot = 1e-6;   // relative step past the separating hyperplane
  std::vector<Eigen::VectorXd> seed_directions;  // extra deterministic starts
  bool include_heuristic = true;
  double time_limit = 0.0;  // seconds; no new restart starts after it, 0 means none
  Tolerances tol;
};

struct RestartRecord {
  std::string origin;  // "heuristic", "hint", or "random"
  int index = 0;
  bool produced = false;
  bool certified = false;
  double norm_sq = 0.0;
  int iterations = 0;
  std::string note;
};

struct MultistartResult {
  AttackSolution best;
  std::vector<RestartRecord> restarts;
  double fixed_dispatch_lb = 0.0;
};

// Largest s >= 0 keeping F(s d) nonempty; +inf when the ray never leaves.
double ray_exit_scale(const FeasibilityMatrices& mats, const Eigen::VectorXd& direction,
                      const Tolerances& tol = {});

// Certificate LP of the alternation; empty when F(delta) is nonempty.
std::optional<Eigen::VectorXd> certificate_step(const FeasibilityMatrices& mats,
                                                const Eigen::VectorXd& delta, double eps,
                                                double lp_tol, bool* failed = nullptr);

// Local alternation from an infeasible starting perturbation. Throws
// SolverError("restart") when no certificate exists at the start.
AttackSolution attack_local(const FeasibilityMatrices& mats, const AttackConfig& cfg,
                            const Eigen::VectorXd& delta0);

// Starts by ray shooting along `direction`.
AttackSolution attack_from_direction(const FeasibilityMatrices& mats, const AttackConfig& cfg,
                                     const Eigen::VectorXd& direction);

MultistartResult multistart_attack(const FeasibilityMatrices& mats, const AttackConfig& cfg);

struct InfeasibilityVerdict {
  bool certified = false;
  FarkasCertificate ray;       // when certified
  Eigen::VectorXd witness;     // feasible p when refuted
  CertificationRecord record;
};

InfeasibilityVerdict certify_infeasible(const FeasibilityMatrices& mats,
                                        const Eigen::VectorXd& delta,
                                        const Tolerances& tol = {});

// min over rows of the fixed-dispatch projection, with the minimizing row.
struct FixedDispatchBound {
  double norm_sq = 0.0;
  int row = -1;
  Eigen::VectorXd delta;
};
FixedDispatchBound fixed_dispatch_bound(const FeasibilityMatrices& mats,
                                        const Eigen::VectorXd& p0, const Tolerances& tol = {});
double fixed_dispatch_lb(const FeasibilityMatrices& mats, const Eigen::VectorXd& p0,
                         const Tolerances& tol = {});

// Per-restart seed derived from the base seed and restart index.
uint64_t restart_seed(uint64_t seed, int index);

}  // namespace dcattack
