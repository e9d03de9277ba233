#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "dcattack/dc_model.hpp"
#include "dcattack/tolerances.hpp"

namespace dcattack {

struct DefensePolicy {
  Eigen::VectorXd p0;  // reduced base dispatch
  Eigen::MatrixXd G;   // (n_g - 1) x n_delta
  double t = 0.0;      // guaranteed radius, in units of |delta|^2
  int binding_row = -1;
  int verified_samples = 0;
  bool stalled = false;
  std::string method;
};

struct TTilde {
  double t = 0.0;
  int binding_row = -1;
};

// Min over rows of the policy projection. Rows whose value cannot change with
// delta are excluded. Throws PreconditionError when A p0 + c > tol.
TTilde t_tilde(const FeasibilityMatrices& mats, const Eigen::VectorXd& p0,
               const Eigen::MatrixXd& G, const Tolerances& tol = {});

struct WarmStart {
  Eigen::VectorXd p_init;
  Eigen::MatrixXd G_init;
  double t_init = 0.0;
  double margin = 0.0;  // optimal value of the max-margin LP (<= 0)
};

// Max-margin dispatch followed by the squared-margin LP for t.
// Rows of pinned generators are enforced without taking part in the margin.
WarmStart warm_start_defense(const FeasibilityMatrices& mats, const Tolerances& tol = {});

enum class DefenseMethod { kBarrier, kSoftmin };
std::string to_string(DefenseMethod method);
DefenseMethod parse_defense_method(const std::string& text);

struct DefenseOptions {
  DefenseMethod method = DefenseMethod::kBarrier;
  // barrier path following
  double barrier_weight0 = 1.0;
  double barrier_growth = 8.0;
  double duality_gap = 1e-7;  // relative stopping gap on the radius
  int max_newton = 2000;
  // softmin ascent
  double tau0 = 0.1;
  double tau_min = 1e-6;
  int max_steps_per_stage = 3000;
  // optional attack direction to emphasise in the softmin weights
  std::optional<Eigen::VectorXd> hint_direction;
  double time_limit = 0.0;  // seconds, 0 means none
  Tolerances tol;
};

DefensePolicy defense_local(const FeasibilityMatrices& mats, const WarmStart& init,
                            const DefenseOptions& options = {});

// Samples uniformly in the ball |delta|^2 <= t (1 - 1e-6) plus the binding-row
// direction; throws InvariantViolation on the first infeasible sample.
int verify_policy(const FeasibilityMatrices& mats, const DefensePolicy& policy, int samples,
                  uint64_t seed, const Tolerances& tol = {});

enum class Rank1Kind { kUniform, kProportional };

// Generators share 1'delta equally or in proportion to their base output.
// Generators with p_min == p_max do not participate.
DefensePolicy rank1_policy(const FeasibilityMatrices& mats, Rank1Kind kind,
                           const Eigen::VectorXd& p0, const Tolerances& tol = {});

struct SimplexPolicy {
  Eigen::MatrixXd vertices;    // n_delta x (n_delta + 1)
  Eigen::MatrixXd dispatches;  // (n_g - 1) x (n_delta + 1)
  Eigen::MatrixXd G;
  Eigen::VectorXd p0;
  double condition = 0.0;      // of the vertex matrix with the appended ones row

  // Barycentric weights of a query point.
  Eigen::VectorXd weights(const Eigen::VectorXd& delta) const;
  Eigen::VectorXd map(const Eigen::VectorXd& delta) const { return p0 + G * delta; }
  // Largest ball around `center` contained in the simplex.
  double inradius(const Eigen::VectorXd& center) const;
};

SimplexPolicy simplex_policy_fit(const Eigen::MatrixXd& vertices,
                                 const Eigen::MatrixXd& dispatches);

// Coordinate simplex {s e_i, -s 1} centred at the origin, halved until every
// vertex admits a dispatch, then fitted.
SimplexPolicy heuristic_simplex(const NetworkCase& net, const FeasibilityMatrices& mats,
                                double initial_scale = 1.0, int max_halvings = 40,
                                const Tolerances& tol = {});

DefensePolicy policy_from_simplex(const FeasibilityMatrices& mats, const SimplexPolicy& simplex,
                                  const Tolerances& tol = {});

}  // namespace dcattack
