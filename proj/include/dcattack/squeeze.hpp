#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dcattack/attack.hpp"
#include "dcattack/defense.hpp"

namespace dcattack {

struct SqueezeConfig {
  double budget = 600.0;        // total wall-clock seconds
  double round_budget = 5.0;    // seconds per side per round
  double match_threshold = 0.01;
  uint64_t seed = 0;
  int threads = 1;
  int max_rounds = 100;
  int stall_rounds = 4;         // rounds without progress on either side before stopping
  int verify_samples = 1000;
  AttackConfig attack;          // restarts here are per round
  DefenseOptions defense;
  Tolerances tol;
};

struct TracePoint {
  double time = 0.0;
  std::string side;  // "lb" or "ub"
  double value = 0.0;
};

struct BoundsReport {
  std::string case_name;
  std::optional<double> lb;
  std::optional<double> ub;
  double gap = 1.0;
  bool matched = false;
  std::optional<double> match_time;
  std::vector<TracePoint> trace;
  std::optional<AttackSolution> attack;
  std::optional<DefensePolicy> defense;
  std::vector<RestartRecord> restarts;
  int rounds = 0;
  std::string stop_reason;
  bool match_verified = false;
  int verified_samples = 0;
  double elapsed = 0.0;
};

struct Hints {
  std::vector<Eigen::VectorXd> attack_directions;
  std::optional<Eigen::VectorXd> defense_direction;
};

// Attack starts along the defense's binding-row perturbations (or the
// fixed-dispatch direction at `nominal_p` when no defense exists) and a
// defense emphasis along the best attack.
Hints cross_feed(const FeasibilityMatrices& mats, const AttackSolution* attack_best,
                 const DefensePolicy* defense_best, const Eigen::VectorXd* nominal_p = nullptr,
                 int max_directions = 8, const Tolerances& tol = {});

BoundsReport squeeze_run(const NetworkCase& net, const FeasibilityMatrices& mats,
                         const SqueezeConfig& config);

double relative_gap(double lb, double ub);

}  // namespace dcattack
