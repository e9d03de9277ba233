#include "dcattack/squeeze.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "dcattack/errors.hpp"

namespace dcattack {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kOrderSlack = 1e-6;

}  // namespace

double relative_gap(double lb, double ub) { return (ub - lb) / std::max(std::abs(ub), 1e-12); }

Hints cross_feed(const FeasibilityMatrices& mats, const AttackSolution* attack_best,
                 const DefensePolicy* defense_best, const Eigen::VectorXd* nominal_p,
                 int max_directions, const Tolerances& tol) {
  Hints hints;
  if (attack_best && attack_best->delta.norm() > 0.0) {
    hints.defense_direction = attack_best->delta.normalized();
  }
  if (defense_best && std::isfinite(defense_best->t)) {
    // Rows whose policy radius is within 1% of the binding one, tightest first.
    const Eigen::VectorXd base = mats.A * defense_best->p0 + mats.c;
    const Eigen::MatrixXd V = mats.A * defense_best->G + mats.B;
    std::vector<std::pair<double, int>> rows;
    for (int i = 0; i < mats.rows(); ++i) {
      const double v2 = V.row(i).squaredNorm();
      if (std::sqrt(v2) <= tol.projection) continue;
      const double s = std::min(base(i), 0.0);
      rows.emplace_back(s * s / v2, i);
    }
    std::stable_sort(rows.begin(), rows.end());
    for (const auto& [t, i] : rows) {
      if (static_cast<int>(hints.attack_directions.size()) >= max_directions) break;
      if (t > defense_best->t * 1.01 + 1e-12) break;
      // Pushing row i outward: the projection direction, which is +v_i.
      hints.attack_directions.push_back(V.row(i).transpose().normalized());
    }
  } else if (nominal_p) {
    FixedDispatchBound fb = fixed_dispatch_bound(mats, *nominal_p, tol);
    if (fb.row >= 0) hints.attack_directions.push_back(mats.B.row(fb.row).transpose().normalized());
  }
  return hints;
}

BoundsReport squeeze_run(const NetworkCase& net, const FeasibilityMatrices& mats,
                         const SqueezeConfig& config) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto elapsed = [&]() { return std::chrono::duration<double>(Clock::now() - start).count(); };

  BoundsReport report;
  report.case_name = net.name;

  DispatchResult nominal = solve_dcopf(net, mats, Eigen::VectorXd::Zero(mats.dim_delta()), config.tol);
  if (!nominal.feasible) throw ModelError("nominal DC-OPF is infeasible");

  auto check_order = [&]() {
    if (report.lb && report.ub && *report.lb > *report.ub + kOrderSlack) {
      throw InvariantViolation("lower bound " + std::to_string(*report.lb) +
                               " exceeds certified upper bound " + std::to_string(*report.ub));
    }
  };
  auto record = [&](const std::string& side, double value) {
    report.trace.push_back({elapsed(), side, value});
    check_order();
  };

  WarmStart ws = warm_start_defense(mats, config.tol);
  DefensePolicy policy;
  policy.p0 = ws.p_init;
  policy.G = ws.G_init;
  {
    TTilde tt = t_tilde(mats, ws.p_init, ws.G_init, config.tol);
    policy.t = tt.t;
    policy.binding_row = tt.binding_row;
    policy.method = "warm-start";
  }
  if (std::isfinite(policy.t)) {
    report.lb = policy.t;
    report.defense = policy;
    record("lb", policy.t);
  }

  WarmStart current{policy.p0, policy.G, policy.t, ws.margin};
  bool defense_done = !std::isfinite(policy.t);
  bool defense_changed = true;
  int idle_rounds = 0;
  report.stop_reason = "round limit";
  for (int round = 0; round < config.max_rounds; ++round) {
    report.rounds = round + 1;
    bool progress = false;

    if (!defense_done) {
      DefenseOptions dopt = config.defense;
      dopt.tol = config.tol;
      dopt.time_limit = config.round_budget;
      Hints hints = cross_feed(mats, report.attack ? &*report.attack : nullptr, nullptr, nullptr, 0,
                               config.tol);
      dopt.hint_direction = hints.defense_direction;
      DefensePolicy next = defense_local(mats, current, dopt);
      if (!next.stalled && next.t > policy.t) {
        policy = next;
        current = WarmStart{policy.p0, policy.G, policy.t, ws.margin};
        report.lb = policy.t;
        report.defense = policy;
        record("lb", policy.t);
        progress = true;
        defense_changed = true;
      } else {
        defense_done = config.defense.method == DefenseMethod::kBarrier;
      }
    }

    AttackConfig acfg = config.attack;
    acfg.tol = config.tol;
    acfg.threads = config.threads;
    acfg.seed = restart_seed(config.seed, round);
    acfg.time_limit = config.round_budget;
    acfg.include_heuristic = round == 0;
    if (defense_changed) {
      Hints hints = cross_feed(mats, nullptr, report.defense ? &*report.defense : nullptr,
                               &nominal.p, 8, config.tol);
      acfg.seed_directions = hints.attack_directions;
      defense_changed = false;
    }
    try {
      MultistartResult res = multistart_attack(mats, acfg);
      report.restarts.insert(report.restarts.end(), res.restarts.begin(), res.restarts.end());
      if (!report.ub || res.best.objective < report.attack->objective) {
        report.attack = res.best;
        report.ub = res.best.norm_sq;
        record("ub", res.best.norm_sq);
        progress = true;
      }
    } catch (const SolverError& e) {
      RestartRecord rec;
      rec.origin = "round";
      rec.index = round;
      rec.note = e.what();
      report.restarts.push_back(rec);
    }

    if (report.lb && report.ub) {
      report.gap = relative_gap(*report.lb, *report.ub);
      if (report.gap < config.match_threshold) {
        report.matched = true;
        report.match_time = elapsed();
        report.stop_reason = "matched";
        break;
      }
    }
    idle_rounds = progress ? 0 : idle_rounds + 1;
    if (idle_rounds >= config.stall_rounds) {
      report.stop_reason = "stalled";
      break;
    }
    if (elapsed() >= config.budget) {
      report.stop_reason = "budget";
      break;
    }
  }
  if (report.lb && report.ub) report.gap = relative_gap(*report.lb, *report.ub);

  if (report.defense && std::isfinite(report.defense->t) && config.verify_samples > 0) {
    report.verified_samples =
        verify_policy(mats, *report.defense, config.verify_samples, restart_seed(config.seed, -1),
                      config.tol);
    report.defense->verified_samples = report.verified_samples;
  }
  if (report.matched) {
    InfeasibilityVerdict v = certify_infeasible(mats, (1.0 + 1e-4) * report.attack->delta, config.tol);
    report.match_verified = v.certified && report.verified_samples == config.verify_samples;
  }
  report.elapsed = elapsed();
  return report;
}

}  // namespace dcattack
