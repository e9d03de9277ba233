#include "dcattack/attack.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "dcattack/errors.hpp"
#include "parallel.hpp"

namespace dcattack {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd weight_of(const AttackConfig& cfg, int n) {
  if (!cfg.weight) return Eigen::VectorXd::Ones(n);
  if (cfg.weight->size() != n) throw PreconditionError("weight has the wrong dimension");
  if ((cfg.weight->array() <= 0.0).any()) throw PreconditionError("weights must be positive");
  return *cfg.weight;
}

void check_config(const AttackConfig& cfg) {
  if (!(cfg.eps > 0.0)) throw PreconditionError("eps must be positive");
  if (cfg.restarts < 1) throw PreconditionError("restarts must be at least 1");
  if (!(cfg.overshoot > 0.0)) throw PreconditionError("overshoot must be positive");
}

std::string violated_rows(const FeasibilityMatrices& mats, const Eigen::VectorXd& residual,
                          double tol) {
  std::ostringstream out;
  int shown = 0;
  for (int i = 0; i < residual.size(); ++i) {
    if (residual(i) > tol) {
      if (shown++ < 8) out << (shown > 1 ? ", " : "") << "row " << i << " (+" << residual(i) << ")";
    }
  }
  (void)mats;
  if (shown > 8) out << ", ...";
  return out.str();
}

// Solves the certificate LP, retrying at the relaxed tolerance when the
// strict solve breaks down or loses a certificate that should exist.
std::optional<Eigen::VectorXd> certificate_with_fallback(const FeasibilityMatrices& mats,
                                                         const Eigen::VectorXd& delta,
                                                         const AttackConfig& cfg,
                                                         bool* used_fallback) {
  bool failed = false;
  auto mu = certificate_step(mats, delta, cfg.eps, cfg.tol.certificate, &failed);
  if (mu) return mu;
  bool relaxed_failed = false;
  auto relaxed = certificate_step(mats, delta, cfg.eps, cfg.tol.fallback, &relaxed_failed);
  if (relaxed && used_fallback) *used_fallback = true;
  return relaxed;
}

}  // namespace

uint64_t restart_seed(uint64_t seed, int index) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<uint64_t>(index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double ray_exit_scale(const FeasibilityMatrices& mats, const Eigen::VectorXd& direction,
                      const Tolerances& tol) {
  const int k = mats.dim_p();
  LpProblem prob;
  prob.objective = Eigen::VectorXd::Zero(k + 1);
  prob.objective(k) = -1.0;
  prob.A_ub.resize(mats.rows(), k + 1);
  prob.A_ub.leftCols(k) = mats.A;
  prob.A_ub.col(k) = mats.B * direction;
  prob.b_ub = -mats.c;
  prob.lower = Eigen::VectorXd::Constant(k + 1, -kInf);
  prob.upper = Eigen::VectorXd::Constant(k + 1, kInf);
  prob.lower(k) = 0.0;
  LpOptions options;
  options.primal_tol = tol.certificate;
  LpResult lp = lp_solve(prob, options);
  if (lp.status == LpStatus::kInfeasible) {
    throw ModelError("nominal operating point is infeasible; no attack is defined");
  }
  if (lp.status == LpStatus::kUnbounded) return kInf;
  return lp.x(k);
}

std::optional<Eigen::VectorXd> certificate_step(const FeasibilityMatrices& mats,
                                                const Eigen::VectorXd& delta, double eps,
                                                double lp_tol, bool* failed) {
  const int m = mats.rows();
  const int k = mats.dim_p();
  LpProblem prob;
  prob.objective = Eigen::VectorXd::Ones(m);
  prob.A_eq.resize(k + 1, m);
  prob.A_eq.topRows(k) = mats.A.transpose();
  prob.A_eq.row(k) = (mats.B * delta + mats.c).transpose();
  prob.b_eq = Eigen::VectorXd::Zero(k + 1);
  prob.b_eq(k) = eps;
  prob.lower = Eigen::VectorXd::Zero(m);
  prob.upper = Eigen::VectorXd::Constant(m, kInf);
  LpOptions options;
  options.primal_tol = lp_tol;
  options.dual_tol = std::max(lp_tol, 1e-9);
  LpResult lp;
  try {
    lp = lp_solve(prob, options);
  } catch (const SolverError&) {
    if (failed) *failed = true;
    return std::nullopt;
  }
  if (lp.status != LpStatus::kOptimal) return std::nullopt;
  return lp.x.cwiseMax(0.0);
}

AttackSolution attack_local(const FeasibilityMatrices& mats, const AttackConfig& cfg,
                            const Eigen::VectorXd& delta0) {
  check_config(cfg);
  const int nd = mats.dim_delta();
  if (delta0.size() != nd) throw PreconditionError("initial perturbation has the wrong size");
  const Eigen::VectorXd w = weight_of(cfg, nd);
  const Eigen::VectorXd w_inv = w.cwiseInverse();
  auto weighted = [&](const Eigen::VectorXd& d) { return d.dot(w.cwiseProduct(d)); };

  AttackSolution sol;
  sol.eps_used = cfg.eps;
  auto mu = certificate_with_fallback(mats, delta0, cfg, &sol.used_fallback);
  if (!mu) throw SolverError("restart: no infeasibility certificate at the initial perturbation");

  Eigen::VectorXd delta = delta0;
  Eigen::VectorXd cert = *mu;
  double best = weighted(delta);
  sol.converged = false;
  int it = 0;
  for (; it < cfg.max_alternations; ++it) {
    const double scale = -cert.dot(mats.c);
    if (!(scale > 0.0)) break;
    const Eigen::VectorXd nu = cert / scale;
    const Eigen::VectorXd normal = mats.B.transpose() * nu;
    const double denom = normal.dot(w_inv.cwiseProduct(normal));
    if (!(denom > 0.0)) break;
    const Eigen::VectorXd foot = ((1.0 + cfg.overshoot) / denom) * w_inv.cwiseProduct(normal);
    const double value = weighted(foot);
    if (!(value < best * (1.0 - cfg.tolerance))) {
      sol.converged = true;
      break;
    }
    delta = foot;
    best = value;
    cert = nu;  // certifies the new iterate with margin equal to the overshoot
    auto next = certificate_with_fallback(mats, delta, cfg, &sol.used_fallback);
    if (!next) {
      sol.converged = true;
      break;
    }
    cert = *next;
  }
  sol.iterations = it;

  const Eigen::VectorXd gap = mats.B * delta + mats.c;
  const double separation = cert.dot(gap);
  if (!(separation > 0.0)) throw SolverError("restart: certificate lost separation");
  sol.delta = delta;
  sol.mu = cert * (cfg.eps / separation);
  sol.norm_sq = delta.squaredNorm();
  sol.objective = weighted(delta);
  sol.residuals.dual_stationarity = (mats.A.transpose() * sol.mu).cwiseAbs().maxCoeff();
  sol.residuals.epsilon_gap = sol.mu.dot(gap) - cfg.eps;
  sol.residuals.min_mu = sol.mu.minCoeff();

  InfeasibilityVerdict verdict = certify_infeasible(mats, (1.0 + 1e-4) * delta, cfg.tol);
  sol.certification = verdict.record;
  sol.certified = verdict.certified && sol.residuals.dual_stationarity <= 1e-7 &&
                  sol.residuals.min_mu >= -1e-10 &&
                  sol.residuals.epsilon_gap >= -cfg.tol.certificate;
  return sol;
}

AttackSolution attack_from_direction(const FeasibilityMatrices& mats, const AttackConfig& cfg,
                                     const Eigen::VectorXd& direction) {
  const double len = direction.norm();
  if (!(len > 0.0)) throw SolverError("restart: zero start direction");
  const Eigen::VectorXd d = direction / len;
  const double s = ray_exit_scale(mats, d, cfg.tol);
  if (!std::isfinite(s)) throw SolverError("restart: start direction never leaves the feasible set");
  SolverError last("restart: no certificate near the exit point");
  for (double push : {1e-6, 1e-4, 1e-2}) {
    try {
      return attack_local(mats, cfg, (s * (1.0 + push) + 1e-12) * d);
    } catch (const SolverError& e) {
      last = e;
    }
  }
  throw last;
}

InfeasibilityVerdict certify_infeasible(const FeasibilityMatrices& mats,
                                        const Eigen::VectorXd& delta, const Tolerances& tol) {
  if (delta.size() != mats.dim_delta()) throw PreconditionError("perturbation has the wrong size");
  LpProblem prob = feasibility_problem(mats, delta);
  LpOptions options;
  options.primal_tol = tol.certificate;
  LpResult lp = lp_solve(prob, options);
  InfeasibilityVerdict verdict;
  verdict.record.phase1_objective = lp.phase1_objective;
  if (lp.status != LpStatus::kInfeasible) {
    verdict.witness = lp.x;
    return verdict;
  }
  const Eigen::VectorXd& y = lp.farkas.y_ub;
  verdict.ray = lp.farkas;
  verdict.record.stationarity = (mats.A.transpose() * y).cwiseAbs().maxCoeff();
  verdict.record.min_y = y.minCoeff();
  verdict.record.separation = y.dot(mats.B * delta + mats.c);
  FarkasCheck check = verify_farkas(prob, lp.farkas, tol.certificate);
  verdict.certified = check.valid && verdict.record.stationarity <= tol.certificate &&
                      verdict.record.min_y >= 0.0 && verdict.record.separation > 0.0;
  verdict.record.certified = verdict.certified;
  return verdict;
}

FixedDispatchBound fixed_dispatch_bound(const FeasibilityMatrices& mats,
                                        const Eigen::VectorXd& p0, const Tolerances& tol) {
  if (p0.size() != mats.dim_p()) throw PreconditionError("dispatch has the wrong size");
  const Eigen::VectorXd residual = mats.A * p0 + mats.c;
  if (residual.maxCoeff() > tol.feasibility) {
    throw PreconditionError("dispatch violates the polytope: " +
                            violated_rows(mats, residual, tol.feasibility));
  }
  FixedDispatchBound out;
  out.norm_sq = kInf;
  for (int i = 0; i < mats.rows(); ++i) {
    ProjectionResult pr = project_fixed(mats, p0, i, tol.projection);
    if (pr.norm_sq < out.norm_sq) {
      out.norm_sq = pr.norm_sq;
      out.row = i;
      out.delta = pr.delta;
    }
  }
  return out;
}

double fixed_dispatch_lb(const FeasibilityMatrices& mats, const Eigen::VectorXd& p0,
                         const Tolerances& tol) {
  return fixed_dispatch_bound(mats, p0, tol).norm_sq;
}

MultistartResult multistart_attack(const FeasibilityMatrices& mats, const AttackConfig& cfg) {
  check_config(cfg);
  const int nd = mats.dim_delta();
  MultistartResult result;

  LpResult nominal = lp_solve(feasibility_problem(mats, Eigen::VectorXd::Zero(nd)));
  if (nominal.status != LpStatus::kOptimal) {
    throw ModelError("nominal operating point is infeasible; no attack is defined");
  }
  FixedDispatchBound lb = fixed_dispatch_bound(mats, nominal.x, cfg.tol);
  result.fixed_dispatch_lb = lb.norm_sq;
  // The sphere point only fixes a direction; ray shooting sets the scale.
  const double radius =
      std::isfinite(lb.norm_sq) && lb.norm_sq > 0.0 ? std::sqrt(lb.norm_sq) : 1.0;

  struct Job {
    std::string origin;
    int index;
    Eigen::VectorXd direction;
  };
  std::vector<Job> jobs;
  if (cfg.include_heuristic && lb.row >= 0) {
    jobs.push_back({"heuristic", 0, mats.B.row(lb.row).transpose()});
  }
  for (size_t h = 0; h < cfg.seed_directions.size(); ++h) {
    jobs.push_back({"hint", static_cast<int>(h), cfg.seed_directions[h]});
  }
  for (int r = 0; r < cfg.restarts; ++r) {
    std::mt19937_64 rng(restart_seed(cfg.seed, r));
    std::normal_distribution<double> normal;
    Eigen::VectorXd d(nd);
    for (int i = 0; i < nd; ++i) d(i) = normal(rng);
    d *= radius / d.norm();
    jobs.push_back({"random", r, d});
  }

  const int count = static_cast<int>(jobs.size());
  std::vector<std::optional<AttackSolution>> solutions(count);
  result.restarts.resize(count);
  const auto start = std::chrono::steady_clock::now();
  std::atomic<bool> out_of_time{false};
  detail::parallel_for(count, cfg.threads, [&](int j) {
    RestartRecord& rec = result.restarts[j];
    rec.origin = jobs[j].origin;
    rec.index = jobs[j].index;
    if (cfg.time_limit > 0.0 && j > 0) {
      const double used =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (out_of_time || used > cfg.time_limit) {
        out_of_time = true;
        rec.note = "skipped: round time limit";
        return;
      }
    }
    try {
      AttackSolution sol = attack_from_direction(mats, cfg, jobs[j].direction);
      rec.produced = true;
      rec.certified = sol.certified;
      rec.norm_sq = sol.norm_sq;
      rec.iterations = sol.iterations;
      if (!sol.converged) rec.note = "alternation cap reached";
      if (sol.used_fallback) rec.note += rec.note.empty() ? "fallback tolerance" : "; fallback tolerance";
      solutions[j] = std::move(sol);
    } catch (const Error& e) {
      rec.note = e.what();
    }
  });

  int best = -1;
  for (int j = 0; j < count; ++j) {
    if (!solutions[j] || !solutions[j]->certified) continue;
    if (best < 0 || solutions[j]->objective < solutions[best]->objective) best = j;
  }
  if (best < 0) {
    std::ostringstream msg;
    msg << "no restart produced a certified attack:";
    for (const auto& rec : result.restarts) {
      msg << " [" << rec.origin << " " << rec.index << ": "
          << (rec.produced ? "uncertified norm_sq=" + std::to_string(rec.norm_sq) : rec.note) << "]";
    }
    throw SolverError(msg.str());
  }
  result.best = *solutions[best];
  return result;
}

}  // namespace dcattack
