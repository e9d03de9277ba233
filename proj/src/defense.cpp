#include "dcattack/defense.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "dcattack/errors.hpp"
#include "dcattack/lin_solve.hpp"

namespace dcattack {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_vector(const Eigen::VectorXd& v) {
  std::ostringstream out;
  out.precision(17);
  out << "[";
  for (int i = 0; i < v.size(); ++i) out << (i ? ", " : "") << v(i);
  out << "]";
  return out.str();
}

bool is_pinned_row(const FeasibilityMatrices& mats, int row) {
  const RowLabel& label = mats.row_labels[row];
  if (label.kind != RowKind::kGenUpper && label.kind != RowKind::kGenLower) return false;
  for (int j = 0; j < mats.dim_p(); ++j) {
    if (mats.reduced_gens[j] == label.element) return mats.pinned[j];
  }
  return false;
}

// Participation of every generator (reduced order, then slack last) in a
// distributed-slack policy.
Eigen::VectorXd participation(const FeasibilityMatrices& mats) {
  const int k = mats.dim_p();
  Eigen::VectorXd range(k + 1);
  int slack_upper = -1, slack_lower = -1;
  for (int i = 0; i < mats.rows(); ++i) {
    const RowLabel& label = mats.row_labels[i];
    if (label.kind == RowKind::kSlackGenUpper) slack_upper = i;
    if (label.kind == RowKind::kSlackGenLower) slack_lower = i;
  }
  for (int j = 0; j < k; ++j) range(j) = mats.pinned[j] ? 0.0 : 1.0;
  range(k) = -(mats.c(slack_upper) + mats.c(slack_lower)) > 1e-12 ? 1.0 : 0.0;
  return range;
}

}  // namespace

TTilde t_tilde(const FeasibilityMatrices& mats, const Eigen::VectorXd& p0,
               const Eigen::MatrixXd& G, const Tolerances& tol) {
  if (p0.size() != mats.dim_p() || G.rows() != mats.dim_p() || G.cols() != mats.dim_delta()) {
    throw PreconditionError("policy dimensions do not match the feasibility matrices");
  }
  const Eigen::VectorXd residual = mats.A * p0 + mats.c;
  if (residual.maxCoeff() > tol.feasibility) {
    std::ostringstream msg;
    msg << "base dispatch violates rows:";
    int shown = 0;
    for (int i = 0; i < residual.size(); ++i) {
      if (residual(i) > tol.feasibility && shown++ < 8) msg << " " << i << " (+" << residual(i) << ")";
    }
    throw PreconditionError(msg.str());
  }
  const Eigen::MatrixXd V = mats.A * G + mats.B;
  TTilde out;
  out.t = kInf;
  for (int i = 0; i < mats.rows(); ++i) {
    const double v2 = V.row(i).squaredNorm();
    if (std::sqrt(v2) <= tol.projection) continue;
    const double s = std::min(residual(i), 0.0);
    const double t = s * s / v2;
    if (t < out.t) {
      out.t = t;
      out.binding_row = i;
    }
  }
  return out;
}

WarmStart warm_start_defense(const FeasibilityMatrices& mats, const Tolerances& tol) {
  const int k = mats.dim_p();
  const int m = mats.rows();
  LpProblem prob;
  prob.objective = Eigen::VectorXd::Zero(k + 1);
  prob.objective(k) = 1.0;
  prob.A_ub.resize(m, k + 1);
  prob.A_ub.leftCols(k) = mats.A;
  for (int i = 0; i < m; ++i) prob.A_ub(i, k) = is_pinned_row(mats, i) ? 0.0 : -1.0;
  prob.b_ub = -mats.c;
  LpOptions options;
  options.primal_tol = tol.certificate;
  LpResult lp = lp_solve(prob, options);
  if (lp.status != LpStatus::kOptimal) {
    throw ModelError("max-margin LP is " + to_string(lp.status) +
                     "; the nominal case has no feasible dispatch");
  }
  WarmStart ws;
  ws.p_init = lp.x.head(k);
  ws.margin = lp.x(k);
  ws.G_init = Eigen::MatrixXd::Zero(k, mats.dim_delta());
  if (ws.margin > tol.feasibility) {
    throw ModelError("nominal case is infeasible (max-margin value " + std::to_string(ws.margin) + ")");
  }
  const Eigen::VectorXd residual = mats.A * ws.p_init + mats.c;
  if (residual.maxCoeff() > tol.feasibility) {
    throw SolverError("max-margin dispatch violates the polytope by " +
                      std::to_string(residual.maxCoeff()));
  }

  // max t  s.t.  (b_i'b_i) t <= s_i^2, with the squared margins as constants.
  LpProblem tprob;
  tprob.objective = Eigen::VectorXd::Constant(1, -1.0);
  std::vector<int> rows;
  for (int i = 0; i < m; ++i) {
    if (mats.B.row(i).norm() > tol.projection) rows.push_back(i);
  }
  tprob.A_ub.resize(static_cast<int>(rows.size()), 1);
  tprob.b_ub.resize(static_cast<int>(rows.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    const double s = std::min(residual(rows[r]), 0.0);
    tprob.A_ub(r, 0) = mats.B.row(rows[r]).squaredNorm();
    tprob.b_ub(r) = s * s;
  }
  tprob.lower = Eigen::VectorXd::Zero(1);
  tprob.upper = Eigen::VectorXd::Constant(1, kInf);
  LpResult tl = lp_solve(tprob, options);
  ws.t_init = tl.status == LpStatus::kUnbounded ? kInf : tl.x(0);
  return ws;
}

std::string to_string(DefenseMethod method) {
  return method == DefenseMethod::kBarrier ? "barrier" : "softmin";
}

DefenseMethod parse_defense_method(const std::string& text) {
  if (text == "barrier") return DefenseMethod::kBarrier;
  if (text == "softmin") return DefenseMethod::kSoftmin;
  throw ValidationError("defense method must be 'barrier' or 'softmin', got '" + text + "'");
}

int verify_policy(const FeasibilityMatrices& mats, const DefensePolicy& policy, int samples,
                  uint64_t seed, const Tolerances& tol) {
  if (!std::isfinite(policy.t) || policy.t < 0.0) {
    throw PreconditionError("policy radius must be finite and nonnegative");
  }
  const int nd = mats.dim_delta();
  const double radius = std::sqrt(policy.t * (1.0 - 1e-6));
  const Eigen::VectorXd base = mats.A * policy.p0 + mats.c;
  const Eigen::MatrixXd V = mats.A * policy.G + mats.B;
  auto check = [&](const Eigen::VectorXd& delta, const char* what) {
    const double worst = (base + V * delta).maxCoeff();
    if (worst > tol.feasibility) {
      throw InvariantViolation(std::string("policy infeasible at ") + what + " perturbation " +
                               format_vector(delta) + " (violation " + std::to_string(worst) + ")");
    }
  };
  if (policy.binding_row >= 0) {
    ProjectionResult pr = project_policy(mats, policy.p0, policy.G, policy.binding_row, tol.projection);
    const double len = pr.delta.norm();
    if (len > 0.0) check(pr.delta * (radius / len), "binding-row");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Eigen::VectorXd delta(nd);
  for (int s = 0; s < samples; ++s) {
    for (int i = 0; i < nd; ++i) delta(i) = normal(rng);
    const double len = delta.norm();
    const double scale = len > 0.0 ? radius * std::pow(uniform(rng), 1.0 / nd) / len : 0.0;
    delta *= scale;
    check(delta, "sampled");
  }
  return samples;
}

DefensePolicy rank1_policy(const FeasibilityMatrices& mats, Rank1Kind kind,
                           const Eigen::VectorXd& p0, const Tolerances& tol) {
  const int k = mats.dim_p();
  const int nd = mats.dim_delta();
  if (p0.size() != k) throw PreconditionError("dispatch has the wrong size");
  const Eigen::VectorXd participates = participation(mats);
  const Eigen::VectorXd full = full_dispatch(mats, p0, Eigen::VectorXd::Zero(nd));
  Eigen::VectorXd share(k + 1);
  if (kind == Rank1Kind::kUniform) {
    const double count = participates.sum();
    if (count <= 0.0) throw PreconditionError("no generator can follow the perturbation");
    share = participates / count;
  } else {
    Eigen::VectorXd output(k + 1);
    for (int j = 0; j < k; ++j) output(j) = participates(j) * full(mats.reduced_gens[j]);
    output(k) = participates(k) * full(mats.slack_gen);
    const double total = output.sum();
    if (!(std::abs(total) > 1e-12)) {
      throw PreconditionError("proportional policy is degenerate: participating output sums to zero");
    }
    share = output / total;
  }
  DefensePolicy policy;
  policy.p0 = p0;
  policy.G = share.head(k) * Eigen::RowVectorXd::Ones(nd);
  TTilde tt = t_tilde(mats, p0, policy.G, tol);
  policy.t = tt.t;
  policy.binding_row = tt.binding_row;
  policy.method = kind == Rank1Kind::kUniform ? "rank1-uniform" : "rank1-proportional";
  return policy;
}

Eigen::VectorXd SimplexPolicy::weights(const Eigen::VectorXd& delta) const {
  const int n = static_cast<int>(vertices.rows());
  Eigen::MatrixXd D_hat(n + 1, n + 1);
  D_hat.topRows(n) = vertices;
  D_hat.row(n).setOnes();
  Eigen::VectorXd rhs(n + 1);
  rhs.head(n) = delta;
  rhs(n) = 1.0;
  return D_hat.fullPivLu().solve(rhs);
}

double SimplexPolicy::inradius(const Eigen::VectorXd& center) const {
  const int n = static_cast<int>(vertices.rows());
  Eigen::MatrixXd D_hat(n + 1, n + 1);
  D_hat.topRows(n) = vertices;
  D_hat.row(n).setOnes();
  const Eigen::MatrixXd inv = D_hat.fullPivLu().inverse();
  Eigen::VectorXd point(n + 1);
  point.head(n) = center;
  point(n) = 1.0;
  double r = kInf;
  for (int j = 0; j <= n; ++j) {
    const double gnorm = inv.row(j).head(n).norm();
    r = std::min(r, inv.row(j).dot(point) / gnorm);
  }
  return r;
}

SimplexPolicy simplex_policy_fit(const Eigen::MatrixXd& vertices,
                                 const Eigen::MatrixXd& dispatches) {
  const int n = static_cast<int>(vertices.rows());
  if (vertices.cols() != n + 1 || dispatches.cols() != n + 1) {
    throw PreconditionError("a simplex in dimension n needs n + 1 vertices and dispatches");
  }
  Eigen::MatrixXd D_hat(n + 1, n + 1);
  D_hat.topRows(n) = vertices;
  D_hat.row(n).setOnes();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(D_hat);
  const auto& sv = svd.singularValues();
  const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : kInf;
  if (!(cond <= 1e12)) {
    throw GeometryError("vertex matrix is singular or ill-conditioned (condition " +
                        std::to_string(cond) + ")");
  }
  // [G p0] D_hat = P  <=>  D_hat' [G p0]' = P'
  const Eigen::MatrixXd X = D_hat.transpose().fullPivLu().solve(dispatches.transpose()).transpose();
  SimplexPolicy out;
  out.vertices = vertices;
  out.dispatches = dispatches;
  out.G = X.leftCols(n);
  out.p0 = X.col(n);
  out.condition = cond;
  return out;
}

SimplexPolicy heuristic_simplex(const NetworkCase& net, const FeasibilityMatrices& mats,
                                double initial_scale, int max_halvings, const Tolerances& tol) {
  const int n = mats.dim_delta();
  const int k = mats.dim_p();
  double scale = initial_scale;
  for (int h = 0; h <= max_halvings; ++h, scale *= 0.5) {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n + 1);
    for (int i = 0; i < n; ++i) D(i, i) = scale;
    D.col(n).setConstant(-scale);
    Eigen::MatrixXd P(k, n + 1);
    bool ok = true;
    for (int v = 0; v <= n && ok; ++v) {
      DispatchResult r = solve_dcopf(net, mats, D.col(v), tol);
      if (!r.feasible) {
        ok = false;
      } else {
        P.col(v) = r.p;
      }
    }
    if (ok) return simplex_policy_fit(D, P);
  }
  throw GeometryError("no feasible coordinate simplex found after " +
                      std::to_string(max_halvings) + " halvings");
}

DefensePolicy policy_from_simplex(const FeasibilityMatrices& mats, const SimplexPolicy& simplex,
                                  const Tolerances& tol) {
  DefensePolicy policy;
  policy.p0 = simplex.p0;
  policy.G = simplex.G;
  TTilde tt = t_tilde(mats, policy.p0, policy.G, tol);
  policy.t = tt.t;
  policy.binding_row = tt.binding_row;
  policy.method = "simplex";
  return policy;
}

}  // namespace dcattack
