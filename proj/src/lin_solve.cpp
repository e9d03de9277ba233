#include "dcattack/lin_solve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "dcattack/errors.hpp"

namespace dcattack {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarState { kBasic, kAtLower, kAtUpper, kFreeZero };

bool has_nan(const Eigen::MatrixXd& m) { return !(m.array() == m.array()).all(); }

// Bounded-variable revised simplex on  Af x = b, lo <= x <= up,  with the
// basis inverse kept densely and refreshed by LU refactorization.
class Simplex {
 public:
  Simplex(const LpProblem& prob, const LpOptions& options)
      : opt_(options),
        n_(prob.num_vars()),
        m_ub_(static_cast<int>(prob.b_ub.size())),
        m_eq_(static_cast<int>(prob.b_eq.size())) {
    M_ = m_ub_ + m_eq_;
    N_ = n_ + m_ub_ + M_;
    Af_ = Eigen::MatrixXd::Zero(M_, N_);
    b_.resize(M_);
    if (m_ub_ > 0) {
      Af_.block(0, 0, m_ub_, n_) = prob.A_ub;
      b_.head(m_ub_) = prob.b_ub;
    }
    if (m_eq_ > 0) {
      Af_.block(m_ub_, 0, m_eq_, n_) = prob.A_eq;
      b_.tail(m_eq_) = prob.b_eq;
    }
    for (int i = 0; i < m_ub_; ++i) Af_(i, n_ + i) = 1.0;
    lo_ = Eigen::VectorXd::Zero(N_);
    up_ = Eigen::VectorXd::Constant(N_, kInf);
    for (int j = 0; j < n_; ++j) {
      lo_(j) = prob.lower.size() ? prob.lower(j) : -kInf;
      up_(j) = prob.upper.size() ? prob.upper(j) : kInf;
    }
    structural_cost_ = prob.objective;
    b_scale_ = 1.0 + (M_ > 0 ? b_.cwiseAbs().maxCoeff() : 0.0);
    max_iterations_ = opt_.max_iterations > 0 ? opt_.max_iterations
                                              : std::max(20000, 30 * (M_ + N_));
  }

  LpResult solve() {
    initialize();
    LpResult result;

    Eigen::VectorXd phase1_cost = Eigen::VectorXd::Zero(N_);
    for (int i = 0; i < M_; ++i) phase1_cost(artificial(i)) = 1.0;
    run(phase1_cost);
    refactor();
    double w = 0.0;
    for (int i = 0; i < M_; ++i) w += std::max(0.0, x_(artificial(i)));
    result.phase1_objective = w;
    result.iterations = iterations_;
    if (w > opt_.primal_tol * b_scale_) {
      result.status = LpStatus::kInfeasible;
      result.farkas = farkas_from_duals(phase1_cost);
      result.x = x_.head(n_);
      return result;
    }

    for (int i = 0; i < M_; ++i) {
      up_(artificial(i)) = 0.0;
      if (state_[artificial(i)] != VarState::kBasic) {
        state_[artificial(i)] = VarState::kAtLower;
        x_(artificial(i)) = 0.0;
      }
    }
    refactor();
    Eigen::VectorXd cost = Eigen::VectorXd::Zero(N_);
    cost.head(n_) = structural_cost_;
    Eigen::VectorXd ray;
    bool bounded = run(cost, &ray);
    refactor();
    result.iterations = iterations_;
    result.x = x_.head(n_);
    result.objective = structural_cost_.dot(result.x);
    if (!bounded) {
      result.status = LpStatus::kUnbounded;
      result.ray = ray;
      return result;
    }
    result.status = LpStatus::kOptimal;
    fill_duals(cost, result);
    return result;
  }

 private:
  int artificial(int row) const { return n_ + m_ub_ + row; }

  void initialize() {
    state_.assign(N_, VarState::kAtLower);
    x_ = Eigen::VectorXd::Zero(N_);
    for (int j = 0; j < n_; ++j) {
      if (std::isfinite(lo_(j))) {
        x_(j) = lo_(j);
        state_[j] = VarState::kAtLower;
      } else if (std::isfinite(up_(j))) {
        x_(j) = up_(j);
        state_[j] = VarState::kAtUpper;
      } else {
        x_(j) = 0.0;
        state_[j] = VarState::kFreeZero;
      }
    }
    Eigen::VectorXd r = b_ - Af_.leftCols(n_) * x_.head(n_);
    basis_.assign(M_, -1);
    for (int i = 0; i < M_; ++i) {
      int a = artificial(i);
      bool use_slack = i < m_ub_ && r(i) >= 0.0;
      if (use_slack) {
        int s = n_ + i;
        basis_[i] = s;
        state_[s] = VarState::kBasic;
        x_(s) = r(i);
        Af_(i, a) = 1.0;
        up_(a) = 0.0;
        state_[a] = VarState::kAtLower;
      } else {
        double sign = r(i) >= 0.0 ? 1.0 : -1.0;
        Af_(i, a) = sign;
        basis_[i] = a;
        state_[a] = VarState::kBasic;
        x_(a) = std::abs(r(i));
      }
    }
    Binv_ = Eigen::MatrixXd::Zero(M_, M_);
    for (int i = 0; i < M_; ++i) Binv_(i, i) = 1.0 / Af_(i, basis_[i]);
    since_refactor_ = 0;
  }

  void refactor() {
    since_refactor_ = 0;
    if (M_ == 0) return;
    Eigen::MatrixXd B(M_, M_);
    for (int i = 0; i < M_; ++i) B.col(i) = Af_.col(basis_[i]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    if (!(lu.rcond() > 1e-15)) {
      throw SolverError("singular basis during refactorization after " +
                        std::to_string(iterations_) + " iterations");
    }
    Binv_ = lu.inverse();
    Eigen::VectorXd rhs = b_;
    for (int j = 0; j < N_; ++j) {
      if (state_[j] != VarState::kBasic && x_(j) != 0.0) rhs -= Af_.col(j) * x_(j);
    }
    Eigen::VectorXd xb = Binv_ * rhs;
    for (int i = 0; i < M_; ++i) x_(basis_[i]) = xb(i);
  }

  Eigen::VectorXd duals(const Eigen::VectorXd& cost) const {
    Eigen::VectorXd cb(M_);
    for (int i = 0; i < M_; ++i) cb(i) = cost(basis_[i]);
    return Binv_.transpose() * cb;
  }

  bool eligible(int j, double d) const {
    switch (state_[j]) {
      case VarState::kBasic: return false;
      case VarState::kAtLower: return lo_(j) < up_(j) && d < -opt_.dual_tol;
      case VarState::kAtUpper: return lo_(j) < up_(j) && d > opt_.dual_tol;
      case VarState::kFreeZero: return std::abs(d) > opt_.dual_tol;
    }
    return false;
  }

  std::string diagnostics() const {
    std::ostringstream out;
    out << "iterations=" << iterations_ << " rows=" << M_ << " cols=" << N_ << " basis=[";
    for (int i = 0; i < std::min(M_, 12); ++i) out << (i ? "," : "") << basis_[i];
    if (M_ > 12) out << ",...";
    out << "]";
    return out.str();
  }

  // Returns false when an unbounded direction is found (stored in *ray).
  bool run(const Eigen::VectorXd& cost, Eigen::VectorXd* ray = nullptr) {
    int degenerate = 0;
    while (true) {
      if (iterations_ >= max_iterations_) {
        throw SolverError("simplex iteration limit reached: " + diagnostics());
      }
      if (since_refactor_ >= opt_.refactor_every) refactor();
      Eigen::VectorXd pi = duals(cost);
      Eigen::VectorXd d = cost - Af_.transpose() * pi;

      bool bland = degenerate >= opt_.degenerate_before_bland;
      int q = -1;
      double best = 0.0;
      for (int j = 0; j < N_; ++j) {
        if (!eligible(j, d(j))) continue;
        if (bland) {
          q = j;
          break;
        }
        if (std::abs(d(j)) > best) {
          best = std::abs(d(j));
          q = j;
        }
      }
      if (q < 0) return true;

      const double dir = d(q) < 0.0 ? 1.0 : -1.0;
      Eigen::VectorXd alpha = Binv_ * Af_.col(q);

      // Two-pass Harris ratio test; Bland mode uses the exact minimum ratio.
      double theta_max = kInf;
      for (int i = 0; i < M_; ++i) {
        double beta = dir * alpha(i);
        int v = basis_[i];
        if (beta > opt_.pivot_tol && std::isfinite(lo_(v))) {
          double slack = bland ? x_(v) - lo_(v) : x_(v) - lo_(v) + opt_.primal_tol;
          theta_max = std::min(theta_max, slack / beta);
        } else if (beta < -opt_.pivot_tol && std::isfinite(up_(v))) {
          double slack = bland ? up_(v) - x_(v) : up_(v) - x_(v) + opt_.primal_tol;
          theta_max = std::min(theta_max, slack / -beta);
        }
      }
      int leave = -1;
      double theta = kInf;
      if (std::isfinite(theta_max)) {
        double best_pivot = 0.0;
        for (int i = 0; i < M_; ++i) {
          double beta = dir * alpha(i);
          int v = basis_[i];
          double ratio;
          if (beta > opt_.pivot_tol && std::isfinite(lo_(v))) {
            ratio = (x_(v) - lo_(v)) / beta;
          } else if (beta < -opt_.pivot_tol && std::isfinite(up_(v))) {
            ratio = (up_(v) - x_(v)) / -beta;
          } else {
            continue;
          }
          if (bland) {
            if (ratio <= theta_max + 1e-14 && (leave < 0 || v < basis_[leave])) {
              leave = i;
              theta = ratio;
            }
          } else if (ratio <= theta_max && std::abs(beta) > best_pivot) {
            best_pivot = std::abs(beta);
            leave = i;
            theta = ratio;
          }
        }
        theta = std::max(theta, 0.0);
      }
      double range = up_(q) - lo_(q);
      bool flip = std::isfinite(range) && range <= theta;
      if (flip) theta = range;
      if (!flip && leave < 0) {
        if (ray) {
          *ray = Eigen::VectorXd::Zero(n_);
          if (q < n_) (*ray)(q) = dir;
          for (int i = 0; i < M_; ++i) {
            if (basis_[i] < n_) (*ray)(basis_[i]) = -dir * alpha(i);
          }
        }
        return false;
      }

      ++iterations_;
      degenerate = theta <= 1e-12 ? degenerate + 1 : 0;
      x_(q) += dir * theta;
      for (int i = 0; i < M_; ++i) x_(basis_[i]) -= dir * theta * alpha(i);
      if (flip) {
        state_[q] = dir > 0 ? VarState::kAtUpper : VarState::kAtLower;
        x_(q) = dir > 0 ? up_(q) : lo_(q);
        continue;
      }
      int out = basis_[leave];
      bool to_lower = dir * alpha(leave) > 0.0;
      state_[out] = to_lower ? VarState::kAtLower : VarState::kAtUpper;
      x_(out) = to_lower ? lo_(out) : up_(out);
      basis_[leave] = q;
      state_[q] = VarState::kBasic;

      Eigen::RowVectorXd pivot_row = Binv_.row(leave) / alpha(leave);
      Binv_.noalias() -= alpha * pivot_row;
      Binv_.row(leave) = pivot_row;
      ++since_refactor_;
    }
  }

  FarkasCertificate farkas_from_duals(const Eigen::VectorXd& phase1_cost) const {
    Eigen::VectorXd y = -duals(phase1_cost);
    for (int i = 0; i < m_ub_; ++i) y(i) = std::max(y(i), 0.0);
    double scale = y.lpNorm<1>();
    if (scale > 0.0) y /= scale;
    FarkasCertificate cert;
    cert.y_ub = y.head(m_ub_);
    cert.y_eq = y.tail(m_eq_);
    return cert;
  }

  void fill_duals(const Eigen::VectorXd& cost, LpResult& result) const {
    Eigen::VectorXd pi = duals(cost);
    Eigen::VectorXd d = cost - Af_.transpose() * pi;
    result.y_ub = -pi.head(m_ub_);
    result.y_eq = -pi.tail(m_eq_);
    result.z = d.head(n_);
    double dual_obj = pi.dot(b_);
    for (int j = 0; j < N_; ++j) {
      if (state_[j] != VarState::kBasic) dual_obj += d(j) * x_(j);
    }
    result.dual_objective = dual_obj;

    double primal = 0.0;
    Eigen::VectorXd ax = Af_.leftCols(n_) * x_.head(n_);
    for (int i = 0; i < m_ub_; ++i) primal = std::max(primal, ax(i) - b_(i));
    for (int i = m_ub_; i < M_; ++i) primal = std::max(primal, std::abs(ax(i) - b_(i)));
    for (int j = 0; j < n_; ++j) {
      primal = std::max({primal, lo_(j) - x_(j), x_(j) - up_(j)});
    }
    result.primal_residual = primal;

    double dual = 0.0;
    for (int j = 0; j < n_; ++j) {
      const double scale = 1.0 + std::abs(x_(j));
      bool at_lo = std::isfinite(lo_(j)) && x_(j) - lo_(j) <= opt_.primal_tol * scale;
      bool at_up = std::isfinite(up_(j)) && up_(j) - x_(j) <= opt_.primal_tol * scale;
      if (at_lo && at_up) continue;
      if (at_lo) {
        dual = std::max(dual, -d(j));
      } else if (at_up) {
        dual = std::max(dual, d(j));
      } else {
        dual = std::max(dual, std::abs(d(j)));
      }
    }
    for (int i = 0; i < m_ub_; ++i) {
      dual = std::max(dual, -result.y_ub(i));
      dual = std::max(dual, std::abs(result.y_ub(i) * (b_(i) - ax(i))));
    }
    result.dual_residual = dual;
  }

  LpOptions opt_;
  int n_, m_ub_, m_eq_, M_ = 0, N_ = 0;
  Eigen::MatrixXd Af_;
  Eigen::VectorXd b_, lo_, up_, structural_cost_;
  double b_scale_ = 1.0;
  std::vector<int> basis_;
  std::vector<VarState> state_;
  Eigen::VectorXd x_;
  Eigen::MatrixXd Binv_;
  int since_refactor_ = 0;
  int iterations_ = 0;
  int max_iterations_ = 0;
};

}  // namespace

void LpProblem::check() const {
  const int n = num_vars();
  auto fail = [](const std::string& what) { throw PreconditionError("LpProblem: " + what); };
  if (A_ub.rows() != b_ub.size()) fail("A_ub rows do not match b_ub");
  if (A_ub.rows() > 0 && A_ub.cols() != n) fail("A_ub columns do not match objective");
  if (A_eq.rows() != b_eq.size()) fail("A_eq rows do not match b_eq");
  if (A_eq.rows() > 0 && A_eq.cols() != n) fail("A_eq columns do not match objective");
  if (lower.size() != 0 && lower.size() != n) fail("lower bound size mismatch");
  if (upper.size() != 0 && upper.size() != n) fail("upper bound size mismatch");
  if (has_nan(objective) || has_nan(A_ub) || has_nan(b_ub) || has_nan(A_eq) ||
      has_nan(b_eq) || has_nan(lower) || has_nan(upper)) {
    fail("NaN entry");
  }
  if (!b_ub.allFinite() || !b_eq.allFinite() || !A_ub.allFinite() || !A_eq.allFinite() ||
      !objective.allFinite()) {
    fail("infinite entry in rows or objective");
  }
  for (int j = 0; j < n; ++j) {
    double lo = lower.size() ? lower(j) : -kInf;
    double up = upper.size() ? upper(j) : kInf;
    if (lo > up) fail("lower bound exceeds upper bound for variable " + std::to_string(j));
    if (lo == kInf || up == -kInf) fail("infeasible infinite bound");
  }
}

std::string to_string(LpStatus status) {
  switch (status) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
  }
  return "unknown";
}

LpResult lp_solve(const LpProblem& prob, const LpOptions& options) {
  prob.check();
  Simplex simplex(prob, options);
  return simplex.solve();
}

FarkasCheck verify_farkas(const LpProblem& prob, const FarkasCertificate& cert, double tol) {
  FarkasCheck check;
  const int n = prob.num_vars();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  double yb = 0.0;
  if (prob.b_ub.size() > 0) {
    if (cert.y_ub.size() != prob.b_ub.size()) return check;
    g += prob.A_ub.transpose() * cert.y_ub;
    yb += cert.y_ub.dot(prob.b_ub);
    check.residual = std::max(check.residual, -cert.y_ub.minCoeff());
  }
  if (prob.b_eq.size() > 0) {
    if (cert.y_eq.size() != prob.b_eq.size()) return check;
    g += prob.A_eq.transpose() * cert.y_eq;
    yb += cert.y_eq.dot(prob.b_eq);
  }
  double box_min = 0.0;
  for (int j = 0; j < n; ++j) {
    double lo = prob.lower.size() ? prob.lower(j) : -kInf;
    double up = prob.upper.size() ? prob.upper(j) : kInf;
    if (g(j) > 0.0) {
      if (std::isfinite(lo)) {
        box_min += g(j) * lo;
      } else {
        check.residual = std::max(check.residual, g(j));
      }
    } else if (g(j) < 0.0) {
      if (std::isfinite(up)) {
        box_min += g(j) * up;
      } else {
        check.residual = std::max(check.residual, -g(j));
      }
    }
  }
  check.margin = box_min - yb;
  check.valid = check.residual <= tol && check.margin > tol;
  return check;
}

}  // namespace dcattack
