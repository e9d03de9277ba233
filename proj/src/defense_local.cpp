#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

#include "dcattack/defense.hpp"
#include "dcattack/errors.hpp"

namespace dcattack {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Generators with p_min < p_max; the others keep their dispatch and a zero
// policy row.
std::vector<int> free_generators(const FeasibilityMatrices& mats) {
  std::vector<int> free;
  for (int j = 0; j < mats.dim_p(); ++j) {
    if (!mats.pinned[j]) free.push_back(j);
  }
  return free;
}

DefensePolicy finish(const FeasibilityMatrices& mats, const WarmStart& init,
                     Eigen::VectorXd p0, Eigen::MatrixXd G, const DefenseOptions& options) {
  DefensePolicy policy;
  policy.method = to_string(options.method);
  const TTilde base = t_tilde(mats, init.p_init, init.G_init, options.tol);
  const bool usable = p0.allFinite() && G.allFinite() &&
                      (mats.A * p0 + mats.c).maxCoeff() <= options.tol.feasibility;
  const TTilde tt = usable ? t_tilde(mats, p0, G, options.tol) : base;
  if (!usable || !(tt.t > base.t)) {
    policy.p0 = init.p_init;
    policy.G = init.G_init;
    policy.t = base.t;
    policy.binding_row = base.binding_row;
    policy.stalled = true;
    return policy;
  }
  policy.p0 = std::move(p0);
  policy.G = std::move(G);
  policy.t = tt.t;
  policy.binding_row = tt.binding_row;
  return policy;
}

// Log-barrier path following for  max r  s.t.  |K'a_i + r b_i| <= -(a_i'p + c_i)
// with K = r G, which has the same optimum as the radius problem in sqrt(t).
class BarrierSolver {
 public:
  BarrierSolver(const FeasibilityMatrices& mats, const WarmStart& init,
                const DefenseOptions& options)
      : mats_(mats), opt_(options), free_(free_generators(mats)) {
    kf_ = static_cast<int>(free_.size());
    nd_ = mats.dim_delta();
    Eigen::VectorXd c_eff = mats.c;
    for (int j = 0; j < mats.dim_p(); ++j) {
      if (mats.pinned[j]) c_eff += mats.A.col(j) * init.p_init(j);
    }
    for (int i = 0; i < mats.rows(); ++i) {
      double a_norm = 0.0;
      for (int j : free_) a_norm += std::abs(mats.A(i, j));
      if (a_norm > 0.0 || mats.B.row(i).norm() > 0.0) rows_.push_back(i);
    }
    mr_ = static_cast<int>(rows_.size());
    Af_.resize(mr_, kf_);
    Bm_.resize(mr_, nd_);
    cf_.resize(mr_);
    for (int r = 0; r < mr_; ++r) {
      for (int j = 0; j < kf_; ++j) Af_(r, j) = mats.A(rows_[r], free_[j]);
      Bm_.row(r) = mats.B.row(rows_[r]);
      cf_(r) = c_eff(rows_[r]);
    }
    n_ = kf_ * nd_ + 1 + kf_;
  }

  // Returns false when the start is not strictly inside the cone.
  bool solve(const WarmStart& init, Eigen::VectorXd& p0, Eigen::MatrixXd& G) {
    const auto start = Clock::now();
    double t0 = init.t_init;
    if (!std::isfinite(t0)) return false;
    double r = 0.5 * std::sqrt(std::max(t0, 0.0));
    Eigen::MatrixXd K(kf_, nd_);
    for (int j = 0; j < kf_; ++j) K.row(j) = r * init.G_init.row(free_[j]);
    Eigen::VectorXd p(kf_);
    for (int j = 0; j < kf_; ++j) p(j) = init.p_init(free_[j]);

    Eigen::VectorXd s, u;
    Eigen::MatrixXd V;
    if (!evaluate(K, r, p, s, V, u)) return false;

    double weight = opt_.barrier_weight0;
    int newton = 0;
    while (true) {
      for (int step = 0; step < 200; ++step) {
        if (newton >= opt_.max_newton) break;
        if (opt_.time_limit > 0.0 && seconds_since(start) > opt_.time_limit) break;
        ++newton;
        const double f = -weight * r - u.array().log().sum();
        Eigen::VectorXd g(n_);
        Eigen::MatrixXd H(n_, n_);
        assemble(K, r, p, s, V, u, weight, g, H);
        Eigen::VectorXd dx;
        if (!newton_step(H, g, dx)) break;
        const double lambda2 = -g.dot(dx);
        if (!(lambda2 > 0.0) || lambda2 / 2.0 < 1e-9) break;
        double alpha = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
          Eigen::MatrixXd Kn = K;
          for (int j = 0; j < kf_; ++j) {
            Kn.row(j) += alpha * dx.segment(j * nd_, nd_).transpose();
          }
          const double rn = r + alpha * dx(kf_ * nd_);
          const Eigen::VectorXd pn = p + alpha * dx.tail(kf_);
          Eigen::VectorXd sn, un;
          Eigen::MatrixXd Vn;
          if (!evaluate(Kn, rn, pn, sn, Vn, un)) continue;
          const double fn = -weight * rn - un.array().log().sum();
          if (fn <= f - 0.25 * alpha * lambda2) {
            K = std::move(Kn);
            r = rn;
            p = pn;
            s = std::move(sn);
            V = std::move(Vn);
            u = std::move(un);
            moved = true;
            break;
          }
        }
        if (!moved) break;
      }
      const double gap = 2.0 * mr_ / weight;
      if (gap < opt_.duality_gap * std::max(r, 1e-12)) break;
      if (newton >= opt_.max_newton || weight > 1e16) break;
      if (opt_.time_limit > 0.0 && seconds_since(start) > opt_.time_limit) break;
      weight *= opt_.barrier_growth;
    }
    newton_steps_ = newton;
    if (!(r > 0.0)) return false;
    p0 = init.p_init;
    G = Eigen::MatrixXd::Zero(mats_.dim_p(), nd_);
    for (int j = 0; j < kf_; ++j) {
      p0(free_[j]) = p(j);
      G.row(free_[j]) = K.row(j) / r;
    }
    return true;
  }

  int newton_steps() const { return newton_steps_; }

 private:
  bool evaluate(const Eigen::MatrixXd& K, double r, const Eigen::VectorXd& p, Eigen::VectorXd& s,
                Eigen::MatrixXd& V, Eigen::VectorXd& u) const {
    s = -(Af_ * p + cf_);
    V = Af_ * K + r * Bm_;
    u = s.array().square() - V.rowwise().squaredNorm().array();
    return (s.array() > 0.0).all() && (u.array() > 0.0).all();
  }

  void assemble(const Eigen::MatrixXd& K, double r, const Eigen::VectorXd& p,
                const Eigen::VectorXd& s, const Eigen::MatrixXd& V, const Eigen::VectorXd& u,
                double weight, Eigen::VectorXd& g, Eigen::MatrixXd& H) const {
    (void)K;
    (void)r;
    (void)p;
    const int kn = kf_ * nd_;
    const Eigen::VectorXd two_u = 2.0 * u.cwiseInverse();
    const Eigen::MatrixXd gV = two_u.asDiagonal() * V;
    const Eigen::MatrixXd gK = Af_.transpose() * gV;
    for (int j = 0; j < kf_; ++j) g.segment(j * nd_, nd_) = gK.row(j).transpose();
    g(kn) = -weight + gV.cwiseProduct(Bm_).sum();
    g.tail(kf_) = Af_.transpose() * two_u.cwiseProduct(s);

    H.setZero();
    const Eigen::MatrixXd Mk = Af_.transpose() * two_u.asDiagonal() * Af_;
    for (int j = 0; j < kf_; ++j) {
      for (int jj = 0; jj < kf_; ++jj) {
        const double v = Mk(j, jj);
        if (v == 0.0) continue;
        for (int l = 0; l < nd_; ++l) H(j * nd_ + l, jj * nd_ + l) = v;
      }
    }
    const Eigen::MatrixXd KR = Af_.transpose() * two_u.asDiagonal() * Bm_;
    for (int j = 0; j < kf_; ++j) {
      for (int l = 0; l < nd_; ++l) {
        H(j * nd_ + l, kn) = KR(j, l);
        H(kn, j * nd_ + l) = KR(j, l);
      }
    }
    H(kn, kn) = two_u.dot(Bm_.rowwise().squaredNorm());
    H.bottomRightCorner(kf_, kf_) = -Mk;

    // Gradient-of-u outer products: rows are (2/u_i) * (s_i grad s_i - sum_l v_il grad v_il).
    Eigen::MatrixXd Hm(mr_, n_);
    for (int i = 0; i < mr_; ++i) {
      const double w = two_u(i);
      for (int j = 0; j < kf_; ++j) {
        Hm.row(i).segment(j * nd_, nd_) = (-w * Af_(i, j)) * V.row(i);
      }
      Hm(i, kn) = -w * V.row(i).dot(Bm_.row(i));
      Hm.row(i).tail(kf_) = (-w * s(i)) * Af_.row(i);
    }
    // Only the lower triangle is read by the factorizations.
    H.selfadjointView<Eigen::Lower>().rankUpdate(Hm.transpose());
  }

  bool newton_step(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, Eigen::VectorXd& dx) const {
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() == Eigen::Success) {
      dx = -llt.solve(g);
      if (dx.allFinite()) return true;
    }
    const double shift = 1e-12 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
    Eigen::MatrixXd Hs = H;
    Hs.diagonal().array() += shift;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Hs);
    if (ldlt.info() != Eigen::Success) return false;
    dx = -ldlt.solve(g);
    return dx.allFinite();
  }

  const FeasibilityMatrices& mats_;
  DefenseOptions opt_;
  std::vector<int> free_;
  std::vector<int> rows_;
  int kf_ = 0, nd_ = 0, mr_ = 0, n_ = 0;
  Eigen::MatrixXd Af_, Bm_;
  Eigen::VectorXd cf_;
  int newton_steps_ = 0;
};

// Softmin of the per-row log radii, maximized by Barzilai-Borwein gradient
// ascent with Armijo backtracking under a shrinking temperature.
class SoftminSolver {
 public:
  SoftminSolver(const FeasibilityMatrices& mats, const DefenseOptions& options)
      : mats_(mats), opt_(options) {
    mask_ = Eigen::VectorXd::Ones(mats.dim_p());
    for (int j = 0; j < mats.dim_p(); ++j) {
      if (mats.pinned[j]) mask_(j) = 0.0;
    }
    priority_ = Eigen::VectorXd::Ones(mats.rows());
  }

  void solve(const WarmStart& init, Eigen::VectorXd& p_best, Eigen::MatrixXd& G_best) {
    const auto start = Clock::now();
    Eigen::VectorXd p = init.p_init;
    Eigen::MatrixXd G = init.G_init;
    p_best = p;
    G_best = G;
    double t_best = t_tilde(mats_, p, G, opt_.tol).t;
    double step = 1e-3;
    for (double tau = opt_.tau0; tau >= opt_.tau_min; tau *= 0.5) {
      update_priority(G);
      Eigen::VectorXd gp;
      Eigen::MatrixXd gG;
      double f = objective(p, G, tau, &gp, &gG);
      if (!std::isfinite(f)) break;
      double previous = f;
      for (int it = 0; it < opt_.max_steps_per_stage; ++it) {
        if (opt_.time_limit > 0.0 && seconds_since(start) > opt_.time_limit) break;
        const double g2 = gp.squaredNorm() + gG.squaredNorm();
        if (g2 == 0.0) break;
        Eigen::VectorXd pn, gpn;
        Eigen::MatrixXd Gn, gGn;
        double fn = -kInf;
        while (step > 1e-14) {
          pn = p + step * gp;
          Gn = G + step * gG;
          fn = objective(pn, Gn, tau, &gpn, &gGn);
          if (std::isfinite(fn) && fn >= f + 1e-4 * step * g2) break;
          step *= 0.5;
        }
        if (step <= 1e-14) break;
        const double sp2 = (pn - p).squaredNorm() + (Gn - G).squaredNorm();
        const double sy = -((pn - p).dot(gpn - gp) + (Gn - G).cwiseProduct(gGn - gG).sum());
        p = pn;
        G = Gn;
        gp = gpn;
        gG = gGn;
        f = fn;
        step = sy > 0.0 ? std::clamp(sp2 / sy, 1e-10, 1e6) : std::min(step * 2.0, 1e6);
        if (it > 20 && std::abs(f - previous) < 1e-10 * std::abs(f) + 1e-12) break;
        previous = f;
      }
      const double t = t_tilde(mats_, p, G, opt_.tol).t;
      if (t > t_best) {
        t_best = t;
        p_best = p;
        G_best = G;
      }
      if (opt_.time_limit > 0.0 && seconds_since(start) > opt_.time_limit) break;
    }
  }

 private:
  void update_priority(const Eigen::MatrixXd& G) {
    priority_.setOnes();
    if (!opt_.hint_direction || opt_.hint_direction->norm() == 0.0) return;
    const Eigen::VectorXd h = opt_.hint_direction->normalized();
    const Eigen::MatrixXd V = mats_.A * G + mats_.B;
    for (int i = 0; i < mats_.rows(); ++i) {
      const double vn = V.row(i).norm();
      if (vn > 0.0) {
        const double cosine = V.row(i).dot(h) / vn;
        priority_(i) = 1.0 + 4.0 * cosine * cosine;
      }
    }
  }

  double objective(const Eigen::VectorXd& p, const Eigen::MatrixXd& G, double tau,
                   Eigen::VectorXd* gp, Eigen::MatrixXd* gG) const {
    const Eigen::VectorXd s = -(mats_.A * p + mats_.c);
    const Eigen::MatrixXd V = mats_.A * G + mats_.B;
    const Eigen::VectorXd n2 = V.rowwise().squaredNorm();
    const int m = mats_.rows();
    Eigen::VectorXd psi = Eigen::VectorXd::Constant(m, kInf);
    double lowest = kInf;
    const double zero2 = opt_.tol.projection * opt_.tol.projection;
    for (int i = 0; i < m; ++i) {
      if (n2(i) <= zero2) continue;
      if (!(s(i) > 0.0)) return -kInf;
      psi(i) = std::log(s(i)) - 0.5 * std::log(n2(i));
      lowest = std::min(lowest, psi(i));
    }
    if (!std::isfinite(lowest)) return -kInf;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < m; ++i) {
      if (std::isfinite(psi(i))) w(i) = priority_(i) * std::exp(-(psi(i) - lowest) / tau);
    }
    const double Z = w.sum();
    w /= Z;
    Eigen::VectorXd ws = Eigen::VectorXd::Zero(m), wn = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < m; ++i) {
      if (w(i) > 0.0) {
        ws(i) = w(i) / s(i);
        wn(i) = w(i) / n2(i);
      }
    }
    *gp = -(mats_.A.transpose() * ws).cwiseProduct(mask_);
    *gG = -(mats_.A.transpose() * (wn.asDiagonal() * V));
    for (int j = 0; j < mats_.dim_p(); ++j) {
      if (mask_(j) == 0.0) gG->row(j).setZero();
    }
    return lowest - tau * std::log(Z);
  }

  const FeasibilityMatrices& mats_;
  DefenseOptions opt_;
  Eigen::VectorXd mask_;
  Eigen::VectorXd priority_;
};

}  // namespace

DefensePolicy defense_local(const FeasibilityMatrices& mats, const WarmStart& init,
                            const DefenseOptions& options) {
  if (init.p_init.size() != mats.dim_p() || init.G_init.rows() != mats.dim_p() ||
      init.G_init.cols() != mats.dim_delta()) {
    throw PreconditionError("initial policy dimensions do not match the feasibility matrices");
  }
  // Raises PreconditionError when the initial dispatch is infeasible.
  t_tilde(mats, init.p_init, init.G_init, options.tol);

  Eigen::VectorXd p0;
  Eigen::MatrixXd G;
  if (options.method == DefenseMethod::kBarrier) {
    BarrierSolver solver(mats, init, options);
    if (!solver.solve(init, p0, G)) {
      return finish(mats, init, init.p_init, init.G_init, options);
    }
  } else {
    SoftminSolver solver(mats, options);
    solver.solve(init, p0, G);
  }
  return finish(mats, init, std::move(p0), std::move(G), options);
}

}  // namespace dcattack
