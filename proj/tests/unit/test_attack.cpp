#include <cmath>
#include <random>

#include "doctest.h"
#include "dcattack/attack.hpp"
#include "dcattack/defense.hpp"
#include "dcattack/errors.hpp"
#include "fixtures.hpp"
#include "oracle.hpp"

using namespace dcattack;

namespace {

struct Loaded {
  NetworkCase net;
  FeasibilityMatrices mats;
};

Loaded desk2() {
  Loaded l{fixtures::load(fixtures::data_path("desk/desk2.m")), {}};
  l.mats = build_model(l.net);
  return l;
}

bool oracle_feasible(const FeasibilityMatrices& m, const Eigen::VectorXd& delta) {
  return oracle::phase1(m.A, -(m.B * delta + m.c)).feasible;
}

AttackConfig seeded(uint64_t seed) {
  AttackConfig cfg;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("desk2 attack exhausts the lower headroom") {
  Loaded d = desk2();
  MultistartResult res = multistart_attack(d.mats, seeded(1));
  // Generation cannot fall below 10 MW, so the 50 MW load may drop by 40 MW.
  CHECK(res.best.norm_sq == doctest::Approx(0.16).epsilon(1e-6));
  CHECK(std::abs(res.best.delta(0)) == doctest::Approx(0.4).epsilon(1e-6));
  CHECK(res.best.certified);

  // One-dimensional grid with the tableau oracle.
  const double step = 5e-4;
  double grid = NAN;
  for (int k = 1; k < 4000 && std::isnan(grid); ++k) {
    for (double sign : {1.0, -1.0}) {
      if (!oracle_feasible(d.mats, Eigen::VectorXd::Constant(1, sign * k * step))) {
        grid = k * step;
        break;
      }
    }
  }
  CHECK(grid * grid == doctest::Approx(res.best.norm_sq).epsilon(0.01));
}

TEST_CASE("attack residual invariants and certification") {
  for (const char* name : {"case5_pjm", "case14_ieee"}) {
    NetworkCase net = fixtures::load(fixtures::pglib(name));
    FeasibilityMatrices m = build_model(net);
    AttackSolution s = multistart_attack(m, seeded(3)).best;
    REQUIRE(s.certified);
    CHECK(s.mu.minCoeff() >= -1e-10);
    CHECK((m.A.transpose() * s.mu).cwiseAbs().maxCoeff() <= 1e-7);
    CHECK(s.mu.dot(m.B * s.delta + m.c) >= s.eps_used - 1e-9);
    CHECK(s.residuals.dual_stationarity <= 1e-7);
    CHECK(s.norm_sq == doctest::Approx(s.delta.squaredNorm()));

    const Eigen::VectorXd scaled = (1.0 + 1e-4) * s.delta;
    InfeasibilityVerdict v = certify_infeasible(m, scaled);
    REQUIRE(v.certified);
    const Eigen::VectorXd& y = v.ray.y_ub;
    CHECK(y.minCoeff() >= 0.0);
    CHECK((m.A.transpose() * y).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(y.dot(m.B * scaled + m.c) > 0.0);
    CHECK_FALSE(oracle_feasible(m, scaled));
  }
}

TEST_CASE("reference incumbents") {
  struct Row {
    const char* name;
    double value;
    double rel;
    uint64_t seed;
  };
  for (const Row& r : {Row{"case5_pjm", 6.29, 0.02, 0}, Row{"case14_ieee", 0.178, 0.05, 0},
                       Row{"case30_as", 0.0144, 0.05, 0}, Row{"case57_ieee", 0.0547, 0.05, 7}}) {
    CAPTURE(r.name);
    NetworkCase net = fixtures::load(fixtures::pglib(r.name));
    FeasibilityMatrices m = build_model(net);
    MultistartResult res = multistart_attack(m, seeded(r.seed));
    CHECK(res.best.norm_sq == doctest::Approx(r.value).epsilon(r.rel));
    CHECK(res.fixed_dispatch_lb <= res.best.norm_sq + 1e-6);
  }
}

TEST_CASE("multistart is deterministic for a seed and thread count") {
  NetworkCase net = fixtures::load(fixtures::pglib("case14_ieee"));
  FeasibilityMatrices m = build_model(net);
  AttackConfig cfg = seeded(42);
  AttackSolution a = multistart_attack(m, cfg).best;
  AttackSolution b = multistart_attack(m, cfg).best;
  CHECK(a.delta == b.delta);
  CHECK(a.mu == b.mu);
  cfg.threads = 3;
  AttackSolution c = multistart_attack(m, cfg).best;
  CHECK(a.delta == c.delta);
  CHECK(restart_seed(42, 0) != restart_seed(42, 1));
}

TEST_CASE("certify_infeasible on trivial inputs") {
  NetworkCase net = fixtures::load(fixtures::pglib("case5_pjm"));
  FeasibilityMatrices m = build_model(net);
  InfeasibilityVerdict nominal = certify_infeasible(m, Eigen::VectorXd::Zero(m.dim_delta()));
  CHECK_FALSE(nominal.certified);
  REQUIRE(nominal.witness.size() == m.dim_p());
  CHECK((m.A * nominal.witness + m.c).maxCoeff() <= 1e-8);

  double headroom = -net.total_load();
  for (const Generator& g : net.generators) headroom += g.p_max;
  Eigen::VectorXd big = Eigen::VectorXd::Constant(m.dim_delta(), (headroom + 0.1) / m.dim_delta());
  CHECK(certify_infeasible(m, big).certified);
}

TEST_CASE("fixed-dispatch bound") {
  Loaded d = desk2();
  DispatchResult nominal = solve_dcopf(d.net, d.mats, Eigen::VectorXd::Zero(1));
  const double lb = fixed_dispatch_lb(d.mats, nominal.p);
  CHECK(lb <= 0.16 + 1e-12);
  CHECK(lb == doctest::Approx(t_tilde(d.mats, nominal.p, Eigen::MatrixXd::Zero(1, 1)).t));
  FixedDispatchBound fb = fixed_dispatch_bound(d.mats, nominal.p);
  CHECK(fb.norm_sq == doctest::Approx(lb));
  CHECK(fb.delta.squaredNorm() == doctest::Approx(lb));
  CHECK_THROWS_AS(fixed_dispatch_lb(d.mats, Eigen::VectorXd::Constant(1, 5.0)), PreconditionError);
}

TEST_CASE("epsilon insensitivity on desk2") {
  Loaded d = desk2();
  AttackConfig cfg = seeded(9);
  const double base = multistart_attack(d.mats, cfg).best.norm_sq;
  cfg.eps = 5e-4;
  const double half = multistart_attack(d.mats, cfg).best.norm_sq;
  CHECK(std::abs(half - base) / base < 1e-3);
}

TEST_CASE("uniform weights keep the argmin") {
  NetworkCase net = fixtures::load(fixtures::data_path("desk/desk3.m"));
  FeasibilityMatrices m = build_model(net);
  AttackConfig cfg = seeded(4);
  AttackSolution plain = multistart_attack(m, cfg).best;
  cfg.weight = Eigen::VectorXd::Constant(m.dim_delta(), 3.0);
  AttackSolution weighted = multistart_attack(m, cfg).best;
  CHECK((plain.delta - weighted.delta).norm() <= 1e-6 * (1.0 + plain.delta.norm()));
  CHECK(weighted.norm_sq == doctest::Approx(plain.norm_sq).epsilon(1e-6));
  CHECK(weighted.objective == doctest::Approx(3.0 * plain.norm_sq).epsilon(1e-6));
}

TEST_CASE("attack_local needs an infeasible start") {
  Loaded d = desk2();
  CHECK_THROWS_AS(attack_local(d.mats, AttackConfig{}, Eigen::VectorXd::Constant(1, 0.01)), SolverError);
  AttackSolution s = attack_from_direction(d.mats, AttackConfig{}, Eigen::VectorXd::Constant(1, -1.0));
  CHECK(s.norm_sq == doctest::Approx(0.16).epsilon(1e-6));
  CHECK(ray_exit_scale(d.mats, Eigen::VectorXd::Constant(1, 1.0)) == doctest::Approx(0.8).epsilon(1e-9));
}
