#include "dcattack/dc_model.hpp"

#include <cmath>
#include <map>

#include "dcattack/errors.hpp"

namespace dcattack {

PtdfSet build_ptdf(const NetworkCase& net, int ref_bus) {
  const int nb = static_cast<int>(net.buses.size());
  const int nl = static_cast<int>(net.branches.size());
  if (ref_bus < 0 || ref_bus >= nb) throw ModelError("reference bus index out of range");
  std::map<int, int> index;
  for (int i = 0; i < nb; ++i) index[net.buses[i].id] = i;

  PtdfSet set;
  set.ref_bus = ref_bus;
  set.E = Eigen::MatrixXd::Zero(nl, nb);
  set.y.resize(nl);
  for (int l = 0; l < nl; ++l) {
    const Branch& br = net.branches[l];
    set.E(l, index.at(br.from_bus)) += 1.0;
    set.E(l, index.at(br.to_bus)) -= 1.0;
    set.y(l) = br.susceptance;
  }
  Eigen::MatrixXd E_hat(nl, nb - 1);
  for (int j = 0, col = 0; j < nb; ++j) {
    if (j != ref_bus) E_hat.col(col++) = set.E.col(j);
  }
  Eigen::MatrixXd YE = set.y.asDiagonal() * E_hat;
  Eigen::MatrixXd laplacian = E_hat.transpose() * YE;
  if (nb > 1) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(laplacian);
    if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-13)) {
      throw ModelError("reduced Laplacian is singular (disconnected network or zero susceptance)");
    }
    set.phi_hat = ldlt.solve(YE.transpose()).transpose();
  } else {
    set.phi_hat = Eigen::MatrixXd::Zero(nl, 0);
  }
  set.phi = Eigen::MatrixXd::Zero(nl, nb);
  for (int j = 0, col = 0; j < nb; ++j) {
    if (j != ref_bus) set.phi.col(j) = set.phi_hat.col(col++);
  }
  return set;
}

std::string to_string(const RowLabel& label, const NetworkCase& net) {
  auto branch_name = [&](int l) {
    const Branch& br = net.branches.at(l);
    return "branch " + std::to_string(l) + " (" + std::to_string(br.from_bus) + "-" +
           std::to_string(br.to_bus) + ")";
  };
  auto gen_name = [&](int g) {
    return "gen " + std::to_string(g) + " (bus " + std::to_string(net.generators.at(g).bus) +
           ")";
  };
  switch (label.kind) {
    case RowKind::kFlowUpper: return "flow-upper " + branch_name(label.element);
    case RowKind::kFlowLower: return "flow-lower " + branch_name(label.element);
    case RowKind::kSlackGenUpper: return "slack-gen-upper " + gen_name(label.element);
    case RowKind::kGenUpper: return "gen-upper " + gen_name(label.element);
    case RowKind::kSlackGenLower: return "slack-gen-lower " + gen_name(label.element);
    case RowKind::kGenLower: return "gen-lower " + gen_name(label.element);
  }
  return "row";
}

int default_slack(const NetworkCase& net) {
  if (net.generators.empty()) throw ModelError("case has no in-service generators");
  int best = 0;
  for (size_t g = 1; g < net.generators.size(); ++g) {
    const Generator& a = net.generators[g];
    const Generator& b = net.generators[best];
    if (a.p_max - a.p_min > b.p_max - b.p_min) best = static_cast<int>(g);
  }
  return best;
}

FeasibilityMatrices build_feasibility(const NetworkCase& net, const PtdfSet& ptdf,
                                      int slack_gen) {
  const int nb = static_cast<int>(net.buses.size());
  const int ng = static_cast<int>(net.generators.size());
  if (slack_gen < 0 || slack_gen >= ng) throw ModelError("slack generator index out of range");
  if (ptdf.phi.cols() != nb || ptdf.phi.rows() != static_cast<int>(net.branches.size())) {
    throw ModelError("PTDF does not match the case dimensions");
  }

  FeasibilityMatrices mats;
  mats.slack_gen = slack_gen;
  mats.phi = ptdf.phi;
  mats.load.resize(nb);
  for (int i = 0; i < nb; ++i) mats.load(i) = net.buses[i].load;
  for (int i = 0; i < nb; ++i) {
    if (mats.load(i) != 0.0) mats.load_buses.push_back(i);
  }
  if (mats.load_buses.empty()) throw ModelError("case has no nonzero loads to perturb");
  for (int g = 0; g < ng; ++g) {
    if (g != slack_gen) mats.reduced_gens.push_back(g);
  }
  for (size_t l = 0; l < net.branches.size(); ++l) {
    if (std::isfinite(net.branches[l].flow_limit)) mats.bounded_lines.push_back(static_cast<int>(l));
  }
  const int k = ng - 1;
  const int nd = static_cast<int>(mats.load_buses.size());
  const int nf = static_cast<int>(mats.bounded_lines.size());

  mats.Ng = Eigen::MatrixXd::Zero(nb, ng);
  for (int g = 0; g < ng; ++g) mats.Ng(net.bus_index(net.generators[g].bus), g) = 1.0;
  mats.Nd = Eigen::MatrixXd::Zero(nb, nd);
  for (int j = 0; j < nd; ++j) mats.Nd(mats.load_buses[j], j) = 1.0;

  const Eigen::MatrixXd& phi = ptdf.phi;
  const Eigen::VectorXd phi_s = phi * mats.Ng.col(slack_gen);
  Eigen::MatrixXd phi_g(phi.rows(), k);
  for (int j = 0; j < k; ++j) phi_g.col(j) = phi * mats.Ng.col(mats.reduced_gens[j]);
  const double total_load = mats.load.sum();

  // Flow as a function of (p, delta) once the slack absorbs the imbalance.
  Eigen::MatrixXd flow_p = phi_g - phi_s * Eigen::RowVectorXd::Ones(k);
  Eigen::MatrixXd flow_d = -phi * mats.Nd + phi_s * Eigen::RowVectorXd::Ones(nd);
  Eigen::VectorXd flow_0 = -phi * mats.load + phi_s * total_load;

  const int m = 2 * nf + 2 * ng;
  mats.A = Eigen::MatrixXd::Zero(m, k);
  mats.B = Eigen::MatrixXd::Zero(m, nd);
  mats.c = Eigen::VectorXd::Zero(m);
  mats.row_labels.reserve(m);
  int r = 0;
  for (int sign : {1, -1}) {
    for (int l : mats.bounded_lines) {
      mats.A.row(r) = sign * flow_p.row(l);
      mats.B.row(r) = sign * flow_d.row(l);
      mats.c(r) = sign * flow_0(l) - net.branches[l].flow_limit;
      mats.row_labels.push_back({sign > 0 ? RowKind::kFlowUpper : RowKind::kFlowLower, l});
      ++r;
    }
  }
  const Generator& slack = net.generators[slack_gen];
  mats.A.row(r).setConstant(-1.0);
  mats.B.row(r).setConstant(1.0);
  mats.c(r) = total_load - slack.p_max;
  mats.row_labels.push_back({RowKind::kSlackGenUpper, slack_gen});
  ++r;
  for (int j = 0; j < k; ++j, ++r) {
    mats.A(r, j) = 1.0;
    mats.c(r) = -net.generators[mats.reduced_gens[j]].p_max;
    mats.row_labels.push_back({RowKind::kGenUpper, mats.reduced_gens[j]});
  }
  mats.A.row(r).setConstant(1.0);
  mats.B.row(r).setConstant(-1.0);
  mats.c(r) = slack.p_min - total_load;
  mats.row_labels.push_back({RowKind::kSlackGenLower, slack_gen});
  ++r;
  for (int j = 0; j < k; ++j, ++r) {
    mats.A(r, j) = -1.0;
    mats.c(r) = net.generators[mats.reduced_gens[j]].p_min;
    mats.row_labels.push_back({RowKind::kGenLower, mats.reduced_gens[j]});
  }
  mats.pinned.resize(k);
  for (int j = 0; j < k; ++j) {
    const Generator& g = net.generators[mats.reduced_gens[j]];
    mats.pinned[j] = g.p_max - g.p_min <= 1e-12;
  }
  return mats;
}

FeasibilityMatrices build_model(const NetworkCase& net, std::optional<int> slack_gen) {
  int slack = slack_gen ? *slack_gen : default_slack(net);
  if (slack < 0 || slack >= static_cast<int>(net.generators.size())) {
    throw ModelError("slack generator index out of range");
  }
  PtdfSet ptdf = build_ptdf(net, net.bus_index(net.generators[slack].bus));
  return build_feasibility(net, ptdf, slack);
}

Eigen::VectorXd full_dispatch(const FeasibilityMatrices& mats, const Eigen::VectorXd& p,
                              const Eigen::VectorXd& delta) {
  const int ng = mats.dim_p() + 1;
  Eigen::VectorXd full(ng);
  for (int j = 0; j < mats.dim_p(); ++j) full(mats.reduced_gens[j]) = p(j);
  full(mats.slack_gen) = mats.load.sum() + delta.sum() - p.sum();
  return full;
}

LpProblem feasibility_problem(const FeasibilityMatrices& mats, const Eigen::VectorXd& delta) {
  LpProblem prob;
  prob.objective = Eigen::VectorXd::Zero(mats.dim_p());
  prob.A_ub = mats.A;
  prob.b_ub = -(mats.B * delta + mats.c);
  return prob;
}

DispatchResult solve_dcopf(const NetworkCase& net, const FeasibilityMatrices& mats,
                           const Eigen::VectorXd& delta, const Tolerances& tol) {
  if (delta.size() != mats.dim_delta()) {
    throw PreconditionError("perturbation has " + std::to_string(delta.size()) +
                            " entries, expected " + std::to_string(mats.dim_delta()));
  }
  if (static_cast<int>(net.generators.size()) != mats.dim_p() + 1) {
    throw PreconditionError("matrices were not built from this case");
  }
  LpProblem prob = feasibility_problem(mats, delta);
  const double slack_cost = net.generators[mats.slack_gen].cost;
  for (int j = 0; j < mats.dim_p(); ++j) {
    prob.objective(j) = net.generators[mats.reduced_gens[j]].cost - slack_cost;
  }
  LpOptions options;
  options.primal_tol = tol.certificate;
  LpResult lp = lp_solve(prob, options);
  DispatchResult out;
  out.phase1_objective = lp.phase1_objective;
  if (lp.status == LpStatus::kInfeasible) {
    out.feasible = false;
    out.certificate = lp.farkas;
    return out;
  }
  if (lp.status == LpStatus::kUnbounded) {
    throw SolverError("DC-OPF reported unbounded; generator limits should bound every dispatch");
  }
  out.feasible = true;
  out.p = lp.x;
  out.p_full = full_dispatch(mats, lp.x, delta);
  out.cost = 0.0;
  for (size_t g = 0; g < net.generators.size(); ++g) {
    out.cost += net.generators[g].cost * out.p_full(g);
  }
  out.max_residual = (mats.A * out.p + mats.B * delta + mats.c).maxCoeff();
  if (out.max_residual > tol.feasibility) {
    throw SolverError("DC-OPF solution violates the polytope by " +
                      std::to_string(out.max_residual));
  }
  return out;
}

}  // namespace dcattack
