// Command-line front end: attack, defend, squeeze, table and case-json.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dcattack/attack.hpp"
#include "dcattack/case_ingest.hpp"
#include "dcattack/dc_model.hpp"
#include "dcattack/defense.hpp"
#include "dcattack/errors.hpp"
#include "dcattack/report.hpp"
#include "dcattack/squeeze.hpp"
#include "json.hpp"

namespace {

using namespace dcattack;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInput = 2;
constexpr int kExitUncertified = 3;

struct Common {
  std::vector<std::string> cases;
  std::string rating = "A";
  std::string susceptance = "series";
  double eps = 1e-3;
  int restarts = 5;
  std::string seed_text;
  int threads = 0;
  double budget = 600.0;
  double round_budget = 5.0;
  double match_threshold = 0.01;
  double tol_feas = 1e-8;
  std::string json_path;
  std::string trace_path;
  std::string csv_path;
  std::string matrices_path;
  std::string policy = "optimized";
  std::string method = "barrier";
  int verify_samples = 1000;
  std::string format = "md";

  uint64_t seed = 0;
  bool seed_generated = false;
};

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("DCATTACK_NUM_THREADS")) {
    try {
      int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
    throw PreconditionError(std::string("DCATTACK_NUM_THREADS must be a positive integer, got '") +
                            env + "'");
  }
  return 1;
}

void resolve_seed(Common& opt) {
  if (!opt.seed_text.empty()) {
    try {
      size_t used = 0;
      opt.seed = std::stoull(opt.seed_text, &used);
      if (used != opt.seed_text.size()) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw PreconditionError("--seed must be a non-negative integer, got '" + opt.seed_text + "'");
    }
    return;
  }
  opt.seed = std::random_device{}();
  opt.seed = (opt.seed << 32) ^ static_cast<uint64_t>(
                                    std::chrono::steady_clock::now().time_since_epoch().count());
  opt.seed_generated = true;
}

Tolerances tolerances(const Common& opt) {
  Tolerances tol;
  tol.feasibility = opt.tol_feas;
  return tol;
}

ParseOptions parse_options(const Common& opt) {
  ParseOptions po;
  po.rating = parse_rating_column(opt.rating);
  po.susceptance = parse_susceptance_model(opt.susceptance);
  return po;
}

RunManifest manifest(const std::string& command, const Common& opt) {
  RunManifest m;
  m.command = command;
  m.case_paths = opt.cases;
  m.config = {{"eps", opt.eps},
              {"restarts", opt.restarts},
              {"seed", opt.seed},
              {"seed_generated", opt.seed_generated},
              {"threads", resolve_threads(opt.threads)},
              {"budget", opt.budget},
              {"round_budget", opt.round_budget},
              {"match_threshold", opt.match_threshold},
              {"tol_feas", opt.tol_feas},
              {"rating", opt.rating},
              {"susceptance", opt.susceptance},
              {"policy", opt.policy},
              {"method", opt.method},
              {"verify_samples", opt.verify_samples}};
  if (!opt.json_path.empty()) m.outputs["json"] = opt.json_path;
  if (!opt.trace_path.empty()) m.outputs["trace"] = opt.trace_path;
  if (!opt.csv_path.empty()) m.outputs["csv"] = opt.csv_path;
  if (!opt.matrices_path.empty()) m.outputs["matrices"] = opt.matrices_path;
  return m;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write '" + path + "'");
  return out;
}

void emit(const json& doc, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << doc.dump(2) << '\n';
    return;
  }
  open_output(path) << doc.dump(2) << '\n';
}

void dump_matrices(const Common& opt, const NetworkCase& net, const FeasibilityMatrices& mats) {
  if (opt.matrices_path.empty()) return;
  open_output(opt.matrices_path) << matrices_json(net, mats).dump(2) << '\n';
}

AttackConfig attack_config(const Common& opt) {
  AttackConfig cfg;
  cfg.eps = opt.eps;
  cfg.restarts = opt.restarts;
  cfg.seed = opt.seed;
  cfg.threads = resolve_threads(opt.threads);
  cfg.tol = tolerances(opt);
  return cfg;
}

SqueezeConfig squeeze_config(const Common& opt) {
  SqueezeConfig cfg;
  cfg.budget = opt.budget;
  cfg.round_budget = opt.round_budget;
  cfg.match_threshold = opt.match_threshold;
  cfg.seed = opt.seed;
  cfg.threads = resolve_threads(opt.threads);
  cfg.verify_samples = opt.verify_samples;
  cfg.attack = attack_config(opt);
  cfg.defense.method = parse_defense_method(opt.method);
  cfg.tol = tolerances(opt);
  return cfg;
}

int cmd_attack(const Common& opt) {
  NetworkCase net = load_case(opt.cases.at(0), parse_options(opt));
  FeasibilityMatrices mats = build_model(net);
  dump_matrices(opt, net, mats);
  MultistartResult res = multistart_attack(mats, attack_config(opt));
  json payload = attack_json(net, mats, res.best, res.restarts);
  payload["fixed_dispatch_lb"] = res.fixed_dispatch_lb;
  emit(document("dcattack.attack/1", payload, manifest("attack", opt)), opt.json_path);
  if (!opt.csv_path.empty()) {
    std::ofstream out = open_output(opt.csv_path);
    write_delta_csv(out, net, mats, res.best.delta);
  }
  return res.best.certified ? kExitOk : kExitUncertified;
}

int cmd_defend(const Common& opt) {
  NetworkCase net = load_case(opt.cases.at(0), parse_options(opt));
  FeasibilityMatrices mats = build_model(net);
  dump_matrices(opt, net, mats);
  const Tolerances tol = tolerances(opt);
  DefensePolicy policy;
  if (opt.policy == "optimized") {
    DefenseOptions dopt;
    dopt.method = parse_defense_method(opt.method);
    dopt.time_limit = opt.budget;
    dopt.tol = tol;
    policy = defense_local(mats, warm_start_defense(mats, tol), dopt);
  } else if (opt.policy == "rank1-uniform" || opt.policy == "rank1-proportional") {
    DispatchResult nominal = solve_dcopf(net, mats, Eigen::VectorXd::Zero(mats.dim_delta()), tol);
    if (!nominal.feasible) throw ModelError("nominal DC-OPF is infeasible");
    policy = rank1_policy(mats,
                          opt.policy == "rank1-uniform" ? Rank1Kind::kUniform
                                                        : Rank1Kind::kProportional,
                          nominal.p, tol);
  } else if (opt.policy == "simplex") {
    policy = policy_from_simplex(mats, heuristic_simplex(net, mats, 1.0, 40, tol), tol);
  } else {
    throw PreconditionError("unknown policy '" + opt.policy +
                            "' (expected optimized, rank1-uniform, rank1-proportional or simplex)");
  }
  if (std::isfinite(policy.t) && opt.verify_samples > 0) {
    policy.verified_samples = verify_policy(mats, policy, opt.verify_samples, opt.seed, tol);
  }
  emit(document("dcattack.defense/1", defense_json(net, mats, policy), manifest("defend", opt)),
       opt.json_path);
  return policy.verified_samples == opt.verify_samples ? kExitOk : kExitUncertified;
}

bool squeeze_certified(const BoundsReport& r, int samples) {
  if (!r.ub || !r.attack || !r.attack->certified) return false;
  if (r.defense && std::isfinite(r.defense->t) && r.verified_samples != samples) return false;
  return !r.matched || r.match_verified;
}

int cmd_squeeze(const Common& opt) {
  NetworkCase net = load_case(opt.cases.at(0), parse_options(opt));
  FeasibilityMatrices mats = build_model(net);
  dump_matrices(opt, net, mats);
  BoundsReport report = squeeze_run(net, mats, squeeze_config(opt));
  emit(document("dcattack.bounds/1", bounds_json(net, mats, report), manifest("squeeze", opt)),
       opt.json_path);
  if (!opt.trace_path.empty()) {
    std::ofstream out = open_output(opt.trace_path);
    write_trace_csv(out, report.trace);
  }
  if (!opt.csv_path.empty() && report.attack) {
    std::ofstream out = open_output(opt.csv_path);
    write_delta_csv(out, net, mats, report.attack->delta);
  }
  return squeeze_certified(report, opt.verify_samples) ? kExitOk : kExitUncertified;
}

int cmd_table(const Common& opt) {
  const TableFormat format = parse_table_format(opt.format);
  std::vector<TableRow> rows;
  json reports = json::array();
  bool all_certified = true;
  const SqueezeConfig cfg = squeeze_config(opt);
  for (const std::string& path : opt.cases) {
    NetworkCase net = load_case(path, parse_options(opt));
    FeasibilityMatrices mats = build_model(net);
    BoundsReport r = squeeze_run(net, mats, cfg);
    all_certified = all_certified && squeeze_certified(r, opt.verify_samples);
    rows.push_back({r.case_name, r.lb, r.ub, r.gap, r.matched, r.match_time, r.elapsed});
    reports.push_back(bounds_json(net, mats, r));
  }
  render_table(std::cout, rows, format);
  if (!opt.json_path.empty()) {
    emit(document("dcattack.table/1", {{"reports", reports}}, manifest("table", opt)),
         opt.json_path);
  }
  return all_certified ? kExitOk : kExitUncertified;
}

int cmd_case_json(const Common& opt) {
  NetworkCase net = load_case(opt.cases.at(0), parse_options(opt));
  emit(to_json(net), opt.json_path);
  return kExitOk;
}

int exit_code_for(const std::string& kind) {
  if (kind == "parse" || kind == "validation" || kind == "precondition" || kind == "io") {
    return kExitInput;
  }
  if (kind == "invariant") return kExitUncertified;
  return kExitFailure;
}

// The error document goes to stderr and, when requested, to the report path.
void report_error(const json& doc, const std::string& path) {
  std::cerr << doc.dump() << '\n';
  if (path.empty() || path == "-") return;
  std::ofstream out(path);
  if (out) out << doc.dump(2) << '\n';
}

void add_case_options(CLI::App* sub, Common& opt) {
  sub->add_option("--rating", opt.rating, "Branch rating column: A, B or C")->capture_default_str();
  sub->add_option("--susceptance", opt.susceptance, "Branch susceptance: series or reactance")
      ->capture_default_str();
  sub->add_option("--tol-feas", opt.tol_feas, "Feasibility tolerance (p.u.)")->capture_default_str();
  sub->add_option("--seed", opt.seed_text, "Random seed; generated and recorded when absent");
  sub->add_option("--threads", opt.threads, "Worker threads (falls back to DCATTACK_NUM_THREADS)");
  sub->add_option("--json", opt.json_path, "JSON report path (stdout when absent)");
  sub->add_option("--dump-matrices", opt.matrices_path, "Write A, B, c and row labels as JSON");
}

void add_attack_options(CLI::App* sub, Common& opt) {
  sub->add_option("--eps", opt.eps, "Certificate margin epsilon")->capture_default_str();
  sub->add_option("--restarts", opt.restarts, "Random restarts (per round in squeeze)")
      ->capture_default_str();
}

void add_squeeze_options(CLI::App* sub, Common& opt) {
  add_attack_options(sub, opt);
  sub->add_option("--budget", opt.budget, "Total wall-clock budget in seconds")->capture_default_str();
  sub->add_option("--round-budget", opt.round_budget, "Seconds per side per round")
      ->capture_default_str();
  sub->add_option("--match-threshold", opt.match_threshold, "Relative gap counted as a match")
      ->capture_default_str();
  sub->add_option("--method", opt.method, "Defense ascent: barrier or softmin")->capture_default_str();
  sub->add_option("--verify-samples", opt.verify_samples, "Ball samples for policy verification")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimum load perturbations and affine dispatch defenses for DC power flow"};
  app.set_version_flag("--version", std::string(DCATTACK_VERSION));
  app.require_subcommand(1);
  Common opt;

  CLI::App* attack = app.add_subcommand("attack", "Search for the smallest infeasible load perturbation");
  attack->add_option("case", opt.cases, "MATPOWER .m or case .json file")->required()->expected(1);
  add_case_options(attack, opt);
  add_attack_options(attack, opt);
  attack->add_option("--csv", opt.csv_path, "Per-bus perturbation CSV");

  CLI::App* defend = app.add_subcommand("defend", "Fit an affine dispatch policy and its radius");
  defend->add_option("case", opt.cases, "MATPOWER .m or case .json file")->required()->expected(1);
  add_case_options(defend, opt);
  defend->add_option("--policy", opt.policy,
                     "optimized, rank1-uniform, rank1-proportional or simplex")
      ->capture_default_str();
  defend->add_option("--method", opt.method, "Ascent for the optimized policy: barrier or softmin")
      ->capture_default_str();
  defend->add_option("--budget", opt.budget, "Time limit in seconds")->capture_default_str();
  defend->add_option("--verify-samples", opt.verify_samples, "Ball samples for verification")
      ->capture_default_str();

  CLI::App* squeeze = app.add_subcommand("squeeze", "Alternate attack and defense until the bounds meet");
  squeeze->add_option("case", opt.cases, "MATPOWER .m or case .json file")->required()->expected(1);
  add_case_options(squeeze, opt);
  add_squeeze_options(squeeze, opt);
  squeeze->add_option("--trace", opt.trace_path, "Bound-versus-time CSV");
  squeeze->add_option("--csv", opt.csv_path, "Per-bus perturbation CSV of the best attack");

  CLI::App* table = app.add_subcommand("table", "Squeeze several cases and print a summary table");
  table->add_option("cases", opt.cases, "Case files")->required();
  add_case_options(table, opt);
  add_squeeze_options(table, opt);
  table->add_option("--format", opt.format, "csv or md")->capture_default_str();

  CLI::App* case_json = app.add_subcommand("case-json", "Convert a case to the JSON case schema");
  case_json->add_option("case", opt.cases, "MATPOWER .m file")->required()->expected(1);
  case_json->add_option("--rating", opt.rating, "Branch rating column: A, B or C");
  case_json->add_option("--susceptance", opt.susceptance, "Branch susceptance: series or reactance");
  case_json->add_option("--json", opt.json_path, "Output path (stdout when absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    resolve_seed(opt);
    if (attack->parsed()) return cmd_attack(opt);
    if (defend->parsed()) return cmd_defend(opt);
    if (squeeze->parsed()) return cmd_squeeze(opt);
    if (table->parsed()) return cmd_table(opt);
    return cmd_case_json(opt);
  } catch (const Error& e) {
    report_error(error_json(e.kind(), e.what()), opt.json_path);
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    report_error(error_json("internal", e.what()), opt.json_path);
    return kExitFailure;
  }
}
