#include "dcattack/report.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "dcattack/errors.hpp"

namespace dcattack {
namespace {

using nlohmann::json;

json vec(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json mat(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) rows.push_back(vec(m.row(i).transpose()));
  return rows;
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

template <class T>
json optional_number(const std::optional<T>& x) {
  return x ? number_or_null(*x) : json(nullptr);
}

json bus_ids(const NetworkCase& net, const std::vector<int>& bus_indices) {
  json ids = json::array();
  for (int i : bus_indices) ids.push_back(net.buses[i].id);
  return ids;
}

json reduced_gen_ids(const FeasibilityMatrices& mats) {
  return json(mats.reduced_gens);
}

json delta_entries(const NetworkCase& net, const FeasibilityMatrices& mats,
                   const Eigen::VectorXd& delta) {
  const double total = mats.load.sum();
  json out = json::array();
  for (int j = 0; j < delta.size(); ++j) {
    const Bus& bus = net.buses[mats.load_buses[j]];
    out.push_back({{"bus", bus.id},
                   {"nominal_pu", bus.load},
                   {"delta_pu", delta(j)},
                   {"percent_of_total_load", total != 0.0 ? 100.0 * delta(j) / total : 0.0}});
  }
  return out;
}

json certification_json(const CertificationRecord& rec) {
  return {{"certified", rec.certified},
          {"scale", rec.scale},
          {"stationarity", rec.stationarity},
          {"min_y", rec.min_y},
          {"separation", rec.separation},
          {"phase1_objective", rec.phase1_objective}};
}

json restart_json(const RestartRecord& r) {
  json out = {{"origin", r.origin},
              {"index", r.index},
              {"produced", r.produced},
              {"certified", r.certified},
              {"iterations", r.iterations}};
  out["norm_sq"] = r.produced ? number_or_null(r.norm_sq) : json(nullptr);
  if (!r.note.empty()) out["note"] = r.note;
  return out;
}

std::string fmt(const std::optional<double>& x, int digits = 6) {
  if (!x || !std::isfinite(*x)) return "-";
  std::ostringstream os;
  os << std::setprecision(digits) << *x;
  return os.str();
}

}  // namespace

json to_json(const RunManifest& manifest) {
  return {{"command", manifest.command},
          {"cases", manifest.case_paths},
          {"config", manifest.config},
          {"tool_version", manifest.tool_version},
          {"outputs", manifest.outputs}};
}

json attack_json(const NetworkCase& net, const FeasibilityMatrices& mats,
                 const AttackSolution& attack, const std::vector<RestartRecord>& restarts) {
  json out;
  out["case"] = net.name;
  out["norm_sq"] = attack.norm_sq;
  out["norm"] = std::sqrt(attack.norm_sq);
  out["objective"] = attack.objective;
  out["eps"] = attack.eps_used;
  out["converged"] = attack.converged;
  out["certified"] = attack.certified;
  out["used_fallback"] = attack.used_fallback;
  out["iterations"] = attack.iterations;
  out["delta"] = delta_entries(net, mats, attack.delta);
  out["mu"] = vec(attack.mu);
  out["residuals"] = {{"dual_stationarity", attack.residuals.dual_stationarity},
                      {"epsilon_gap", attack.residuals.epsilon_gap},
                      {"min_mu", attack.residuals.min_mu}};
  out["certification"] = certification_json(attack.certification);
  json binding = json::array();
  for (int i = 0; i < attack.mu.size(); ++i) {
    if (attack.mu(i) > 1e-9 * attack.mu.cwiseAbs().maxCoeff()) {
      binding.push_back({{"row", i}, {"label", to_string(mats.row_labels[i], net)}, {"mu", attack.mu(i)}});
    }
  }
  out["support"] = binding;
  out["restarts"] = json::array();
  for (const RestartRecord& r : restarts) out["restarts"].push_back(restart_json(r));
  return out;
}

json defense_json(const NetworkCase& net, const FeasibilityMatrices& mats,
                  const DefensePolicy& policy) {
  json out;
  out["case"] = net.name;
  out["t"] = number_or_null(policy.t);
  out["radius"] = number_or_null(std::sqrt(policy.t));
  out["method"] = policy.method;
  out["stalled"] = policy.stalled;
  out["verified_samples"] = policy.verified_samples;
  out["binding_row"] = policy.binding_row;
  if (policy.binding_row >= 0) out["binding_label"] = to_string(mats.row_labels[policy.binding_row], net);
  out["slack_generator"] = mats.slack_gen;
  out["generators"] = reduced_gen_ids(mats);
  out["load_buses"] = bus_ids(net, mats.load_buses);
  out["p0"] = vec(policy.p0);
  out["G"] = mat(policy.G);
  return out;
}

json bounds_json(const NetworkCase& net, const FeasibilityMatrices& mats,
                 const BoundsReport& report) {
  json out;
  out["case"] = report.case_name;
  out["lb"] = optional_number(report.lb);
  out["ub"] = optional_number(report.ub);
  out["gap"] = report.lb && report.ub ? json(report.gap) : json(nullptr);
  out["matched"] = report.matched;
  out["match_time"] = optional_number(report.match_time);
  out["match_verified"] = report.match_verified;
  out["verified_samples"] = report.verified_samples;
  out["rounds"] = report.rounds;
  out["stop_reason"] = report.stop_reason;
  out["elapsed"] = report.elapsed;
  out["ub_missing"] = !report.ub.has_value();
  out["trace"] = json::array();
  for (const TracePoint& p : report.trace) {
    out["trace"].push_back({{"time", p.time}, {"side", p.side}, {"value", p.value}});
  }
  out["attack"] = report.attack ? attack_json(net, mats, *report.attack, report.restarts) : json(nullptr);
  out["defense"] = report.defense ? defense_json(net, mats, *report.defense) : json(nullptr);
  return out;
}

json matrices_json(const NetworkCase& net, const FeasibilityMatrices& mats) {
  json labels = json::array();
  for (const RowLabel& l : mats.row_labels) labels.push_back(to_string(l, net));
  return {{"case", net.name},
          {"A", mat(mats.A)},
          {"B", mat(mats.B)},
          {"c", vec(mats.c)},
          {"row_labels", labels},
          {"slack_generator", mats.slack_gen},
          {"generators", reduced_gen_ids(mats)},
          {"load_buses", bus_ids(net, mats.load_buses)}};
}

json error_json(const std::string& kind, const std::string& message) {
  return {{"schema", "dcattack.error/1"}, {"error", {{"kind", kind}, {"message", message}}}};
}

json document(const std::string& schema, json payload, const RunManifest& manifest) {
  json out;
  out["schema"] = schema;
  out["manifest"] = to_json(manifest);
  for (auto it = payload.begin(); it != payload.end(); ++it) out[it.key()] = it.value();
  return out;
}

void write_delta_csv(std::ostream& out, const NetworkCase& net, const FeasibilityMatrices& mats,
                     const Eigen::VectorXd& delta) {
  const double total = mats.load.sum();
  out << "bus_id,delta_pu,delta_mw,percent_of_total_load\n" << std::setprecision(12);
  for (int j = 0; j < delta.size(); ++j) {
    out << net.buses[mats.load_buses[j]].id << ',' << delta(j) << ',' << delta(j) * net.base_mva
        << ',' << (total != 0.0 ? 100.0 * delta(j) / total : 0.0) << '\n';
  }
}

void write_trace_csv(std::ostream& out, const std::vector<TracePoint>& trace) {
  out << "time_s,side,value\n" << std::setprecision(12);
  for (const TracePoint& p : trace) out << p.time << ',' << p.side << ',' << p.value << '\n';
}

TableFormat parse_table_format(const std::string& text) {
  if (text == "csv") return TableFormat::kCsv;
  if (text == "md" || text == "markdown") return TableFormat::kMarkdown;
  throw PreconditionError("unknown table format '" + text + "' (expected csv or md)");
}

void render_table(std::ostream& out, const std::vector<TableRow>& rows, TableFormat format) {
  const std::vector<std::string> head = {"case", "defense_lb", "attack_ub", "gap",
                                         "matched", "match_s", "elapsed_s"};
  auto cells = [](const TableRow& r) {
    std::vector<std::string> c = {r.case_name, fmt(r.lb), fmt(r.ub),
                                  r.lb && r.ub ? fmt(r.gap, 3) : "-", r.matched ? "yes" : "no",
                                  fmt(r.match_time, 3), fmt(r.elapsed, 3)};
    return c;
  };
  auto line = [&](const std::vector<std::string>& c, const char* sep, const char* lead,
                  const char* tail) {
    out << lead;
    for (size_t i = 0; i < c.size(); ++i) out << (i ? sep : "") << c[i];
    out << tail << '\n';
  };
  if (format == TableFormat::kCsv) {
    line(head, ",", "", "");
    for (const TableRow& r : rows) line(cells(r), ",", "", "");
    return;
  }
  line(head, " | ", "| ", " |");
  line(std::vector<std::string>(head.size(), "---"), " | ", "| ", " |");
  for (const TableRow& r : rows) line(cells(r), " | ", "| ", " |");
}

}  // namespace dcattack
