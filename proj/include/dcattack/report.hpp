#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dcattack/attack.hpp"
#include "dcattack/case_ingest.hpp"
#include "dcattack/defense.hpp"
#include "dcattack/squeeze.hpp"
#include "json.hpp"

namespace dcattack {

struct RunManifest {
  std::string command;
  std::vector<std::string> case_paths;
  nlohmann::json config = nlohmann::json::object();
  std::string tool_version = DCATTACK_VERSION;
  std::map<std::string, std::string> outputs;
};

nlohmann::json to_json(const RunManifest& manifest);

nlohmann::json attack_json(const NetworkCase& net, const FeasibilityMatrices& mats,
                           const AttackSolution& attack,
                           const std::vector<RestartRecord>& restarts);
nlohmann::json defense_json(const NetworkCase& net, const FeasibilityMatrices& mats,
                            const DefensePolicy& policy);
nlohmann::json bounds_json(const NetworkCase& net, const FeasibilityMatrices& mats,
                           const BoundsReport& report);
nlohmann::json matrices_json(const NetworkCase& net, const FeasibilityMatrices& mats);
nlohmann::json error_json(const std::string& kind, const std::string& message);

// Wraps a payload with its schema tag and manifest.
nlohmann::json document(const std::string& schema, nlohmann::json payload,
                        const RunManifest& manifest);

// bus_id,delta_pu,delta_mw,percent_of_total_load
void write_delta_csv(std::ostream& out, const NetworkCase& net, const FeasibilityMatrices& mats,
                     const Eigen::VectorXd& delta);
// time_s,side,value
void write_trace_csv(std::ostream& out, const std::vector<TracePoint>& trace);

struct TableRow {
  std::string case_name;
  std::optional<double> lb;
  std::optional<double> ub;
  double gap = 1.0;
  bool matched = false;
  std::optional<double> match_time;
  double elapsed = 0.0;
};

enum class TableFormat { kCsv, kMarkdown };
TableFormat parse_table_format(const std::string& text);
void render_table(std::ostream& out, const std::vector<TableRow>& rows, TableFormat format);

}  // namespace dcattack
