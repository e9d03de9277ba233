#pragma once

#include <istream>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

namespace dcattack {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

struct Bus {
  int id = 0;
  double load = 0.0;  // p.u.
  bool operator==(const Bus&) const = default;
};

struct Branch {
  int from_bus = 0;
  int to_bus = 0;
  double susceptance = 0.0;       // p.u.
  double flow_limit = kUnbounded;  // p.u.
  bool operator==(const Branch&) const = default;
};

struct Generator {
  int bus = 0;
  double p_min = 0.0;  // p.u.
  double p_max = 0.0;  // p.u.
  double cost = 0.0;   // linear cost per p.u.
  bool operator==(const Generator&) const = default;
};

struct NetworkCase {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;

  // Position of a bus id in `buses`; throws ValidationError when absent.
  int bus_index(int id) const;
  double total_load() const;
  bool operator==(const NetworkCase&) const = default;
};

enum class RatingColumn { kA, kB, kC };

// How the DC susceptance of a branch is derived from its series impedance.
enum class SusceptanceModel {
  kSeries,       // x / (r^2 + x^2), imaginary part of the series admittance
  kReactance,    // 1 / x
};

struct ParseOptions {
  RatingColumn rating = RatingColumn::kA;
  SusceptanceModel susceptance = SusceptanceModel::kSeries;
};

RatingColumn parse_rating_column(const std::string& text);
SusceptanceModel parse_susceptance_model(const std::string& text);
std::string to_string(RatingColumn rating);
std::string to_string(SusceptanceModel model);

// Reads the MATPOWER subset: baseMVA, bus, gen, branch and optional gencost.
NetworkCase parse_case(std::istream& source, const std::string& name = "case",
                       const ParseOptions& options = {});
NetworkCase load_case(const std::string& path, const ParseOptions& options = {});

// Throws ValidationError on duplicate ids, dangling endpoints, inverted
// generator limits or a disconnected branch graph.
void validate(const NetworkCase& net);

nlohmann::json to_json(const NetworkCase& net);
NetworkCase case_from_json(const nlohmann::json& doc);

}  // namespace dcattack
