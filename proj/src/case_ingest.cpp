#include "dcattack/case_ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>

#include "dcattack/errors.hpp"

namespace dcattack {
namespace {

struct TableRow {
  int line = 0;
  std::vector<double> values;
};

struct RawTables {
  std::optional<double> base_mva;
  std::map<std::string, std::vector<TableRow>> tables;
};

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string strip_comment(const std::string& line) {
  size_t pos = line.find('%');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

double parse_number(const std::string& token, int line) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0' || errno == ERANGE || std::isnan(v)) {
    throw ParseError("malformed number '" + token + "'", line);
  }
  return v;
}

// Appends the rows found in `body` (the part of a line inside a table).
void append_rows(const std::string& body, int line, std::vector<TableRow>& rows,
                 TableRow& pending) {
  std::string token;
  auto flush_token = [&]() {
    if (!token.empty()) {
      pending.values.push_back(parse_number(token, line));
      if (pending.line == 0) pending.line = line;
      token.clear();
    }
  };
  for (char ch : body) {
    if (ch == ';') {
      flush_token();
      if (!pending.values.empty()) rows.push_back(pending);
      pending = TableRow{};
    } else if (std::isspace(static_cast<unsigned char>(ch)) || ch == ',') {
      flush_token();
    } else {
      token.push_back(ch);
    }
  }
  flush_token();
}

RawTables read_tables(std::istream& source) {
  RawTables raw;
  std::string line;
  int line_no = 0;
  std::string open_table;
  std::vector<TableRow>* rows = nullptr;
  TableRow pending;
  int open_line = 0;
  while (std::getline(source, line)) {
    ++line_no;
    std::string text = strip_comment(line);
    if (rows != nullptr) {
      size_t close = text.find(']');
      std::string body = close == std::string::npos ? text : text.substr(0, close);
      append_rows(body, line_no, *rows, pending);
      if (close != std::string::npos) {
        if (!pending.values.empty()) rows->push_back(pending);
        pending = TableRow{};
        rows = nullptr;
      } else {
        // A line break ends a row even without a trailing semicolon.
        if (!pending.values.empty()) rows->push_back(pending);
        pending = TableRow{};
      }
      continue;
    }
    std::string t = trim(text);
    if (t.rfind("mpc.", 0) != 0) continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos) continue;
    std::string name = trim(t.substr(4, eq - 4));
    std::string rhs = trim(t.substr(eq + 1));
    if (!rhs.empty() && rhs[0] == '[') {
      open_table = name;
      open_line = line_no;
      rows = &raw.tables[name];
      std::string body = rhs.substr(1);
      size_t close = body.find(']');
      append_rows(close == std::string::npos ? body : body.substr(0, close), line_no,
                  *rows, pending);
      if (!pending.values.empty()) rows->push_back(pending);
      pending = TableRow{};
      if (close != std::string::npos) rows = nullptr;
    } else if (name == "baseMVA") {
      std::string value = rhs;
      if (!value.empty() && value.back() == ';') value.pop_back();
      raw.base_mva = parse_number(trim(value), line_no);
    }
  }
  if (rows != nullptr) {
    throw ParseError("table '" + open_table + "' is not closed", open_line);
  }
  return raw;
}

const std::vector<TableRow>& require_table(const RawTables& raw, const std::string& name,
                                           size_t min_columns) {
  auto it = raw.tables.find(name);
  if (it == raw.tables.end()) throw ParseError("missing table 'mpc." + name + "'");
  for (const TableRow& row : it->second) {
    if (row.values.size() < min_columns) {
      throw ParseError("table '" + name + "' row has " + std::to_string(row.values.size()) +
                           " columns, expected at least " + std::to_string(min_columns),
                       row.line);
    }
  }
  return it->second;
}

int as_int(double v, int line, const std::string& what) {
  if (v != std::floor(v) || std::abs(v) > 1e9) {
    throw ParseError(what + " must be an integer", line);
  }
  return static_cast<int>(v);
}

double linear_cost(const TableRow& row, double base_mva) {
  int model = static_cast<int>(row.values[0]);
  int n = static_cast<int>(row.values[3]);
  if (n < 1 || row.values.size() < static_cast<size_t>(4 + (model == 1 ? 2 * n : n))) {
    throw ParseError("gencost row has an inconsistent coefficient count", row.line);
  }
  if (model == 2) {
    // Coefficients run from the highest power down to the constant term.
    return n >= 2 ? row.values[4 + n - 2] * base_mva : 0.0;
  }
  if (model == 1) {
    if (n < 2) return 0.0;
    double x0 = row.values[4], y0 = row.values[5];
    double x1 = row.values[4 + 2 * (n - 1)], y1 = row.values[5 + 2 * (n - 1)];
    return x1 > x0 ? (y1 - y0) / (x1 - x0) * base_mva : 0.0;
  }
  throw ParseError("unknown gencost model " + std::to_string(model), row.line);
}

}  // namespace

int NetworkCase::bus_index(int id) const {
  for (size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id == id) return static_cast<int>(i);
  }
  throw ValidationError("unknown bus id " + std::to_string(id));
}

double NetworkCase::total_load() const {
  double total = 0.0;
  for (const Bus& b : buses) total += b.load;
  return total;
}

RatingColumn parse_rating_column(const std::string& text) {
  if (text == "A" || text == "a") return RatingColumn::kA;
  if (text == "B" || text == "b") return RatingColumn::kB;
  if (text == "C" || text == "c") return RatingColumn::kC;
  throw ValidationError("rating column must be A, B or C, got '" + text + "'");
}

SusceptanceModel parse_susceptance_model(const std::string& text) {
  if (text == "series") return SusceptanceModel::kSeries;
  if (text == "reactance") return SusceptanceModel::kReactance;
  throw ValidationError("susceptance model must be 'series' or 'reactance', got '" + text +
                        "'");
}

std::string to_string(RatingColumn rating) {
  switch (rating) {
    case RatingColumn::kA: return "A";
    case RatingColumn::kB: return "B";
    case RatingColumn::kC: return "C";
  }
  return "A";
}

std::string to_string(SusceptanceModel model) {
  return model == SusceptanceModel::kSeries ? "series" : "reactance";
}

NetworkCase parse_case(std::istream& source, const std::string& name,
                       const ParseOptions& options) {
  RawTables raw = read_tables(source);
  if (!raw.base_mva) throw ParseError("missing 'mpc.baseMVA'");
  const auto& bus_rows = require_table(raw, "bus", 3);
  const auto& gen_rows = require_table(raw, "gen", 10);
  const auto& branch_rows = require_table(raw, "branch", 11);

  NetworkCase net;
  net.name = name;
  net.base_mva = *raw.base_mva;
  if (!(net.base_mva > 0.0)) throw ValidationError("baseMVA must be positive");
  const double base = net.base_mva;

  std::set<int> isolated;
  std::set<int> seen;
  for (const TableRow& row : bus_rows) {
    int id = as_int(row.values[0], row.line, "bus id");
    if (!seen.insert(id).second) {
      throw ValidationError("duplicate bus id " + std::to_string(id));
    }
    if (static_cast<int>(row.values[1]) == 4) {
      isolated.insert(id);
      continue;
    }
    net.buses.push_back({id, row.values[2] / base});
  }

  const auto* cost_rows = raw.tables.count("gencost") ? &raw.tables.at("gencost") : nullptr;
  if (cost_rows) {
    for (const TableRow& row : *cost_rows) {
      if (row.values.size() < 4) throw ParseError("gencost row too short", row.line);
    }
  }
  for (size_t g = 0; g < gen_rows.size(); ++g) {
    const TableRow& row = gen_rows[g];
    int bus = as_int(row.values[0], row.line, "generator bus");
    if (row.values[7] <= 0.0 || isolated.count(bus)) continue;
    Generator gen;
    gen.bus = bus;
    gen.p_max = row.values[8] / base;
    gen.p_min = row.values[9] / base;
    if (cost_rows && g < cost_rows->size()) gen.cost = linear_cost((*cost_rows)[g], base);
    net.generators.push_back(gen);
  }

  const size_t rate_col = options.rating == RatingColumn::kA   ? 5
                          : options.rating == RatingColumn::kB ? 6
                                                               : 7;
  for (const TableRow& row : branch_rows) {
    if (row.values[10] <= 0.0) continue;
    int f = as_int(row.values[0], row.line, "branch from-bus");
    int t = as_int(row.values[1], row.line, "branch to-bus");
    if (isolated.count(f) || isolated.count(t)) continue;
    double r = row.values[2], x = row.values[3];
    double b = options.susceptance == SusceptanceModel::kReactance ? 1.0 / x
                                                                   : x / (r * r + x * x);
    if (!std::isfinite(b) || b == 0.0) {
      throw ValidationError("branch " + std::to_string(f) + "-" + std::to_string(t) +
                            " has zero or undefined susceptance (line " +
                            std::to_string(row.line) + ")");
    }
    double rate = row.values[rate_col];
    Branch br;
    br.from_bus = f;
    br.to_bus = t;
    br.susceptance = b;
    br.flow_limit = rate > 0.0 ? rate / base : kUnbounded;
    net.branches.push_back(br);
  }

  validate(net);
  return net;
}

NetworkCase load_case(const std::string& path, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open case file '" + path + "'");
  std::string name = path;
  size_t slash = name.find_last_of("/\\");
  if (slash != std::string::npos) name = name.substr(slash + 1);
  size_t dot = name.rfind('.');
  if (dot != std::string::npos) name = name.substr(0, dot);
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid case JSON: ") + e.what());
    }
    return case_from_json(doc);
  }
  return parse_case(in, name, options);
}

void validate(const NetworkCase& net) {
  if (!(net.base_mva > 0.0)) throw ValidationError("baseMVA must be positive");
  if (net.buses.empty()) throw ValidationError("case has no buses");
  std::map<int, int> index;
  for (size_t i = 0; i < net.buses.size(); ++i) {
    if (!index.emplace(net.buses[i].id, static_cast<int>(i)).second) {
      throw ValidationError("duplicate bus id " + std::to_string(net.buses[i].id));
    }
  }
  std::vector<std::vector<int>> adjacency(net.buses.size());
  for (const Branch& br : net.branches) {
    auto f = index.find(br.from_bus), t = index.find(br.to_bus);
    if (f == index.end() || t == index.end()) {
      throw ValidationError("branch " + std::to_string(br.from_bus) + "-" +
                            std::to_string(br.to_bus) + " references an unknown bus");
    }
    if (!std::isfinite(br.susceptance) || br.susceptance == 0.0) {
      throw ValidationError("branch " + std::to_string(br.from_bus) + "-" +
                            std::to_string(br.to_bus) + " has zero susceptance");
    }
    adjacency[f->second].push_back(t->second);
    adjacency[t->second].push_back(f->second);
  }
  for (const Generator& g : net.generators) {
    if (!index.count(g.bus)) {
      throw ValidationError("generator references unknown bus " + std::to_string(g.bus));
    }
    if (g.p_min > g.p_max) {
      throw ValidationError("generator at bus " + std::to_string(g.bus) +
                            " has p_min > p_max");
    }
  }
  std::vector<bool> reached(net.buses.size(), false);
  std::queue<int> frontier;
  frontier.push(0);
  reached[0] = true;
  size_t count = 1;
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop();
    for (int v : adjacency[u]) {
      if (!reached[v]) {
        reached[v] = true;
        ++count;
        frontier.push(v);
      }
    }
  }
  if (count != net.buses.size()) {
    for (size_t i = 0; i < reached.size(); ++i) {
      if (!reached[i]) {
        throw ValidationError("branch graph is disconnected (bus " +
                              std::to_string(net.buses[i].id) + " unreachable)");
      }
    }
  }
}

nlohmann::json to_json(const NetworkCase& net) {
  nlohmann::json doc;
  doc["schema"] = "dcattack.case/1";
  doc["name"] = net.name;
  doc["base_mva"] = net.base_mva;
  doc["buses"] = nlohmann::json::array();
  for (const Bus& b : net.buses) doc["buses"].push_back({{"id", b.id}, {"load", b.load}});
  doc["branches"] = nlohmann::json::array();
  for (const Branch& br : net.branches) {
    nlohmann::json limit = std::isfinite(br.flow_limit) ? nlohmann::json(br.flow_limit)
                                                        : nlohmann::json(nullptr);
    doc["branches"].push_back({{"from", br.from_bus},
                               {"to", br.to_bus},
                               {"susceptance", br.susceptance},
                               {"flow_limit", limit}});
  }
  doc["generators"] = nlohmann::json::array();
  for (const Generator& g : net.generators) {
    doc["generators"].push_back(
        {{"bus", g.bus}, {"p_min", g.p_min}, {"p_max", g.p_max}, {"cost", g.cost}});
  }
  return doc;
}

NetworkCase case_from_json(const nlohmann::json& doc) {
  NetworkCase net;
  try {
    if (doc.value("schema", std::string()) != "dcattack.case/1") {
      throw ParseError("case JSON schema must be 'dcattack.case/1'");
    }
    net.name = doc.at("name").get<std::string>();
    net.base_mva = doc.at("base_mva").get<double>();
    for (const auto& b : doc.at("buses")) {
      net.buses.push_back({b.at("id").get<int>(), b.at("load").get<double>()});
    }
    for (const auto& br : doc.at("branches")) {
      Branch branch;
      branch.from_bus = br.at("from").get<int>();
      branch.to_bus = br.at("to").get<int>();
      branch.susceptance = br.at("susceptance").get<double>();
      branch.flow_limit =
          br.at("flow_limit").is_null() ? kUnbounded : br.at("flow_limit").get<double>();
      net.branches.push_back(branch);
    }
    for (const auto& g : doc.at("generators")) {
      net.generators.push_back({g.at("bus").get<int>(), g.at("p_min").get<double>(),
                                g.at("p_max").get<double>(), g.at("cost").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid case JSON: ") + e.what());
  }
  validate(net);
  return net;
}

}  // namespace dcattack
