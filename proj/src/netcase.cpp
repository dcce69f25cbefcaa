#include "windcascade/netcase.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

namespace windcascade {

namespace detail {
std::string_view ieee30_case_text();
}

using json = nlohmann::json;

std::optional<std::size_t> NetworkCase::find_bus(int id) const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == id) return i;
  return std::nullopt;
}

std::size_t NetworkCase::bus_index(int id) const {
  if (auto i = find_bus(id)) return *i;
  throw ValidationError("unknown bus id " + std::to_string(id));
}

std::size_t NetworkCase::branch_index(int id) const {
  for (std::size_t i = 0; i < branches.size(); ++i)
    if (branches[i].id == id) return i;
  throw ValidationError("unknown branch id " + std::to_string(id));
}

Eigen::VectorXd NetworkCase::demand() const {
  Eigen::VectorXd d(buses.size());
  for (std::size_t i = 0; i < buses.size(); ++i) d[i] = buses[i].base_demand;
  return d;
}

Eigen::VectorXd NetworkCase::priorities() const {
  Eigen::VectorXd p(buses.size());
  for (std::size_t i = 0; i < buses.size(); ++i) p[i] = buses[i].shed_priority;
  return p;
}

Eigen::VectorXd NetworkCase::cost_weights() const {
  Eigen::VectorXd c(branches.size());
  for (std::size_t i = 0; i < branches.size(); ++i) c[i] = branches[i].cost_weight;
  return c;
}

double NetworkCase::total_demand() const { return demand().sum(); }

double NetworkCase::total_capacity() const {
  double total = 0.0;
  for (const auto& g : generators) total += g.p_max;
  return total;
}

double ScenarioProfile::net_multiplier(bool reduced) const {
  return loading_multiplier * (1.0 - wind_fraction + (reduced ? wind_reduction : 0.0));
}

void ScenarioProfile::validate(const NetworkCase& net) const {
  constexpr double tol = 1e-9;
  if (!(loading_multiplier > 0.0)) throw ValidationError("loading multiplier must be positive");
  if (wind_fraction < 0.0 || wind_fraction >= 1.0)
    throw ValidationError("wind fraction must lie in [0, 1)");
  if (wind_reduction < -tol || wind_reduction > kMaxWindReduction + tol)
    throw ValidationError("wind reduction must lie in [0, 0.7]");
  if (net_multiplier(true) > kMaxNetMultiplier + tol)
    throw ValidationError("net loading c(1 - w + dw) exceeds 1.8");
  std::set<int> seen;
  for (int id : initial_contingencies) {
    net.branch_index(id);
    if (!seen.insert(id).second)
      throw ValidationError("duplicate contingency branch " + std::to_string(id));
  }
  for (int id : wind_buses) net.bus_index(id);
}

// ---------------------------------------------------------------------------
// MATPOWER subset

namespace {

struct Token {
  std::string text;
  std::size_t line;
};

struct Table {
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> row_lines;
};

double to_number(const Token& tok) {
  double value = 0.0;
  const char* first = tok.text.data();
  const char* last = first + tok.text.size();
  if (!tok.text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    if (tok.text == "Inf" || tok.text == "inf") return std::numeric_limits<double>::infinity();
    if (tok.text == "-Inf" || tok.text == "-inf") return -std::numeric_limits<double>::infinity();
    throw ParseError(tok.line, "expected a number, got '" + tok.text + "'");
  }
  return value;
}

class MatpowerReader {
 public:
  explicit MatpowerReader(std::string_view text) { strip_comments(text); }

  double scalar(const std::string& name) const {
    auto it = scalars_.find(name);
    if (it == scalars_.end()) throw ParseError(last_line_, "missing mpc." + name);
    return it->second;
  }
  const Table& table(const std::string& name) const {
    auto it = tables_.find(name);
    if (it == tables_.end()) throw ParseError(last_line_, "missing mpc." + name + " table");
    return it->second;
  }
  bool has_table(const std::string& name) const { return tables_.count(name) > 0; }

  void read() {
    std::size_t i = 0;
    while (i < body_.size()) {
      auto pos = body_.find("mpc.", i);
      if (pos == std::string::npos) break;
      std::size_t name_begin = pos + 4;
      std::size_t name_end = name_begin;
      while (name_end < body_.size() &&
             (std::isalnum(static_cast<unsigned char>(body_[name_end])) || body_[name_end] == '_'))
        ++name_end;
      std::string name = body_.substr(name_begin, name_end - name_begin);
      std::size_t eq = skip_space(name_end);
      if (eq >= body_.size() || body_[eq] != '=') {
        i = name_end;
        continue;
      }
      std::size_t value = skip_space(eq + 1);
      if (value < body_.size() && body_[value] == '[') {
        i = read_table(name, value + 1);
      } else if (value < body_.size() && body_[value] == '\'') {
        auto close = body_.find('\'', value + 1);
        if (close == std::string::npos) throw ParseError(line_at(value), "unterminated string");
        i = close + 1;
      } else {
        std::size_t end = body_.find_first_of(";\n", value);
        if (end == std::string::npos) end = body_.size();
        std::string text = trim(body_.substr(value, end - value));
        scalars_[name] = to_number({text, line_at(value)});
        i = end;
      }
    }
  }

 private:
  std::string body_;
  std::vector<std::size_t> line_starts_;
  std::map<std::string, double> scalars_;
  std::map<std::string, Table> tables_;
  std::size_t last_line_ = 1;

  void strip_comments(std::string_view text) {
    body_.reserve(text.size());
    bool in_comment = false;
    for (char ch : text) {
      if (ch == '\n') in_comment = false;
      else if (ch == '%') in_comment = true;
      body_.push_back(in_comment ? ' ' : ch);
    }
    line_starts_.push_back(0);
    for (std::size_t k = 0; k < body_.size(); ++k)
      if (body_[k] == '\n') line_starts_.push_back(k + 1);
    last_line_ = line_starts_.size();
  }

  std::size_t line_at(std::size_t offset) const {
    auto it = std::upper_bound(line_starts_.begin(), line_starts_.end(), offset);
    return static_cast<std::size_t>(it - line_starts_.begin());
  }

  std::size_t skip_space(std::size_t k) const {
    while (k < body_.size() && (body_[k] == ' ' || body_[k] == '\t' || body_[k] == '\r')) ++k;
    return k;
  }

  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::size_t read_table(const std::string& name, std::size_t k) {
    Table table;
    std::vector<double> row;
    std::size_t row_line = 0;
    auto flush = [&] {
      if (row.empty()) return;
      if (!table.rows.empty() && row.size() != table.rows.front().size())
        throw ParseError(row_line, "mpc." + name + " row has " + std::to_string(row.size()) +
                                       " columns, expected " +
                                       std::to_string(table.rows.front().size()));
      table.rows.push_back(std::move(row));
      table.row_lines.push_back(row_line);
      row.clear();
    };
    while (k < body_.size()) {
      char ch = body_[k];
      if (ch == ']') {
        flush();
        tables_[name] = std::move(table);
        return k + 1;
      }
      if (ch == ';' || ch == '\n') {
        flush();
        ++k;
        continue;
      }
      if (ch == ' ' || ch == '\t' || ch == '\r' || ch == ',') {
        ++k;
        continue;
      }
      std::size_t end = k;
      while (end < body_.size() && std::string_view(" \t\r\n,;]").find(body_[end]) == std::string_view::npos)
        ++end;
      Token tok{body_.substr(k, end - k), line_at(k)};
      if (row.empty()) row_line = tok.line;
      row.push_back(to_number(tok));
      k = end;
    }
    throw ParseError(line_at(k == 0 ? 0 : k - 1), "unterminated mpc." + name + " table");
  }
};

int as_id(double v, std::size_t line, const char* what) {
  if (v != std::floor(v)) throw ParseError(line, std::string(what) + " must be an integer");
  return static_cast<int>(v);
}

void require_columns(const Table& t, std::size_t n, const char* name) {
  if (!t.rows.empty() && t.rows.front().size() < n)
    throw ParseError(t.row_lines.front(), std::string("mpc.") + name + " needs at least " +
                                              std::to_string(n) + " columns");
}

}  // namespace

NetworkCase parse_matpower(std::string_view text) {
  MatpowerReader reader(text);
  reader.read();

  NetworkCase net;
  net.base_mva = reader.scalar("baseMVA");

  const Table& bus = reader.table("bus");
  require_columns(bus, 3, "bus");
  for (std::size_t r = 0; r < bus.rows.size(); ++r) {
    const auto& row = bus.rows[r];
    Bus b;
    b.id = as_id(row[0], bus.row_lines[r], "bus id");
    b.is_slack = static_cast<int>(row[1]) == 3;
    b.base_demand = row[2];
    net.buses.push_back(b);
  }

  const Table& branch = reader.table("branch");
  require_columns(branch, 6, "branch");
  for (std::size_t r = 0; r < branch.rows.size(); ++r) {
    const auto& row = branch.rows[r];
    std::size_t line = branch.row_lines[r];
    if (row.size() > 10 && row[10] == 0.0) continue;  // out of service
    Branch br;
    br.id = static_cast<int>(r) + 1;
    br.from_bus = as_id(row[0], line, "branch from-bus");
    br.to_bus = as_id(row[1], line, "branch to-bus");
    br.reactance = row[3];
    br.rating_long_term = row[5];
    // rateA of 0 means unlimited in MATPOWER; fall back to rateB / rateC.
    for (std::size_t col = 6; br.rating_long_term == 0.0 && col < std::min<std::size_t>(row.size(), 8); ++col)
      br.rating_long_term = row[col];
    if (!net.find_bus(br.from_bus) || !net.find_bus(br.to_bus))
      throw ValidationError("branch " + std::to_string(br.id) + " (line " + std::to_string(line) +
                            ") references unknown bus " +
                            std::to_string(net.find_bus(br.from_bus) ? br.to_bus : br.from_bus));
    net.branches.push_back(br);
  }

  const Table& gen = reader.table("gen");
  require_columns(gen, 10, "gen");
  std::vector<std::size_t> gen_rows;
  for (std::size_t r = 0; r < gen.rows.size(); ++r) {
    const auto& row = gen.rows[r];
    if (row[7] <= 0.0) continue;
    Generator g;
    g.bus = as_id(row[0], gen.row_lines[r], "generator bus");
    g.p_max = row[8];
    g.p_min = row[9];
    net.generators.push_back(g);
    gen_rows.push_back(r);
  }

  if (reader.has_table("gencost")) {
    const Table& cost = reader.table("gencost");
    if (cost.rows.size() < gen.rows.size())
      throw ParseError(cost.row_lines.empty() ? 1 : cost.row_lines.back(),
                       "mpc.gencost has fewer rows than mpc.gen");
    for (std::size_t k = 0; k < gen_rows.size(); ++k) {
      const auto& row = cost.rows[gen_rows[k]];
      std::size_t line = cost.row_lines[gen_rows[k]];
      if (row.size() < 4 || row[0] != 2.0)
        throw ParseError(line, "only polynomial (model 2) generator costs are supported");
      int n = as_id(row[3], line, "gencost order");
      if (n < 1 || n > 3 || row.size() < 4 + static_cast<std::size_t>(n))
        throw ParseError(line, "polynomial cost of order " + std::to_string(n) + " not supported");
      std::vector<double> coeff(row.begin() + 4, row.begin() + 4 + n);  // highest power first
      if (n == 3) {
        net.generators[k].cost_quadratic = coeff[0];
        net.generators[k].cost_linear = coeff[1];
      } else if (n == 2) {
        net.generators[k].cost_linear = coeff[0];
      }
    }
  }

  validate(net);
  return net;
}

// ---------------------------------------------------------------------------
// JSON

NetworkCase parse_case_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // byte offset to line number
    std::size_t line = 1;
    for (std::size_t k = 0; k < std::min<std::size_t>(e.byte, text.size()); ++k)
      if (text[k] == '\n') ++line;
    throw ParseError(line, e.what());
  }
  NetworkCase net;
  try {
    net.base_mva = doc.value("base_mva", 100.0);
    for (const auto& b : doc.at("buses")) {
      Bus bus;
      bus.id = b.at("id").get<int>();
      bus.base_demand = b.value("base_demand", 0.0);
      bus.shed_priority = b.value("shed_priority", 1.0);
      bus.is_slack = b.value("is_slack", false);
      net.buses.push_back(bus);
    }
    int next_id = 1;
    for (const auto& b : doc.at("branches")) {
      Branch br;
      br.id = b.value("id", next_id);
      next_id = br.id + 1;
      br.from_bus = b.at("from_bus").get<int>();
      br.to_bus = b.at("to_bus").get<int>();
      br.reactance = b.at("reactance").get<double>();
      br.rating_long_term = b.at("rating_long_term").get<double>();
      net.branches.push_back(br);
    }
    for (const auto& g : doc.at("generators")) {
      Generator gen;
      gen.bus = g.at("bus").get<int>();
      gen.p_min = g.value("p_min", 0.0);
      gen.p_max = g.at("p_max").get<double>();
      gen.cost_linear = g.value("cost_linear", 0.0);
      gen.cost_quadratic = g.value("cost_quadratic", 0.0);
      net.generators.push_back(gen);
    }
  } catch (const json::exception& e) {
    throw ParseError(1, std::string("case JSON: ") + e.what());
  }
  validate(net);
  return net;
}

NetworkCase parse_case_file(std::string_view text) {
  auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') return parse_case_json(text);
  return parse_matpower(text);
}

std::optional<std::string_view> builtin_case_text(std::string_view name) {
  if (name == "ieee30" || name == "case30") return detail::ieee30_case_text();
  return std::nullopt;
}

NetworkCase load_case(const std::string& path_or_name) {
  if (auto text = builtin_case_text(path_or_name)) return parse_case_file(*text);
  std::ifstream in(path_or_name, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open case file '" + path_or_name + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_case_file(buffer.str());
}

std::string to_matpower(const NetworkCase& net) {
  std::ostringstream out;
  out.precision(17);
  out << "function mpc = exported_case\nmpc.version = '2';\nmpc.baseMVA = " << net.base_mva << ";\n\n";
  out << "%% bus_i type Pd Qd\nmpc.bus = [\n";
  for (const auto& b : net.buses)
    out << "\t" << b.id << "\t" << (b.is_slack ? 3 : 1) << "\t" << b.base_demand << "\t0;\n";
  out << "];\n\n%% gen: bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin\nmpc.gen = [\n";
  for (const auto& g : net.generators)
    out << "\t" << g.bus << "\t0\t0\t0\t0\t1\t" << net.base_mva << "\t1\t" << g.p_max << "\t" << g.p_min
        << ";\n";
  // Branch ids are positional, so gaps are filled with out-of-service rows.
  out << "];\n\n%% fbus tbus r x b rateA rateB rateC ratio angle status\nmpc.branch = [\n";
  int row = 1;
  for (const auto& br : net.branches) {
    for (; row < br.id; ++row)
      out << "\t" << br.from_bus << "\t" << br.to_bus << "\t0\t1\t0\t1\t1\t1\t0\t0\t0;\n";
    out << "\t" << br.from_bus << "\t" << br.to_bus << "\t0\t" << br.reactance << "\t0\t"
        << br.rating_long_term << "\t" << br.rating_long_term << "\t" << br.rating_long_term
        << "\t0\t0\t1;\n";
    ++row;
  }
  out << "];\n\nmpc.gencost = [\n";
  for (const auto& g : net.generators)
    out << "\t2\t0\t0\t3\t" << g.cost_quadratic << "\t" << g.cost_linear << "\t0;\n";
  out << "];\n";
  return out.str();
}

std::string to_case_json(const NetworkCase& net) {
  json doc;
  doc["base_mva"] = net.base_mva;
  doc["buses"] = json::array();
  for (const auto& b : net.buses)
    doc["buses"].push_back({{"id", b.id},
                            {"base_demand", b.base_demand},
                            {"shed_priority", b.shed_priority},
                            {"is_slack", b.is_slack}});
  doc["branches"] = json::array();
  for (const auto& br : net.branches)
    doc["branches"].push_back({{"id", br.id},
                               {"from_bus", br.from_bus},
                               {"to_bus", br.to_bus},
                               {"reactance", br.reactance},
                               {"rating_long_term", br.rating_long_term}});
  doc["generators"] = json::array();
  for (const auto& g : net.generators)
    doc["generators"].push_back({{"bus", g.bus},
                                 {"p_min", g.p_min},
                                 {"p_max", g.p_max},
                                 {"cost_linear", g.cost_linear},
                                 {"cost_quadratic", g.cost_quadratic}});
  return doc.dump(2);
}

// ---------------------------------------------------------------------------

void validate(NetworkCase& net) {
  if (net.buses.empty()) throw ValidationError("case has no buses");
  if (!(net.base_mva > 0.0)) throw ValidationError("baseMVA must be positive");
  std::set<int> ids;
  for (const auto& b : net.buses) {
    if (!ids.insert(b.id).second) throw ValidationError("duplicate bus id " + std::to_string(b.id));
    if (b.base_demand < 0.0) throw ValidationError("negative demand at bus " + std::to_string(b.id));
    if (!(b.shed_priority > 0.0))
      throw ValidationError("shed priority must be positive at bus " + std::to_string(b.id));
  }
  std::set<int> branch_ids;
  double max_rating = 0.0;
  for (const auto& br : net.branches) {
    if (!branch_ids.insert(br.id).second)
      throw ValidationError("duplicate branch id " + std::to_string(br.id));
    for (int end : {br.from_bus, br.to_bus})
      if (!net.find_bus(end))
        throw ValidationError("branch " + std::to_string(br.id) + " references unknown bus " +
                              std::to_string(end));
    if (!(br.reactance > 0.0))
      throw ValidationError("branch " + std::to_string(br.id) + " has non-positive reactance");
    if (!(br.rating_long_term > 0.0))
      throw ValidationError("branch " + std::to_string(br.id) + " has non-positive rating");
    max_rating = std::max(max_rating, br.rating_long_term);
  }
  for (auto& br : net.branches) br.cost_weight = br.rating_long_term / max_rating;
  for (const auto& g : net.generators) {
    if (!net.find_bus(g.bus))
      throw ValidationError("generator references unknown bus " + std::to_string(g.bus));
    if (g.p_min < 0.0 || g.p_min > g.p_max)
      throw ValidationError("generator at bus " + std::to_string(g.bus) + " violates 0 <= p_min <= p_max");
  }

  // connectivity with every branch alive
  std::vector<std::vector<std::size_t>> adj(net.buses.size());
  for (const auto& br : net.branches) {
    auto f = net.bus_index(br.from_bus), t = net.bus_index(br.to_bus);
    adj[f].push_back(t);
    adj[t].push_back(f);
  }
  std::vector<bool> seen(net.buses.size(), false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    auto u = frontier.front();
    frontier.pop();
    for (auto v : adj[u])
      if (!seen[v]) {
        seen[v] = true;
        ++reached;
        frontier.push(v);
      }
  }
  if (reached != net.buses.size()) throw ValidationError("network is not connected");
  if (net.total_capacity() + 1e-9 < net.total_demand())
    throw ValidationError("total generation capacity is below total demand");
}

void apply_priority_overrides(NetworkCase& net, std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(lineno, "expected bus_id,priority");
    std::string id_text = line.substr(0, comma);
    if (id_text.find("bus") != std::string::npos) continue;  // header
    try {
      int id = std::stoi(id_text);
      double priority = std::stod(line.substr(comma + 1));
      if (!(priority > 0.0)) throw ValidationError("priority must be positive for bus " + id_text);
      net.buses[net.bus_index(id)].shed_priority = priority;
    } catch (const std::invalid_argument&) {
      throw ParseError(lineno, "expected bus_id,priority");
    }
  }
}

NetworkCase scale_loading(const NetworkCase& net, double multiplier) {
  NetworkCase out = net;
  for (auto& b : out.buses) b.base_demand *= multiplier;
  return out;
}

WindApplication apply_wind(const NetworkCase& net, const ScenarioProfile& profile, bool reduced) {
  WindApplication result{scale_loading(net, profile.loading_multiplier), {}};
  const double scaled_total = result.net.total_demand();

  std::vector<std::size_t> hosts;
  if (profile.wind_buses.empty()) {
    for (std::size_t i = 0; i < result.net.buses.size(); ++i)
      if (result.net.buses[i].base_demand > 0.0) hosts.push_back(i);
  } else {
    for (int id : profile.wind_buses) hosts.push_back(result.net.bus_index(id));
  }
  double host_demand = 0.0;
  for (auto i : hosts) host_demand += result.net.buses[i].base_demand;

  const double remaining = profile.wind_fraction - (reduced ? profile.wind_reduction : 0.0);
  if (remaining == 0.0 || hosts.empty()) return result;
  const double wind_total = remaining * scaled_total;
  for (auto i : hosts) {
    double share = host_demand > 0.0 ? result.net.buses[i].base_demand / host_demand
                                     : 1.0 / static_cast<double>(hosts.size());
    double net_demand = result.net.buses[i].base_demand - wind_total * share;
    if (net_demand < 0.0) {
      result.spillage.push_back({result.net.buses[i].id, -net_demand});
      net_demand = 0.0;
    }
    result.net.buses[i].base_demand = net_demand;
  }
  return result;
}

}  // namespace windcascade
