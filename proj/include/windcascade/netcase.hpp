#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace windcascade {

/// Raised for malformed case text. Carries the 1-based line of the offending token.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Raised when a syntactically valid case violates a model invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Bus {
  int id = 0;
  double base_demand = 0.0;   // MW
  double shed_priority = 1.0; // weight per MW shed
  bool is_slack = false;

  bool operator==(const Bus&) const = default;
};

struct Branch {
  int id = 0;  // 1-based row in the source table
  int from_bus = 0;
  int to_bus = 0;
  double reactance = 0.0;         // per unit
  double rating_long_term = 0.0;  // MW
  double cost_weight = 0.0;       // rating / max rating

  bool operator==(const Branch&) const = default;
};

struct Generator {
  int bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  double cost_linear = 0.0;
  double cost_quadratic = 0.0;

  bool operator==(const Generator&) const = default;
};

/// The physical grid model. Immutable once validated; all indices below are
/// positions in `buses` / `branches`, ids are the external labels.
struct NetworkCase {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  double base_mva = 100.0;

  std::size_t bus_count() const { return buses.size(); }
  std::size_t branch_count() const { return branches.size(); }

  /// Position of bus `id`; throws ValidationError if absent.
  std::size_t bus_index(int id) const;
  std::optional<std::size_t> find_bus(int id) const;
  /// Position of branch `id`; throws ValidationError if absent.
  std::size_t branch_index(int id) const;

  Eigen::VectorXd demand() const;
  Eigen::VectorXd priorities() const;
  Eigen::VectorXd cost_weights() const;
  double total_demand() const;
  double total_capacity() const;

  bool operator==(const NetworkCase&) const = default;
};

/// The initial network profile: loading multiplier, wind, contingencies and
/// the wind reduction applied mid-cascade.
struct ScenarioProfile {
  double loading_multiplier = 1.0;
  double wind_fraction = 0.0;
  std::vector<int> wind_buses;  // empty: every load bus, proportional to demand
  std::vector<int> initial_contingencies;  // branch ids
  double wind_reduction = 0.0;

  /// Net load relative to the unscaled base case, c * (1 - w + dw).
  double net_multiplier(bool reduced) const;
  /// Throws ValidationError when the profile is outside the admissible ranges.
  void validate(const NetworkCase& net) const;

  bool operator==(const ScenarioProfile&) const = default;
};

inline constexpr double kMaxNetMultiplier = 1.8;
inline constexpr double kMaxWindReduction = 0.7;

/// Parses the supported MATPOWER subset (baseMVA, bus, branch, gen, gencost).
NetworkCase parse_matpower(std::string_view text);
/// Parses the canonical JSON case document.
NetworkCase parse_case_json(std::string_view text);
/// Dispatches on content: JSON documents start with '{'.
NetworkCase parse_case_file(std::string_view text);
/// Reads `path`, or resolves a builtin name such as "ieee30".
NetworkCase load_case(const std::string& path_or_name);
/// Text of a builtin case, or nullopt.
std::optional<std::string_view> builtin_case_text(std::string_view name);

std::string to_matpower(const NetworkCase& net);
std::string to_case_json(const NetworkCase& net);

/// Recomputes cost weights and checks every invariant; throws ValidationError.
void validate(NetworkCase& net);

/// Applies `bus_id,priority` CSV overrides.
void apply_priority_overrides(NetworkCase& net, std::string_view csv);

NetworkCase scale_loading(const NetworkCase& net, double multiplier);

struct SpillageEvent {
  int bus = 0;
  double magnitude = 0.0;  // MW of wind that could not be absorbed
};

struct WindApplication {
  NetworkCase net;  // demands replaced by net demands
  std::vector<SpillageEvent> spillage;
};

/// Net demand after wind at the profile's loading; `reduced` additionally
/// removes dw * (scaled base load) of wind.
WindApplication apply_wind(const NetworkCase& net, const ScenarioProfile& profile, bool reduced);

}  // namespace windcascade
