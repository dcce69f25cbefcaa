#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "windcascade/dcflow.hpp"
#include "windcascade/netcase.hpp"

namespace windcascade {

/// Corrective-action policy of a cascade run.
///   Exp1: no corrective action (power flow, proportional island rebalancing)
///   Exp2: re-dispatch for full service, uniform shed when impossible
///   Exp3: re-dispatch with cost-based load shed
enum class Policy { Exp1, Exp2, Exp3 };

std::string_view to_string(Policy p);
Policy parse_policy(std::string_view text);

enum class EventKind { LineTrip, LoadShed, WindReduction, IslandBlackout, Redispatch };

std::string_view to_string(EventKind k);
EventKind parse_event_kind(std::string_view text);

struct CascadeEvent {
  int time = 0;
  EventKind kind = EventKind::LineTrip;
  int subject = -1;  // branch id or bus id, -1 for system-wide events
  double magnitude = 0.0;

  bool operator==(const CascadeEvent&) const = default;
};

/// Binary service vector: 1 for full service at a bus.
using LoadBits = Eigen::Matrix<unsigned char, Eigen::Dynamic, 1>;

/// One cascade: states s[0..T-1], the served/demanded MW per bus at each
/// step, and the event log. Step 0 already has the initial contingencies out.
struct CascadeTrace {
  ScenarioProfile profile;
  Policy policy = Policy::Exp1;
  bool wind_reduced = false;  // trace runs at the reduced-wind demand
  std::vector<Topology> states;
  std::vector<Eigen::VectorXd> served;
  std::vector<Eigen::VectorXd> demand;
  std::vector<LoadBits> load_bits;
  std::vector<CascadeEvent> events;
  Eigen::VectorXd final_generation;  // MW per generator at the last step

  std::size_t length() const { return states.size(); }
  bool total_blackout() const;
  /// Post-initial line trips (events with time > 0).
  std::size_t propagated_trips() const;

  bool operator==(const CascadeTrace& other) const;
};

struct CascadeOptions {
  DispatchOptions dispatch;
  /// Overload tolerance in MW above the applicable rating.
  double trip_tolerance = 1e-6;
};

/// l_i = 1 iff served_i >= (1 - 1e-3) demand_i or demand_i = 0.
LoadBits binarize_service(const Eigen::VectorXd& served, const Eigen::VectorXd& demand);
inline constexpr double kServiceTolerance = 1e-3;

/// Runs the deterministic cascade oracle at the profile's pre-reduction net load.
CascadeTrace run_cascade(const NetworkCase& net, const ScenarioProfile& profile, Policy policy,
                         const CascadeOptions& options = {});

struct WindReductionRun {
  CascadeTrace before;
  std::optional<CascadeTrace> after;  // absent when `before` ends in total blackout
  bool blackout_before = false;
};

/// Runs the cascade at the net load, then applies the wind reduction from its
/// terminal state and runs the oracle again.
WindReductionRun run_with_wind_reduction(const NetworkCase& net, const ScenarioProfile& profile,
                                         Policy policy, const CascadeOptions& options = {});

/// Concatenates `after` onto `before`, shifting its time index; the merged
/// trace is the full sequence experienced under the reduced-wind profile.
CascadeTrace concatenate(const CascadeTrace& before, const CascadeTrace& after);

}  // namespace windcascade
