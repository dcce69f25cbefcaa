#include "windcascade/cascade.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <stdexcept>

namespace windcascade {

namespace {

constexpr std::array<std::string_view, 3> kPolicyNames = {"exp1", "exp2", "exp3"};
constexpr std::array<std::string_view, 5> kEventNames = {"LINE_TRIP", "LOAD_SHED", "WIND_REDUCTION",
                                                         "ISLAND_BLACKOUT", "REDISPATCH"};

}  // namespace

std::string_view to_string(Policy p) { return kPolicyNames[static_cast<std::size_t>(p)]; }

Policy parse_policy(std::string_view text) {
  for (std::size_t i = 0; i < kPolicyNames.size(); ++i)
    if (text == kPolicyNames[i] || (text.size() == 1 && text[0] == static_cast<char>('1' + i)))
      return static_cast<Policy>(i);
  throw std::invalid_argument("unknown policy '" + std::string(text) + "' (expected exp1, exp2 or exp3)");
}

std::string_view to_string(EventKind k) { return kEventNames[static_cast<std::size_t>(k)]; }

EventKind parse_event_kind(std::string_view text) {
  for (std::size_t i = 0; i < kEventNames.size(); ++i)
    if (text == kEventNames[i]) return static_cast<EventKind>(i);
  throw std::invalid_argument("unknown event kind '" + std::string(text) + "'");
}

bool CascadeTrace::total_blackout() const {
  if (served.empty()) return false;
  return demand.back().sum() > 0.0 && served.back().sum() <= 1e-9;
}

std::size_t CascadeTrace::propagated_trips() const {
  return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [](const CascadeEvent& e) {
    return e.kind == EventKind::LineTrip && e.time > 0;
  }));
}

bool CascadeTrace::operator==(const CascadeTrace& other) const {
  if (policy != other.policy || wind_reduced != other.wind_reduced || states.size() != other.states.size() ||
      events != other.events)
    return false;
  for (std::size_t t = 0; t < states.size(); ++t) {
    if (states[t] != other.states[t] || served[t] != other.served[t] || demand[t] != other.demand[t] ||
        load_bits[t] != other.load_bits[t])
      return false;
  }
  return final_generation == other.final_generation;
}

LoadBits binarize_service(const Eigen::VectorXd& served, const Eigen::VectorXd& demand) {
  LoadBits bits(demand.size());
  for (Eigen::Index i = 0; i < demand.size(); ++i)
    bits[i] = (demand[i] <= 0.0 || served[i] >= (1.0 - kServiceTolerance) * demand[i]) ? 1 : 0;
  return bits;
}

namespace {

struct StepResult {
  Eigen::VectorXd served;
  Eigen::VectorXd flows;
  Eigen::VectorXd generation;
};

/// Scales island generation proportionally to meet island demand; when the
/// island cannot cover its demand, the demand is scaled down uniformly.
StepResult rebalance_and_flow(const NetworkCase& net, const Topology& alive, const Eigen::VectorXd& dispatch) {
  StepResult out;
  const Eigen::VectorXd demand = net.demand();
  out.served = demand;
  out.generation = dispatch;
  for (const auto& island : islands(net, alive)) {
    std::vector<std::size_t> gens;
    double cap = 0.0, current = 0.0, want = 0.0;
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
      if (!std::binary_search(island.begin(), island.end(), net.bus_index(net.generators[g].bus))) continue;
      gens.push_back(g);
      cap += net.generators[g].p_max;
      current += out.generation[static_cast<Eigen::Index>(g)];
    }
    for (auto b : island) want += demand[static_cast<Eigen::Index>(b)];

    if (cap <= 0.0) {
      for (auto b : island) out.served[static_cast<Eigen::Index>(b)] = 0.0;
      for (auto g : gens) out.generation[static_cast<Eigen::Index>(g)] = 0.0;
      continue;
    }
    if (want > cap) {
      const double gamma = cap / want;
      for (auto b : island) out.served[static_cast<Eigen::Index>(b)] *= gamma;
      for (auto g : gens) out.generation[static_cast<Eigen::Index>(g)] = net.generators[g].p_max;
    } else if (want >= current) {
      const double share = cap > current ? (want - current) / (cap - current) : 0.0;
      for (auto g : gens) {
        auto& pg = out.generation[static_cast<Eigen::Index>(g)];
        pg += (net.generators[g].p_max - pg) * share;
      }
    } else {
      const double scale = want / current;
      for (auto g : gens) out.generation[static_cast<Eigen::Index>(g)] *= scale;
    }
  }
  Eigen::VectorXd injections = -out.served;
  for (std::size_t g = 0; g < net.generators.size(); ++g)
    injections[static_cast<Eigen::Index>(net.bus_index(net.generators[g].bus))] +=
        out.generation[static_cast<Eigen::Index>(g)];
  auto flow = dc_power_flow(net, alive, injections);
  out.served -= flow.shed;
  out.flows = std::move(flow.flows);
  return out;
}

/// Pre-contingency operating point for the no-action policy: economic
/// dispatch on the intact network, or capacity-proportional dispatch when
/// no secure dispatch exists.
Eigen::VectorXd base_dispatch(const NetworkCase& net, const CascadeOptions& options) {
  const Topology intact = all_alive(net);
  auto opf = dc_opf(net, intact, applicable_ratings(net, intact), ShedPolicy::FullService, options.dispatch);
  if (opf.feasible) return opf.generation;
  return rebalance_and_flow(net, intact,
                            Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.generators.size())))
      .generation;
}

struct Start {
  Topology alive;
  Eigen::VectorXd generation;
  Eigen::VectorXd prior_unserved;
  std::vector<CascadeEvent> events;
};

CascadeTrace propagate(const NetworkCase& loaded, Start start, Policy policy, const CascadeOptions& options) {
  CascadeTrace trace;
  trace.policy = policy;
  trace.events = std::move(start.events);
  const Eigen::VectorXd demand = loaded.demand();
  Topology alive = std::move(start.alive);
  Eigen::VectorXd generation = std::move(start.generation);
  Eigen::VectorXd prior_unserved = std::move(start.prior_unserved);
  std::set<int> dark_islands;  // by smallest bus id

  const std::size_t max_steps = loaded.branch_count() + 2;
  for (int t = 0;; ++t) {
    const Eigen::VectorXd ratings = applicable_ratings(loaded, alive);
    StepResult step;
    switch (policy) {
      case Policy::Exp1:
        step = rebalance_and_flow(loaded, alive, generation);
        break;
      case Policy::Exp2: {
        auto d = dc_opf(loaded, alive, ratings, ShedPolicy::FullService, options.dispatch);
        if (!d.feasible) d = emergency_uniform_shed(loaded, alive, ratings, options.dispatch);
        step = {d.served, d.flows, d.generation};
        break;
      }
      case Policy::Exp3: {
        auto d = dc_opf(loaded, alive, ratings, ShedPolicy::CostBasedShed, options.dispatch);
        step = {d.served, d.flows, d.generation};
        break;
      }
    }
    if (policy != Policy::Exp1)
      trace.events.push_back({t, EventKind::Redispatch, -1, step.generation.sum()});

    const Eigen::VectorXd unserved = (demand - step.served).cwiseMax(0.0);
    for (Eigen::Index b = 0; b < unserved.size(); ++b) {
      const double increase = unserved[b] - prior_unserved[b];
      if (increase > 1e-9) trace.events.push_back({t, EventKind::LoadShed, loaded.buses[static_cast<std::size_t>(b)].id, increase});
    }
    for (const auto& island : islands(loaded, alive)) {
      double want = 0.0, got = 0.0;
      for (auto b : island) {
        want += demand[static_cast<Eigen::Index>(b)];
        got += step.served[static_cast<Eigen::Index>(b)];
      }
      const int label = loaded.buses[island.front()].id;
      if (want > 0.0 && got <= 1e-9 && dark_islands.insert(label).second)
        trace.events.push_back({t, EventKind::IslandBlackout, label, want});
    }

    trace.states.push_back(alive);
    trace.served.push_back(step.served);
    trace.demand.push_back(demand);
    trace.load_bits.push_back(binarize_service(step.served, demand));
    generation = step.generation;
    prior_unserved = unserved;

    Topology next = alive;
    bool tripped = false;
    for (Eigen::Index k = 0; k < alive.size(); ++k) {
      if (!alive[k]) continue;
      if (std::abs(step.flows[k]) > ratings[k] + options.trip_tolerance) {
        next[k] = 0;
        tripped = true;
        trace.events.push_back({t + 1, EventKind::LineTrip, loaded.branches[static_cast<std::size_t>(k)].id,
                                std::abs(step.flows[k])});
      }
    }
    if (!tripped) break;
    if (trace.states.size() > max_steps) throw std::logic_error("cascade failed to terminate");
    alive = std::move(next);
  }
  trace.final_generation = generation;
  return trace;
}

}  // namespace

CascadeTrace run_cascade(const NetworkCase& net, const ScenarioProfile& profile, Policy policy,
                         const CascadeOptions& options) {
  profile.validate(net);
  const NetworkCase loaded = apply_wind(net, profile, false).net;
  Start start;
  start.alive = all_alive(loaded);
  start.prior_unserved = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(loaded.bus_count()));
  start.generation = policy == Policy::Exp1
                         ? base_dispatch(loaded, options)
                         : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(loaded.generators.size()));
  for (int id : profile.initial_contingencies) {
    start.alive[static_cast<Eigen::Index>(loaded.branch_index(id))] = 0;
    start.events.push_back({0, EventKind::LineTrip, id, 0.0});
  }
  auto trace = propagate(loaded, std::move(start), policy, options);
  trace.profile = profile;
  return trace;
}

WindReductionRun run_with_wind_reduction(const NetworkCase& net, const ScenarioProfile& profile, Policy policy,
                                         const CascadeOptions& options) {
  WindReductionRun run;
  run.before = run_cascade(net, profile, policy, options);
  run.blackout_before = run.before.total_blackout();
  if (run.blackout_before) return run;

  const NetworkCase loaded = apply_wind(net, profile, true).net;
  Start start;
  start.alive = run.before.states.back();
  start.generation = run.before.final_generation;
  start.prior_unserved = (run.before.demand.back() - run.before.served.back()).cwiseMax(0.0);
  start.events.push_back(
      {0, EventKind::WindReduction, -1, loaded.total_demand() - run.before.demand.back().sum()});
  auto after = propagate(loaded, std::move(start), policy, options);
  after.profile = profile;
  after.wind_reduced = true;
  run.after = std::move(after);
  return run;
}

CascadeTrace concatenate(const CascadeTrace& before, const CascadeTrace& after) {
  CascadeTrace merged = before;
  const int offset = static_cast<int>(before.length());
  merged.wind_reduced = after.wind_reduced;
  for (std::size_t t = 0; t < after.length(); ++t) {
    merged.states.push_back(after.states[t]);
    merged.served.push_back(after.served[t]);
    merged.demand.push_back(after.demand[t]);
    merged.load_bits.push_back(after.load_bits[t]);
  }
  for (auto e : after.events) {
    e.time += offset;
    merged.events.push_back(e);
  }
  merged.final_generation = after.final_generation;
  return merged;
}

}  // namespace windcascade
