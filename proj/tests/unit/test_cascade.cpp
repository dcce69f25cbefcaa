#include <doctest.h>

#include <algorithm>

#include "fixtures.hpp"
#include "windcascade/cascade.hpp"
#include "windcascade/sampler.hpp"

using namespace windcascade;

namespace {

std::size_t count_kind(const CascadeTrace& t, EventKind k) {
  return static_cast<std::size_t>(std::count_if(t.events.begin(), t.events.end(), [&](const auto& e) { return e.kind == k; }));
}

void check_trace_invariants(const CascadeTrace& t, const NetworkCase& net) {
  REQUIRE(t.length() >= 1);
  CHECK(t.length() <= net.branch_count() + 2);
  for (std::size_t s = 1; s < t.length(); ++s) CHECK((t.states[s].array() <= t.states[s - 1].array()).all());
  for (std::size_t s = 0; s < t.length(); ++s) {
    CHECK((t.served[s].array() <= t.demand[s].array() + 1e-6).all());
    CHECK((t.served[s].array() >= -1e-9).all());
    CHECK(t.load_bits[s] == binarize_service(t.served[s], t.demand[s]));
  }
  for (std::size_t k = 1; k < t.events.size(); ++k) CHECK(t.events[k - 1].time <= t.events[k].time);
}

}  // namespace

TEST_CASE("binarize service") {
  Eigen::Vector3d demand(10.0, 20.0, 0.0);
  CHECK(binarize_service(demand, demand).cast<int>().sum() == 3);
  Eigen::Vector3d served(0.0, 20.0, 0.0);
  auto bits = binarize_service(served, demand);
  CHECK(bits[0] == 0);
  CHECK(bits[1] == 1);
  CHECK(bits[2] == 1);
  served[0] = 0.9995 * 10.0;
  CHECK(binarize_service(served, demand)[0] == 1);
  served[0] = 0.998 * 10.0;
  CHECK(binarize_service(served, demand)[0] == 0);
}

TEST_CASE("policy and event names") {
  for (auto p : {Policy::Exp1, Policy::Exp2, Policy::Exp3}) CHECK(parse_policy(to_string(p)) == p);
  for (auto k : {EventKind::LineTrip, EventKind::LoadShed, EventKind::WindReduction, EventKind::IslandBlackout,
                 EventKind::Redispatch})
    CHECK(parse_event_kind(to_string(k)) == k);
  CHECK_THROWS(parse_policy("exp9"));
}

TEST_CASE("no contingency") {
  const auto net = load_case("ieee30");
  ScenarioProfile p;
  const auto t = run_cascade(net, p, Policy::Exp1);
  CHECK(t.length() == 1);
  CHECK(count_kind(t, EventKind::LineTrip) == 0);
  CHECK(count_kind(t, EventKind::LoadShed) == 0);
}

TEST_CASE("triangle trips its weak line then islands") {
  const auto net = fixtures::triangle();
  ScenarioProfile p;
  p.initial_contingencies = {1};
  const auto t = run_cascade(net, p, Policy::Exp1);
  check_trace_invariants(t, net);
  REQUIRE(t.length() >= 2);
  CHECK(t.states[0].cast<int>() == Eigen::Vector3i(0, 1, 1));
  CHECK(t.states[1].cast<int>() == Eigen::Vector3i(0, 0, 1));
  const auto trip = std::find_if(t.events.begin(), t.events.end(),
                                 [](const auto& e) { return e.kind == EventKind::LineTrip && e.time > 0; });
  REQUIRE(trip != t.events.end());
  CHECK(trip->subject == 2);
  CHECK(trip->time == 1);
  CHECK(trip->magnitude == doctest::Approx(90.0));
  CHECK(count_kind(t, EventKind::IslandBlackout) >= 1);
  CHECK(t.served.back()[1] == 0.0);
  CHECK(t.load_bits.back()[1] == 0);

  // with re-dispatch the weak line is protected by shedding instead
  const auto t3 = run_cascade(net, p, Policy::Exp3);
  CHECK(t3.propagated_trips() == 0);
  CHECK(t3.served.back()[1] == doctest::Approx(net.branches[1].rating_long_term * kShortTermRatingFactor));
}

TEST_CASE("exp3 never propagates") {
  const auto net = load_case("ieee30");
  for (double c : {0.9, 1.4, 1.8}) {
    ScenarioProfile p;
    p.loading_multiplier = c;
    for (const auto& [a, b] : draw_contingency_pairs(net, 25, 99, true)) {
      p.initial_contingencies = {a, b};
      const auto t = run_cascade(net, p, Policy::Exp3);
      CHECK(t.propagated_trips() == 0);
      check_trace_invariants(t, net);
    }
  }
}

TEST_CASE("exp1 and exp2 step structure") {
  const auto net = load_case("ieee30");
  for (auto policy : {Policy::Exp1, Policy::Exp2}) {
    ScenarioProfile p;
    p.loading_multiplier = 1.5;
    for (const auto& [a, b] : draw_contingency_pairs(net, 30, 5, true)) {
      p.initial_contingencies = {a, b};
      const auto t = run_cascade(net, p, policy);
      check_trace_invariants(t, net);
      // every step after the first exists because something tripped
      for (std::size_t s = 1; s < t.length(); ++s) {
        const bool tripped = std::any_of(t.events.begin(), t.events.end(), [&](const auto& e) {
          return e.kind == EventKind::LineTrip && e.time == static_cast<int>(s);
        });
        CHECK(tripped);
        CHECK(t.states[s] != t.states[s - 1]);
      }
      CHECK(run_cascade(net, p, policy) == t);
    }
  }
}

TEST_CASE("wind reduction") {
  const auto net = load_case("ieee30");
  const double d0 = net.total_demand();
  ScenarioProfile p;
  p.loading_multiplier = 1.0;
  p.wind_fraction = 0.1;
  p.initial_contingencies = {5, 9};

  p.wind_reduction = 0.0;
  auto run = run_with_wind_reduction(net, p, Policy::Exp1);
  REQUIRE(run.after);
  CHECK(run.after->length() == 1);
  CHECK(count_kind(*run.after, EventKind::LineTrip) == 0);
  CHECK(count_kind(*run.after, EventKind::LoadShed) == 0);

  p.wind_reduction = 0.3;
  run = run_with_wind_reduction(net, p, Policy::Exp1);
  REQUIRE(run.after);
  CHECK(run.before.demand.front().sum() == doctest::Approx(0.9 * d0));
  CHECK(run.after->demand.front().sum() == doctest::Approx(1.2 * d0));
  CHECK(run.after->states.front() == run.before.states.back());
  CHECK(run.after->wind_reduced);
  check_trace_invariants(*run.after, net);

  const auto merged = concatenate(run.before, *run.after);
  CHECK(merged.length() == run.before.length() + run.after->length());
}

TEST_CASE("larger reductions shed more") {
  const auto net = load_case("ieee30");
  auto total_shed = [&](double dw) {
    double shed = 0.0;
    for (const auto& [a, b] : draw_contingency_pairs(net, 40, 21, true)) {
      ScenarioProfile p;
      p.loading_multiplier = 1.0;
      p.wind_fraction = 0.1;
      p.wind_reduction = dw;
      p.initial_contingencies = {a, b};
      const auto run = run_with_wind_reduction(net, p, Policy::Exp1);
      const auto& last = run.after ? *run.after : run.before;
      shed += (last.demand.back() - last.served.back()).sum();
    }
    return shed / 40.0;
  };
  CHECK(total_shed(0.7) > total_shed(0.1));
}
