#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "windcascade/netcase.hpp"

namespace fixtures {

struct BranchSpec {
  int from, to;
  double reactance, rating;
};

struct GenSpec {
  int bus;
  double p_max, cost_linear = 1.0;
};

/// Builds a case without validation so deliberately infeasible grids can be
/// assembled. Cost weights are rating / max rating.
inline windcascade::NetworkCase make_case(const std::vector<std::pair<int, double>>& buses,
                                          const std::vector<BranchSpec>& branches,
                                          const std::vector<GenSpec>& gens) {
  windcascade::NetworkCase net;
  for (auto [id, demand] : buses) net.buses.push_back({id, demand, 1.0, false});
  double max_rating = 0.0;
  for (const auto& b : branches) max_rating = std::max(max_rating, b.rating);
  int id = 1;
  for (const auto& b : branches)
    net.branches.push_back({id++, b.from, b.to, b.reactance, b.rating, b.rating / max_rating});
  for (const auto& g : gens) net.generators.push_back({g.bus, 0.0, g.p_max, g.cost_linear, 0.0});
  return net;
}

inline const char* kTwoBus = R"(function mpc = two_bus
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0;
	2	1	100	0;
];
mpc.gen = [
	1	0	0	0	0	1	100	1	150	0;
];
mpc.branch = [
	1	2	0	0.1	0	120	120	120	0	0	1;
];
mpc.gencost = [
	2	0	0	3	0.01	2	0;
];
)";

/// Triangle: generator at bus 1, 90 MW at bus 2, line 1-3 rated below the
/// full transfer.
inline windcascade::NetworkCase triangle(double rating13 = 50.0) {
  return make_case({{1, 0.0}, {2, 90.0}, {3, 0.0}},
                   {{1, 2, 0.1, 100.0}, {1, 3, 0.1, rating13}, {3, 2, 0.1, 100.0}}, {{1, 200.0}});
}

}  // namespace fixtures

#include "windcascade/io.hpp"

namespace fixtures {

/// Trace over bit-string states and service bits with unit demand at every
/// bus; served is 0 where the service bit is 0.
inline windcascade::CascadeTrace synthetic_trace(const std::vector<std::string>& states,
                                                 const std::vector<std::string>& loads) {
  windcascade::CascadeTrace t;
  for (std::size_t k = 0; k < states.size(); ++k) {
    t.states.push_back(windcascade::bits_from_string(states[k]));
    const auto bits = windcascade::bits_from_string(loads[k]);
    t.load_bits.push_back(bits);
    t.demand.push_back(Eigen::VectorXd::Ones(bits.size()));
    t.served.push_back(bits.cast<double>());
  }
  t.final_generation = Eigen::VectorXd::Zero(1);
  return t;
}

/// A pool whose samples are the given traces, every index in both splits' union.
inline windcascade::SamplePool synthetic_pool(const std::vector<windcascade::CascadeTrace>& traces,
                                              const std::vector<std::size_t>& test = {}) {
  windcascade::SamplePool pool;
  for (std::size_t k = 0; k < traces.size(); ++k) {
    windcascade::PoolSample s;
    s.index = k;
    s.before = traces[k];
    pool.samples.push_back(s);
    if (std::find(test.begin(), test.end(), k) == test.end()) pool.train.push_back(k);
  }
  pool.test = test;
  return pool;
}

}  // namespace fixtures
