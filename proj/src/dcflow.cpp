#include "windcascade/dcflow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/LU>

#include "windcascade/linear_program.hpp"

namespace windcascade {

namespace {

constexpr double kPivotThreshold = 1e-10;
constexpr int kCostSegments = 3;

std::vector<std::vector<std::size_t>> island_generators(const NetworkCase& net,
                                                        const std::vector<Island>& parts) {
  std::vector<int> owner(net.bus_count(), -1);
  for (std::size_t k = 0; k < parts.size(); ++k)
    for (auto b : parts[k]) owner[b] = static_cast<int>(k);
  std::vector<std::vector<std::size_t>> gens(parts.size());
  for (std::size_t g = 0; g < net.generators.size(); ++g)
    gens[static_cast<std::size_t>(owner[net.bus_index(net.generators[g].bus)])].push_back(g);
  return gens;
}

}  // namespace

std::vector<Island> islands(const NetworkCase& net, const Topology& alive) {
  const std::size_t n = net.bus_count();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t k = 0; k < net.branch_count(); ++k) {
    if (!alive[static_cast<Eigen::Index>(k)]) continue;
    auto a = find(net.bus_index(net.branches[k].from_bus));
    auto b = find(net.bus_index(net.branches[k].to_bus));
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<Island> parts;
  std::vector<int> slot(n, -1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return net.buses[a].id < net.buses[b].id; });
  for (auto b : order) {
    auto root = find(b);
    if (slot[root] < 0) {
      slot[root] = static_cast<int>(parts.size());
      parts.emplace_back();
    }
    parts[static_cast<std::size_t>(slot[root])].push_back(b);
  }
  for (auto& island : parts) std::sort(island.begin(), island.end());
  return parts;
}

bool island_has_generation(const NetworkCase& net, const Island& island) {
  for (const auto& g : net.generators)
    if (g.p_max > 0.0 && std::binary_search(island.begin(), island.end(), net.bus_index(g.bus)))
      return true;
  return false;
}

std::size_t island_slack(const NetworkCase& net, const Island& island) {
  std::size_t best = island.front();
  double best_pmax = -1.0;
  for (const auto& g : net.generators) {
    auto b = net.bus_index(g.bus);
    if (!std::binary_search(island.begin(), island.end(), b)) continue;
    if (g.p_max > best_pmax ||
        (g.p_max == best_pmax && net.buses[b].id < net.buses[best].id)) {
      best_pmax = g.p_max;
      best = b;
    }
  }
  if (best_pmax < 0.0) {
    for (auto b : island)
      if (net.buses[b].id < net.buses[best].id) best = b;
  }
  return best;
}

namespace {

/// Reduced susceptance matrix of an island (slack row/column removed), in per
/// unit, and the local index of every island bus (-1 for the slack).
struct ReducedSystem {
  Eigen::MatrixXd b;
  std::vector<int> local;  // by bus position, -1 outside or slack
  bool singular = false;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
};

ReducedSystem reduce(const NetworkCase& net, const Topology& alive, const Island& island,
                     std::size_t slack) {
  ReducedSystem sys;
  sys.local.assign(net.bus_count(), -1);
  int next = 0;
  for (auto b : island)
    if (b != slack) sys.local[b] = next++;
  sys.b = Eigen::MatrixXd::Zero(next, next);
  for (std::size_t k = 0; k < net.branch_count(); ++k) {
    if (!alive[static_cast<Eigen::Index>(k)]) continue;
    const auto& br = net.branches[k];
    auto f = net.bus_index(br.from_bus), t = net.bus_index(br.to_bus);
    if (!std::binary_search(island.begin(), island.end(), f)) continue;
    const double y = 1.0 / br.reactance;
    int lf = sys.local[f], lt = sys.local[t];
    if (lf >= 0) sys.b(lf, lf) += y;
    if (lt >= 0) sys.b(lt, lt) += y;
    if (lf >= 0 && lt >= 0) {
      sys.b(lf, lt) -= y;
      sys.b(lt, lf) -= y;
    }
  }
  if (next > 0) {
    sys.lu.compute(sys.b);
    const double min_pivot = sys.lu.matrixLU().diagonal().cwiseAbs().minCoeff();
    sys.singular = min_pivot < kPivotThreshold;
  }
  return sys;
}

}  // namespace

FlowSolution dc_power_flow(const NetworkCase& net, const Topology& alive,
                           const Eigen::VectorXd& injections) {
  const auto n = static_cast<Eigen::Index>(net.bus_count());
  FlowSolution sol;
  sol.angles = Eigen::VectorXd::Zero(n);
  sol.flows = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.branch_count()));
  sol.injections = injections;
  sol.shed = Eigen::VectorXd::Zero(n);
  sol.islands = islands(net, alive);
  sol.blacked_out.assign(sol.islands.size(), false);

  for (std::size_t k = 0; k < sol.islands.size(); ++k) {
    const Island& island = sol.islands[k];
    double mismatch = 0.0;
    for (auto b : island) mismatch += injections[static_cast<Eigen::Index>(b)];
    const std::size_t slack = island_slack(net, island);
    const bool has_gen = island_has_generation(net, island);

    bool dark = std::abs(mismatch) > 1e-9 && !has_gen;
    ReducedSystem sys;
    if (!dark) {
      sys = reduce(net, alive, island, slack);
      dark = sys.singular;
    }
    if (dark) {
      sol.blacked_out[k] = true;
      for (auto b : island) {
        const auto i = static_cast<Eigen::Index>(b);
        sol.shed[i] = std::max(0.0, -injections[i]);
        sol.injections[i] = 0.0;
      }
      continue;
    }
    sol.injections[static_cast<Eigen::Index>(slack)] -= mismatch;
    if (island.size() == 1) continue;

    Eigen::VectorXd p(sys.b.rows());
    for (auto b : island)
      if (sys.local[b] >= 0) p[sys.local[b]] = sol.injections[static_cast<Eigen::Index>(b)] / net.base_mva;
    Eigen::VectorXd theta = sys.lu.solve(p);
    for (auto b : island)
      if (sys.local[b] >= 0) sol.angles[static_cast<Eigen::Index>(b)] = theta[sys.local[b]];
  }

  for (std::size_t k = 0; k < net.branch_count(); ++k) {
    if (!alive[static_cast<Eigen::Index>(k)]) continue;
    const auto& br = net.branches[k];
    const auto f = static_cast<Eigen::Index>(net.bus_index(br.from_bus));
    const auto t = static_cast<Eigen::Index>(net.bus_index(br.to_bus));
    sol.flows[static_cast<Eigen::Index>(k)] = (sol.angles[f] - sol.angles[t]) / br.reactance * net.base_mva;
  }
  return sol;
}

FlowSolution dc_power_flow(const NetworkCase& net, const Topology& alive) {
  return dc_power_flow(net, alive, -net.demand());
}

Eigen::MatrixXd island_ptdf(const NetworkCase& net, const Topology& alive, const Island& island) {
  Eigen::MatrixXd ptdf = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(net.branch_count()),
                                               static_cast<Eigen::Index>(net.bus_count()));
  if (island.size() < 2) return ptdf;
  const auto slack = island_slack(net, island);
  ReducedSystem sys = reduce(net, alive, island, slack);
  if (sys.singular) throw std::runtime_error("singular susceptance matrix in connected island");
  const Eigen::MatrixXd x = sys.lu.inverse();
  for (std::size_t k = 0; k < net.branch_count(); ++k) {
    if (!alive[static_cast<Eigen::Index>(k)]) continue;
    const auto& br = net.branches[k];
    const int lf = sys.local[net.bus_index(br.from_bus)];
    const int lt = sys.local[net.bus_index(br.to_bus)];
    if (!std::binary_search(island.begin(), island.end(), net.bus_index(br.from_bus))) continue;
    for (auto b : island) {
      const int lb = sys.local[b];
      if (lb < 0) continue;
      const double xf = lf >= 0 ? x(lf, lb) : 0.0;
      const double xt = lt >= 0 ? x(lt, lb) : 0.0;
      ptdf(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(b)) = (xf - xt) / br.reactance;
    }
  }
  return ptdf;
}

Eigen::VectorXd applicable_ratings(const NetworkCase& net, const Topology& alive) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(net.branch_count()));
  const bool intact = alive.cast<int>().sum() == static_cast<int>(net.branch_count());
  for (std::size_t k = 0; k < net.branch_count(); ++k)
    r[static_cast<Eigen::Index>(k)] =
        net.branches[k].rating_long_term * (intact ? 1.0 : kShortTermRatingFactor);
  return r;
}

// ---------------------------------------------------------------------------

namespace {

struct IslandDispatch {
  bool feasible = false;
  double objective = 0.0;
  std::vector<double> generation;  // per island generator
  std::vector<double> served;      // per island bus
};

double steepest_segment(const NetworkCase& net) {
  double steepest = 0.0;
  for (const auto& g : net.generators) {
    const double top = g.cost_linear + 2.0 * g.cost_quadratic * g.p_max;
    steepest = std::max({steepest, std::abs(top), std::abs(g.cost_linear)});
  }
  return steepest > 0.0 ? steepest : 1.0;
}

/// Solves one island. `demand` holds MW per bus position.
IslandDispatch solve_island(const NetworkCase& net, const Topology& alive, const Eigen::VectorXd& ratings,
                            const Island& island, const std::vector<std::size_t>& gens,
                            const Eigen::VectorXd& demand, ShedPolicy policy,
                            const DispatchOptions& options, bool feasibility_only) {
  IslandDispatch out;
  out.generation.assign(gens.size(), 0.0);
  out.served.assign(island.size(), 0.0);
  const bool shed_allowed = policy == ShedPolicy::CostBasedShed;

  double island_demand = 0.0;
  for (auto b : island) island_demand += demand[static_cast<Eigen::Index>(b)];
  double island_pmax = 0.0;
  for (auto g : gens) island_pmax += net.generators[g].p_max;
  if (island_pmax <= 0.0) {
    // No generation: only a zero-demand island can be served.
    out.feasible = island_demand <= 1e-9 || shed_allowed;
    if (shed_allowed) {
      const Eigen::VectorXd prio = net.priorities();
      for (auto b : island)
        out.objective += options.shed_cost_weight * steepest_segment(net) *
                         prio[static_cast<Eigen::Index>(b)] * demand[static_cast<Eigen::Index>(b)];
    }
    return out;
  }

  // Columns: generator cost segments, then shed per loaded bus.
  struct Column {
    std::size_t bus;
    double cost;
    double upper;
    double sign;  // +1 generation, +1 shed (both raise the net injection)
  };
  std::vector<Column> columns;
  std::vector<std::pair<std::size_t, std::size_t>> segment_owner;  // (island gen slot, column)
  Eigen::VectorXd fixed = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.bus_count()));
  for (auto b : island) fixed[static_cast<Eigen::Index>(b)] = -demand[static_cast<Eigen::Index>(b)];
  for (std::size_t slot = 0; slot < gens.size(); ++slot) {
    const auto& g = net.generators[gens[slot]];
    const auto bus = net.bus_index(g.bus);
    fixed[static_cast<Eigen::Index>(bus)] += g.p_min;
    const double width = (g.p_max - g.p_min) / kCostSegments;
    if (width <= 0.0) continue;
    for (int s = 0; s < kCostSegments; ++s) {
      const double lo = g.p_min + s * width, hi = lo + width;
      const double cost_lo = g.cost_linear * lo + g.cost_quadratic * lo * lo;
      const double cost_hi = g.cost_linear * hi + g.cost_quadratic * hi * hi;
      segment_owner.emplace_back(slot, columns.size());
      columns.push_back({bus, (cost_hi - cost_lo) / width, width, 1.0});
    }
  }
  const std::size_t first_shed = columns.size();
  if (shed_allowed) {
    const double unit = options.shed_cost_weight * steepest_segment(net);
    for (auto b : island) {
      const double d = demand[static_cast<Eigen::Index>(b)];
      if (d > 0.0) columns.push_back({b, unit * net.buses[b].shed_priority, d, 1.0});
    }
  }

  const Eigen::MatrixXd ptdf = island_ptdf(net, alive, island);
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> rhs;
  std::vector<RowSense> sense;

  // balance: sum(columns) = -sum(fixed)
  Eigen::RowVectorXd balance = Eigen::RowVectorXd::Ones(static_cast<Eigen::Index>(columns.size()));
  rows.push_back(balance);
  rhs.push_back(-fixed.sum());
  sense.push_back(RowSense::Equal);

  for (std::size_t k = 0; k < net.branch_count(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    if (!alive[kk]) continue;
    if (!std::binary_search(island.begin(), island.end(), net.bus_index(net.branches[k].from_bus))) continue;
    Eigen::RowVectorXd coef(static_cast<Eigen::Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c)
      coef[static_cast<Eigen::Index>(c)] = ptdf(kk, static_cast<Eigen::Index>(columns[c].bus));
    const double base_flow = ptdf.row(kk).dot(fixed);
    if (coef.cwiseAbs().maxCoeff() < 1e-12) {
      if (std::abs(base_flow) > ratings[kk] + 1e-9) return out;  // infeasible whatever we do
      continue;
    }
    rows.push_back(coef);
    rhs.push_back(ratings[kk] - base_flow);
    sense.push_back(RowSense::LessEqual);
    rows.push_back(-coef);
    rhs.push_back(ratings[kk] + base_flow);
    sense.push_back(RowSense::LessEqual);
  }

  LinearProgram<double> lp;
  const auto nc = static_cast<Eigen::Index>(columns.size());
  lp.cost.resize(nc);
  lp.upper.resize(nc);
  for (Eigen::Index c = 0; c < nc; ++c) {
    lp.cost[c] = columns[static_cast<std::size_t>(c)].cost;
    lp.upper[c] = columns[static_cast<std::size_t>(c)].upper;
  }
  lp.constraints.resize(static_cast<Eigen::Index>(rows.size()), nc);
  lp.rhs.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    lp.constraints.row(static_cast<Eigen::Index>(r)) = rows[r];
    lp.rhs[static_cast<Eigen::Index>(r)] = rhs[r];
  }
  lp.sense = sense;

  LpOptions lp_options;
  lp_options.feasibility_only = feasibility_only;
  const auto sol = solve_lp(lp, lp_options);
  if (sol.status == LpStatus::Unbounded) throw std::logic_error("dispatch LP unbounded");
  if (sol.status == LpStatus::IterationLimit) throw std::runtime_error("dispatch LP hit iteration limit");
  if (sol.status == LpStatus::Infeasible) {
    if (shed_allowed) throw std::logic_error("cost-based shed dispatch infeasible");
    return out;
  }

  out.feasible = true;
  out.objective = sol.objective;
  for (std::size_t slot = 0; slot < gens.size(); ++slot) out.generation[slot] = net.generators[gens[slot]].p_min;
  for (auto [slot, col] : segment_owner) out.generation[slot] += sol.x[static_cast<Eigen::Index>(col)];
  for (std::size_t i = 0; i < island.size(); ++i) out.served[i] = demand[static_cast<Eigen::Index>(island[i])];
  for (std::size_t c = first_shed; c < columns.size(); ++c) {
    auto pos = std::lower_bound(island.begin(), island.end(), columns[c].bus) - island.begin();
    out.served[static_cast<std::size_t>(pos)] =
        std::max(0.0, out.served[static_cast<std::size_t>(pos)] - sol.x[static_cast<Eigen::Index>(c)]);
  }
  return out;
}

DispatchSolution assemble(const NetworkCase& net, const Topology& alive, std::vector<Island> parts,
                          const std::vector<std::vector<std::size_t>>& gens,
                          const std::vector<IslandDispatch>& results) {
  DispatchSolution sol;
  sol.generation = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.generators.size()));
  sol.served = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.bus_count()));
  sol.feasible = true;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    sol.feasible = sol.feasible && results[k].feasible;
    sol.objective += results[k].objective;
    for (std::size_t slot = 0; slot < gens[k].size(); ++slot)
      sol.generation[static_cast<Eigen::Index>(gens[k][slot])] = results[k].generation[slot];
    for (std::size_t i = 0; i < parts[k].size(); ++i)
      sol.served[static_cast<Eigen::Index>(parts[k][i])] = results[k].served[i];
  }
  Eigen::VectorXd injections = -sol.served;
  for (std::size_t g = 0; g < net.generators.size(); ++g)
    injections[static_cast<Eigen::Index>(net.bus_index(net.generators[g].bus))] +=
        sol.generation[static_cast<Eigen::Index>(g)];
  sol.flows = sol.feasible ? dc_power_flow(net, alive, injections).flows
                           : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.branch_count()));
  sol.islands = std::move(parts);
  return sol;
}

}  // namespace

DispatchSolution dc_opf(const NetworkCase& net, const Topology& alive, const Eigen::VectorXd& ratings,
                        ShedPolicy policy, const DispatchOptions& options) {
  auto parts = islands(net, alive);
  const auto gens = island_generators(net, parts);
  const Eigen::VectorXd demand = net.demand();
  std::vector<IslandDispatch> results;
  results.reserve(parts.size());
  for (std::size_t k = 0; k < parts.size(); ++k)
    results.push_back(solve_island(net, alive, ratings, parts[k], gens[k], demand, policy, options, false));
  auto sol = assemble(net, alive, parts, gens, results);
  for (std::size_t k = 0; k < sol.islands.size(); ++k) {
    double want = 0.0, got = 0.0;
    for (auto b : sol.islands[k]) {
      want += demand[static_cast<Eigen::Index>(b)];
      got += sol.served[static_cast<Eigen::Index>(b)];
    }
    sol.island_gamma.push_back(want > 0.0 ? got / want : 1.0);
  }
  return sol;
}

DispatchSolution emergency_uniform_shed(const NetworkCase& net, const Topology& alive,
                                        const Eigen::VectorXd& ratings, const DispatchOptions& options) {
  auto parts = islands(net, alive);
  const auto gens = island_generators(net, parts);
  const Eigen::VectorXd demand = net.demand();
  std::vector<IslandDispatch> results;
  std::vector<double> gammas;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto scaled = [&](double gamma) {
      Eigen::VectorXd d = demand;
      for (auto b : parts[k]) d[static_cast<Eigen::Index>(b)] *= gamma;
      return d;
    };
    auto full = solve_island(net, alive, ratings, parts[k], gens[k], demand, ShedPolicy::FullService,
                             options, false);
    if (full.feasible) {
      results.push_back(std::move(full));
      gammas.push_back(1.0);
      continue;
    }
    double lo = 0.0, hi = 1.0;
    const bool zero_ok = solve_island(net, alive, ratings, parts[k], gens[k], scaled(0.0),
                                      ShedPolicy::FullService, options, true)
                             .feasible;
    if (zero_ok) {
      while (hi - lo > options.gamma_tolerance) {
        const double mid = 0.5 * (lo + hi);
        if (solve_island(net, alive, ratings, parts[k], gens[k], scaled(mid), ShedPolicy::FullService,
                         options, true)
                .feasible)
          lo = mid;
        else
          hi = mid;
      }
    }
    IslandDispatch chosen;
    if (zero_ok && lo > 0.0) {
      chosen = solve_island(net, alive, ratings, parts[k], gens[k], scaled(lo), ShedPolicy::FullService,
                            options, false);
    }
    if (!chosen.feasible) {
      // Blackout: nothing served, generators off.
      chosen = IslandDispatch{};
      chosen.feasible = true;
      chosen.generation.assign(gens[k].size(), 0.0);
      chosen.served.assign(parts[k].size(), 0.0);
      lo = 0.0;
    }
    results.push_back(std::move(chosen));
    gammas.push_back(lo);
  }
  auto sol = assemble(net, alive, parts, gens, results);
  sol.island_gamma = std::move(gammas);
  return sol;
}

}  // namespace windcascade
