#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "windcascade/dcflow.hpp"
#include "windcascade/linear_program.hpp"

using namespace windcascade;

namespace {

void check_dispatch_bounds(const NetworkCase& net, const Topology& alive, const Eigen::VectorXd& ratings,
                           const DispatchSolution& d) {
  const double tol = 1e-6;
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    CHECK(d.generation[static_cast<Eigen::Index>(g)] >= net.generators[g].p_min - tol);
    CHECK(d.generation[static_cast<Eigen::Index>(g)] <= net.generators[g].p_max + tol);
  }
  const Eigen::VectorXd demand = net.demand();
  CHECK((d.served.array() >= -tol).all());
  CHECK((d.served.array() <= demand.array() + tol).all());
  for (Eigen::Index b = 0; b < alive.size(); ++b) {
    if (alive[b]) CHECK(std::abs(d.flows[b]) <= ratings[b] + tol);
    else CHECK(d.flows[b] == 0.0);
  }
}

}  // namespace

TEST_CASE("lp solver") {
  LinearProgram<double> lp;
  lp.cost = Eigen::Vector2d(-1.0, -1.0);
  lp.constraints.resize(2, 2);
  lp.constraints << 1, 2, 3, 1;
  lp.rhs = Eigen::Vector2d(4.0, 6.0);
  lp.sense = {RowSense::LessEqual, RowSense::LessEqual};
  auto sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.x[0] == doctest::Approx(1.6));
  CHECK(sol.x[1] == doctest::Approx(1.2));
  CHECK(sol.objective == doctest::Approx(-2.8));

  lp.upper = Eigen::Vector2d(1.0, 1.0);
  sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(-2.0));

  LinearProgram<double> infeasible;
  infeasible.cost = Eigen::VectorXd::Ones(1);
  infeasible.constraints = Eigen::MatrixXd::Ones(2, 1);
  infeasible.rhs = Eigen::Vector2d(2.0, 1.0);
  infeasible.sense = {RowSense::GreaterEqual, RowSense::LessEqual};
  CHECK(solve_lp(infeasible).status == LpStatus::Infeasible);

  LinearProgram<double> unbounded;
  unbounded.cost = -Eigen::VectorXd::Ones(1);
  unbounded.constraints = Eigen::MatrixXd::Ones(1, 1);
  unbounded.rhs = Eigen::VectorXd::Ones(1);
  unbounded.sense = {RowSense::GreaterEqual};
  CHECK(solve_lp(unbounded).status == LpStatus::Unbounded);

  LinearProgram<double> eq;
  eq.cost = Eigen::Vector2d(1.0, 2.0);
  eq.constraints = Eigen::RowVector2d(1.0, 1.0);
  eq.rhs = Eigen::VectorXd::Constant(1, 3.0);
  eq.sense = {RowSense::Equal};
  sol = solve_lp(eq);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.x[0] == doctest::Approx(3.0));
  CHECK(sol.x[1] == doctest::Approx(0.0));
}

TEST_CASE("islands") {
  const auto net = load_case("ieee30");
  auto alive = all_alive(net);
  auto parts = islands(net, alive);
  REQUIRE(parts.size() == 1);
  CHECK(parts[0].size() == 30);

  const auto two = parse_case_file(fixtures::kTwoBus);
  auto dead = all_alive(two);
  dead[0] = 0;
  CHECK(islands(two, dead).size() == 2);

  // buses 11 and 13 hang off single branches
  for (int id : {13, 16}) alive[static_cast<Eigen::Index>(net.branch_index(id))] = 0;
  auto sizes_of = [&](const Topology& t) {
    std::vector<std::size_t> s;
    for (const auto& island : islands(net, t)) s.push_back(island.size());
    std::sort(s.begin(), s.end());
    return s;
  };
  CHECK(sizes_of(alive) == oracle::component_sizes(net, alive));
  CHECK(sizes_of(alive) == std::vector<std::size_t>{1, 1, 28});

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Topology t = all_alive(net);
    for (Eigen::Index b = 0; b < t.size(); ++b) t[b] = std::bernoulli_distribution(0.7)(rng) ? 1 : 0;
    const auto parts2 = islands(net, t);
    CHECK(sizes_of(t) == oracle::component_sizes(net, t));
    for (std::size_t k = 1; k < parts2.size(); ++k)
      CHECK(net.buses[parts2[k - 1].front()].id < net.buses[parts2[k].front()].id);
  }
}

TEST_CASE("power flow examples") {
  const auto two = parse_case_file(fixtures::kTwoBus);
  auto sol = dc_power_flow(two, all_alive(two));
  CHECK(sol.flows[0] == doctest::Approx(100.0));

  auto tri = fixtures::make_case({{1, 0.0}, {2, 0.0}, {3, 0.0}},
                                 {{1, 2, 0.1, 100.0}, {1, 3, 0.1, 100.0}, {3, 2, 0.1, 100.0}}, {{1, 200.0}});
  Eigen::Vector3d p(90.0, -90.0, 0.0);
  sol = dc_power_flow(tri, all_alive(tri), p);
  CHECK(sol.flows[0] == doctest::Approx(60.0));
  CHECK(sol.flows[1] == doctest::Approx(30.0));
  CHECK(sol.flows[2] == doctest::Approx(30.0));
  CHECK((sol.flows - oracle::dense_flows(tri, all_alive(tri), p)).cwiseAbs().maxCoeff() < 1e-9);

  sol = dc_power_flow(tri, all_alive(tri), Eigen::Vector3d::Zero());
  CHECK(sol.flows.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("generator-less island blacks out") {
  auto tri = fixtures::triangle();
  Topology alive = all_alive(tri);
  alive[0] = 0;
  alive[1] = 0;
  const auto sol = dc_power_flow(tri, alive);
  REQUIRE(sol.islands.size() == 2);
  CHECK(sol.blacked_out[1]);
  CHECK(sol.shed[1] == doctest::Approx(90.0));
  CHECK(sol.flows.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("kcl and superposition on random networks") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> inj(-50.0, 50.0);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 10)(rng);
    const auto net = oracle::random_network(rng, n);
    Topology alive = all_alive(net);
    for (Eigen::Index b = 0; b < alive.size(); ++b) alive[b] = std::bernoulli_distribution(0.8)(rng) ? 1 : 0;
    Eigen::VectorXd p1(n), p2(n);
    for (int i = 0; i < n; ++i) {
      p1[i] = inj(rng);
      p2[i] = inj(rng);
    }
    const auto s1 = dc_power_flow(net, alive, p1);
    const auto s2 = dc_power_flow(net, alive, p2);
    const auto s12 = dc_power_flow(net, alive, p1 + p2);
    CHECK(oracle::kcl_residual(net, s1) <= 1e-8);
    CHECK((s12.flows - s1.flows - s2.flows).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((s1.flows - oracle::dense_flows(net, alive, p1)).cwiseAbs().maxCoeff() <= 1e-8);
    for (Eigen::Index b = 0; b < alive.size(); ++b)
      if (!alive[b]) CHECK(s1.flows[b] == 0.0);
    for (const auto& island : s1.islands) {
      double sum = 0.0;
      for (auto i : island) sum += s1.injections[static_cast<Eigen::Index>(i)];
      CHECK(std::abs(sum) <= 1e-6);
    }
  }
}

TEST_CASE("opf examples") {
  SUBCASE("capacity bound") {
    auto net = fixtures::make_case({{1, 0.0}, {2, 100.0}}, {{1, 2, 0.1, 200.0}}, {{1, 80.0}});
    const auto alive = all_alive(net);
    const auto r = applicable_ratings(net, alive);
    const auto d = dc_opf(net, alive, r, ShedPolicy::CostBasedShed);
    REQUIRE(d.feasible);
    CHECK(d.served[1] == doctest::Approx(80.0));
    CHECK(net.demand()[1] - d.served[1] == doctest::Approx(20.0));
    check_dispatch_bounds(net, alive, r, d);
    CHECK_FALSE(dc_opf(net, alive, r, ShedPolicy::FullService).feasible);
  }
  SUBCASE("line bound") {
    auto net = fixtures::make_case({{1, 0.0}, {2, 100.0}}, {{1, 2, 0.1, 50.0}}, {{1, 200.0}});
    const auto alive = all_alive(net);
    const auto r = applicable_ratings(net, alive);
    const auto d = dc_opf(net, alive, r, ShedPolicy::CostBasedShed);
    CHECK(d.served[1] == doctest::Approx(50.0));
    CHECK(d.flows[0] == doctest::Approx(50.0));
    check_dispatch_bounds(net, alive, r, d);
  }
  SUBCASE("ieee30 full service") {
    const auto net = load_case("ieee30");
    const auto alive = all_alive(net);
    const auto r = applicable_ratings(net, alive);
    const auto d = dc_opf(net, alive, r, ShedPolicy::FullService);
    REQUIRE(d.feasible);
    CHECK(d.generation.sum() == doctest::Approx(net.total_demand()));
    CHECK(d.served.sum() == doctest::Approx(net.total_demand()));
    check_dispatch_bounds(net, alive, r, d);
  }
}

TEST_CASE("applicable ratings") {
  const auto net = load_case("ieee30");
  auto alive = all_alive(net);
  CHECK(applicable_ratings(net, alive)[0] == net.branches[0].rating_long_term);
  alive[3] = 0;
  CHECK(applicable_ratings(net, alive)[0] == doctest::Approx(1.05 * net.branches[0].rating_long_term));
}

TEST_CASE("emergency uniform shed") {
  SUBCASE("capacity ratio") {
    auto net = fixtures::make_case({{1, 0.0}, {2, 100.0}}, {{1, 2, 0.1, 200.0}}, {{1, 80.0}});
    const auto alive = all_alive(net);
    const auto d = emergency_uniform_shed(net, alive, applicable_ratings(net, alive));
    REQUIRE(d.island_gamma.size() == 1);
    CHECK(d.island_gamma[0] == doctest::Approx(0.8).epsilon(1e-4));
    CHECK(d.served[1] == doctest::Approx(80.0).epsilon(1e-3));
  }
  SUBCASE("feasible case is a no-op") {
    const auto net = load_case("ieee30");
    const auto alive = all_alive(net);
    const auto r = applicable_ratings(net, alive);
    const auto d = emergency_uniform_shed(net, alive, r);
    const auto full = dc_opf(net, alive, r, ShedPolicy::FullService);
    CHECK(d.island_gamma[0] == 1.0);
    CHECK((d.generation - full.generation).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((d.served - full.served).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("binding line matches a grid search") {
    auto net = fixtures::make_case({{1, 0.0}, {2, 90.0}, {3, 0.0}},
                                   {{1, 2, 0.1, 40.0}, {1, 3, 0.1, 100.0}, {3, 2, 0.1, 100.0}}, {{1, 200.0}});
    const auto alive = all_alive(net);
    const auto r = applicable_ratings(net, alive);
    double best = 0.0;
    for (int k = 0; k <= 10000; ++k) {
      const double g = k * 1e-4;
      const auto f = oracle::dense_flows(net, alive, Eigen::Vector3d(90.0 * g, -90.0 * g, 0.0));
      if ((f.cwiseAbs().array() <= r.array() + 1e-9).all()) best = g;
    }
    const auto d = emergency_uniform_shed(net, alive, r);
    CHECK(std::abs(d.island_gamma[0] - best) <= 1e-4);
    check_dispatch_bounds(net, alive, r, d);
  }
}

TEST_CASE("cost based shed serves at least the uniform shed") {
  const auto base = load_case("ieee30");
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto net = scale_loading(base, 1.5 + 0.3 * std::uniform_real_distribution<double>()(rng));
    Topology alive = all_alive(net);
    const auto a = std::uniform_int_distribution<int>(0, 40)(rng), b = std::uniform_int_distribution<int>(0, 40)(rng);
    alive[a] = 0;
    alive[b] = 0;
    const auto r = applicable_ratings(net, alive);
    const auto cost = dc_opf(net, alive, r, ShedPolicy::CostBasedShed);
    const auto uniform = emergency_uniform_shed(net, alive, r);
    CHECK(cost.served.sum() >= uniform.served.sum() - 1e-6);
    check_dispatch_bounds(net, alive, r, cost);
    check_dispatch_bounds(net, alive, r, uniform);
  }
}
