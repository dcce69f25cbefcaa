#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "windcascade/metrics.hpp"

using namespace windcascade;

namespace {

NetworkCase two_branch_case() {
  return fixtures::make_case({{1, 0.0}, {2, 100.0}}, {{1, 2, 0.1, 100.0}, {1, 2, 0.1, 50.0}}, {{1, 200.0}});
}

CascadeTrace served_trace(const std::vector<double>& served, double demand) {
  CascadeTrace t;
  for (double s : served) {
    t.states.push_back(Topology::Ones(2));
    t.served.push_back(Eigen::Vector2d(0.0, s));
    t.demand.push_back(Eigen::Vector2d(0.0, demand));
    t.load_bits.push_back(binarize_service(t.served.back(), t.demand.back()));
  }
  return t;
}

LinkFailureIM random_link(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LinkFailureIM m;
  m.a11 = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return u(rng); });
  m.a01 = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return u(rng); });
  m.d = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return u(rng); });
  m.d.array().rowwise() /= m.d.colwise().sum().array();
  m.epsilon = Eigen::VectorXd::Constant(n, 0.5);
  return m;
}

LoadShedIM random_load(std::mt19937_64& rng, int n, int buses) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LoadShedIM m;
  m.b11 = Eigen::MatrixXd::NullaryExpr(n, buses, [&] { return u(rng); });
  m.b01 = Eigen::MatrixXd::NullaryExpr(n, buses, [&] { return u(rng); });
  m.e = Eigen::MatrixXd::NullaryExpr(buses, n, [&] { return u(rng); });
  m.e.array().colwise() /= m.e.rowwise().sum().array();
  m.delta = Eigen::VectorXd::Constant(buses, 0.5);
  m.always_served = LoadBits::Zero(buses);
  return m;
}

}  // namespace

TEST_CASE("grid loss") {
  const auto net = two_branch_case();
  CHECK(grid_loss(served_trace({100, 100}, 100), net) == 0.0);

  auto t = served_trace({100, 100, 100, 100}, 100);
  t.states[0] << 0, 1;
  t.states[1] << 0, 1;
  t.states[2] << 0, 1;
  t.states[3] << 0, 0;
  const auto rep = losses(t, net);
  CHECK(rep.grid_loss == doctest::Approx(1.0 + 0.5 * std::exp(-0.6)));
  CHECK(rep.grid_loss == doctest::Approx(1.27441).epsilon(1e-5));
  CHECK(rep.grid_loss == rep.per_branch.sum());
  CHECK(rep.per_branch[0] == 1.0);

  auto single = served_trace({100}, 100);
  single.states[0] << 0, 1;
  CHECK(grid_loss(single, net) == 1.0);
}

TEST_CASE("consumer loss") {
  auto net = two_branch_case();
  CHECK(consumer_loss(served_trace({100, 100, 100}, 100), net) == 0.0);
  const auto t = served_trace({100, 50, 50}, 100);
  CHECK(consumer_loss(t, net) == doctest::Approx(50.0 * std::exp(-0.2)));
  CHECK(consumer_loss(t, net) == doctest::Approx(40.936).epsilon(1e-4));

  for (auto& b : net.buses) b.shed_priority *= 2.0;
  CHECK(consumer_loss(t, net) == doctest::Approx(2.0 * 50.0 * std::exp(-0.2)));

  // shedding present at t = 0 is charged at weight 1; restored load is free
  CHECK(consumer_loss(served_trace({70, 100, 60}, 100), two_branch_case()) ==
        doctest::Approx(30.0 + 40.0 * std::exp(-0.4)));
}

TEST_CASE("one step later costs e^-0.2 less") {
  const auto net = two_branch_case();
  auto t = served_trace({100, 60, 20}, 100);
  t.states[1] << 1, 0;
  t.states[2] << 0, 0;
  auto shifted = served_trace({100, 100, 60, 20}, 100);
  shifted.states[2] << 1, 0;
  shifted.states[3] << 0, 0;
  const auto a = losses(t, net), b = losses(shifted, net);
  CHECK(b.grid_loss == doctest::Approx(a.grid_loss * std::exp(-0.2)));
  CHECK(b.consumer_loss == doctest::Approx(a.consumer_loss * std::exp(-0.2)));
  CHECK(a.consumer_loss == doctest::Approx(a.per_bus.sum()));
  CHECK((a.per_bus.array() >= 0).all());
}

TEST_CASE("resilience") {
  LossReport pre, post;
  pre.grid_loss = 1.0;
  pre.consumer_loss = 10.0;
  CHECK(resilience(pre, pre, 0.3).r == 0.0);
  post.grid_loss = 1.5;
  post.consumer_loss = 40.0;
  const auto r = resilience(pre, post, 0.3);
  CHECK(r.r_grid == doctest::Approx(0.5));
  CHECK(r.r_load == doctest::Approx(30.0));
  CHECK(r.r == doctest::Approx(30.5));
  CHECK(r.r == r.r_grid + r.r_load);

  PoolSample sample;
  sample.before = served_trace({100}, 100);
  CHECK(resilience(sample, two_branch_case()).r == 0.0);
  sample.after = served_trace({100, 40}, 100);
  CHECK(resilience(sample, two_branch_case()).r_load == doctest::Approx(60.0 * std::exp(-0.4)));
}

TEST_CASE("criticality examples") {
  std::mt19937_64 rng(6);
  auto link = random_link(rng, 4);
  auto load = random_load(rng, 4, 3);
  link.a01 = link.a11;
  CHECK(criticality(link, load).c_d.isZero());

  LinkFailureIM one;
  one.a11 = Eigen::MatrixXd::Ones(1, 1);
  one.a01 = Eigen::MatrixXd::Zero(1, 1);
  one.d = Eigen::MatrixXd::Ones(1, 1);
  one.epsilon = Eigen::VectorXd::Constant(1, 0.5);
  LoadShedIM one_load = random_load(rng, 1, 2);
  CHECK(criticality(one, one_load).c_d[0] == 1.0);

  LinkFailureIM two;
  two.a11.resize(2, 2);
  two.a11 << 0.9, 0.8, 0.7, 0.6;
  two.a01.resize(2, 2);
  two.a01 << 0.2, 0.1, 0.3, 0.4;
  two.d.resize(2, 2);
  two.d << 0.25, 0.5, 0.75, 0.5;
  two.epsilon = Eigen::Vector2d::Constant(0.5);
  LoadShedIM two_load;
  two_load.b11 = Eigen::Vector2d(0.9, 0.8);
  two_load.b01 = Eigen::Vector2d(0.1, 0.3);
  two_load.e = Eigen::RowVector2d(0.4, 0.6);
  two_load.delta = Eigen::VectorXd::Constant(1, 0.5);
  two_load.always_served = LoadBits::Zero(1);
  const auto rep = criticality(two, two_load, {10, 20});
  CHECK(rep.c_d[0] == doctest::Approx(0.25 * 0.7 + 0.5 * 0.7));
  CHECK(rep.c_d[1] == doctest::Approx(0.75 * 0.4 + 0.5 * 0.2));
  CHECK(rep.c_e[0] == doctest::Approx(0.4 * 0.8));
  CHECK(rep.c_e[1] == doctest::Approx(0.6 * 0.5));
  CHECK(rep.combined[0] == doctest::Approx(2.0));
  CHECK(rep.combined[1] == doctest::Approx(0.0));
  CHECK(rep.ranking == std::vector<int>{10, 20});

  CHECK_THROWS_AS(criticality(two, one_load), std::invalid_argument);
  CHECK_THROWS_AS(criticality(two, two_load, {1, 2, 3}), std::invalid_argument);
}

TEST_CASE("criticality ties break by id") {
  LinkFailureIM link;
  link.a11 = Eigen::MatrixXd::Ones(3, 3);
  link.a01 = Eigen::MatrixXd::Ones(3, 3);
  link.d = Eigen::MatrixXd::Constant(3, 3, 1.0 / 3.0);
  link.epsilon = Eigen::VectorXd::Constant(3, 0.5);
  std::mt19937_64 rng(1);
  auto load = random_load(rng, 3, 2);
  load.b01 = load.b11;
  CHECK(criticality(link, load, {7, 3, 5}).ranking == std::vector<int>{3, 5, 7});
}

TEST_CASE("criticality is equivariant under relabeling") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 6, buses = 4;
    const auto link = random_link(rng, n);
    const auto load = random_load(rng, n, buses);
    std::vector<int> ids(n);
    std::iota(ids.begin(), ids.end(), 1);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);

    LinkFailureIM pl = link;
    LoadShedIM pd = load;
    std::vector<int> pids(n);
    for (int a = 0; a < n; ++a) {
      pids[a] = ids[perm[a]];
      for (int b = 0; b < n; ++b) {
        pl.a11(a, b) = link.a11(perm[a], perm[b]);
        pl.a01(a, b) = link.a01(perm[a], perm[b]);
        pl.d(a, b) = link.d(perm[a], perm[b]);
      }
      pd.b11.row(a) = load.b11.row(perm[a]);
      pd.b01.row(a) = load.b01.row(perm[a]);
      pd.e.col(a) = load.e.col(perm[a]);
    }
    const auto base = criticality(link, load, ids);
    const auto moved = criticality(pl, pd, pids);
    for (int a = 0; a < n; ++a) {
      CHECK(moved.c_d[a] == doctest::Approx(base.c_d[perm[a]]));
      CHECK(moved.c_e[a] == doctest::Approx(base.c_e[perm[a]]));
    }
    CHECK(moved.ranking == base.ranking);
    auto sorted = base.ranking;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == ids);
  }
}

TEST_CASE("error rates") {
  // link 2 fails after link 1 in every failing trace; a perfect model exists
  std::vector<CascadeTrace> traces;
  for (int k = 0; k < 30; ++k) {
    if (k % 2) traces.push_back(fixtures::synthetic_trace({"01", "00"}, {"1", "0"}));
    else traces.push_back(fixtures::synthetic_trace({"11"}, {"1"}));
  }
  const auto pool = fixtures::synthetic_pool(traces, {0, 1, 2, 3, 4, 5});
  LinkFailureIM link;
  link.a11 = Eigen::MatrixXd::Ones(2, 2);
  link.a01 = Eigen::MatrixXd::Zero(2, 2);
  link.d = Eigen::Matrix2d::Identity();
  link.d(0, 1) = 1.0;
  link.d(1, 1) = 0.0;
  link.epsilon = Eigen::Vector2d::Constant(0.5);
  LoadShedIM load;
  load.b11 = Eigen::Vector2d(1.0, 1.0);
  load.b01 = Eigen::Vector2d(0.0, 0.0);
  load.e = Eigen::RowVector2d(0.0, 1.0);
  load.delta = Eigen::VectorXd::Constant(1, 0.5);
  load.always_served = LoadBits::Zero(1);
  const auto rep = error_rates(link, load, pool, 1);
  CHECK(rep.link.im == 0.0);
  CHECK(rep.load.im == 0.0);
  CHECK(rep.link.uniform > 0.0);
  CHECK(rep.link.random >= 0.0);
  CHECK(rep.link.random <= 1.0);
  REQUIRE(rep.cells.size() == 1);
  CHECK(rep.cells[0].test_samples == 6);

  auto empty = pool;
  empty.test.clear();
  CHECK_THROWS_AS(error_rates(link, load, empty, 1), std::invalid_argument);
  CHECK(misclassification(Eigen::Matrix2d::Ones(), Eigen::Matrix2d::Identity()) == 0.5);
}

TEST_CASE("expected losses condition on the contingency") {
  const auto net = load_case("ieee30");
  PoolConfig cfg;
  cfg.n_samples = 30;
  cfg.loading_multipliers = {1.2};
  cfg.seed = 4;
  const auto pool = generate_pool(net, cfg);
  const auto expected = expected_losses(pool, net);
  REQUIRE(expected.size() == 41);
  for (const auto& e : expected) {
    double g = 0.0, r = 0.0;
    std::size_t count = 0;
    for (const auto& s : pool.samples) {
      const auto& c = s.profile.initial_contingencies;
      if (std::find(c.begin(), c.end(), e.branch) == c.end()) continue;
      ++count;
      g += losses(s.full_sequence(), net).grid_loss;
      r += resilience(s, net).r;
    }
    CHECK(e.samples == count);
    if (count) {
      CHECK(e.grid == doctest::Approx(g / count));
      CHECK(e.resilience == doctest::Approx(r / count));
    }
  }
}
