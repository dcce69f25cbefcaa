#include "windcascade/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "windcascade/rng.hpp"

namespace windcascade {

void PoolConfig::validate() const {
  if (n_samples < 1) throw std::invalid_argument("pool needs at least one sample");
  if (loading_multipliers.empty()) throw std::invalid_argument("pool needs at least one loading multiplier");
  for (double c : loading_multipliers)
    if (!(c > 0.0)) throw std::invalid_argument("loading multipliers must be positive");
  if (wind_fraction < 0.0 || wind_fraction >= 1.0) throw std::invalid_argument("wind fraction must lie in [0, 1)");
  for (double dw : wind_reductions)
    if (dw < 0.1 - 1e-12 || dw > 0.7 + 1e-12) throw std::invalid_argument("wind reductions must lie in [0.1, 0.7]");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train fraction must lie in (0, 1)");
}

std::vector<const CascadeTrace*> PoolSample::traces() const {
  std::vector<const CascadeTrace*> out{&before};
  if (after) out.push_back(&*after);
  return out;
}

CascadeTrace PoolSample::full_sequence() const { return after ? concatenate(before, *after) : before; }

std::vector<BranchPair> admissible_pairs(const NetworkCase& net, bool screen_islanding) {
  std::vector<BranchPair> pairs;
  const auto n = net.branch_count();
  const Eigen::VectorXd demand = net.demand();
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (screen_islanding) {
        Topology alive = all_alive(net);
        alive[static_cast<Eigen::Index>(a)] = 0;
        alive[static_cast<Eigen::Index>(b)] = 0;
        bool ok = true;
        for (const auto& island : islands(net, alive)) {
          double load = 0.0;
          for (auto bus : island) load += demand[static_cast<Eigen::Index>(bus)];
          if (load > 0.0 && !island_has_generation(net, island)) {
            ok = false;
            break;
          }
        }
        if (!ok) continue;
      }
      pairs.emplace_back(net.branches[a].id, net.branches[b].id);
    }
  }
  return pairs;
}

std::vector<BranchPair> draw_contingency_pairs(const NetworkCase& net, std::size_t count, std::uint64_t seed,
                                               bool screen_islanding) {
  const auto universe = admissible_pairs(net, screen_islanding);
  if (universe.empty()) throw std::runtime_error("no admissible contingency pairs");
  std::vector<BranchPair> out;
  out.reserve(count);
  for (std::uint64_t pass = 0; out.size() < count; ++pass) {
    auto order = universe;
    auto rng = SplitMix64::stream(seed, kPairStream + pass);
    rng.shuffle(order);
    for (const auto& p : order) {
      if (out.size() == count) break;
      out.push_back(p);
    }
  }
  return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double train_fraction,
                                                                            std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  auto rng = SplitMix64::stream(seed, kSplitStream);
  rng.shuffle(order);
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n >= 2 ? n - 1 : n);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

namespace {

ScenarioProfile sample_profile(const PoolConfig& config, std::size_t index, const BranchPair& pair) {
  ScenarioProfile p;
  p.loading_multiplier = config.loading_multipliers[index % config.loading_multipliers.size()];
  p.wind_fraction = config.wind_fraction;
  p.initial_contingencies = {pair.first, pair.second};
  if (!config.wind_reductions.empty()) {
    std::vector<double> admissible;
    for (double dw : config.wind_reductions) {
      ScenarioProfile q = p;
      q.wind_reduction = dw;
      if (q.net_multiplier(true) <= kMaxNetMultiplier + 1e-9) admissible.push_back(dw);
    }
    if (admissible.empty()) {
      // Largest reduction that keeps the net load admissible.
      p.wind_reduction = std::max(0.0, kMaxNetMultiplier / p.loading_multiplier - 1.0 + p.wind_fraction);
    } else {
      auto rng = SplitMix64::stream(config.seed, kSampleStream + index);
      p.wind_reduction = admissible[static_cast<std::size_t>(rng.below(admissible.size()))];
    }
  }
  return p;
}

}  // namespace

SamplePool generate_pool(const NetworkCase& net, const PoolConfig& config, const CascadeOptions& options,
                         unsigned threads) {
  config.validate();
  SamplePool pool;
  pool.config = config;
  const auto pairs = draw_contingency_pairs(net, config.n_samples, config.seed, config.screen_islanding);
  pool.samples.resize(config.n_samples);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < config.n_samples; i = next++) {
      PoolSample& s = pool.samples[i];
      s.index = i;
      s.profile = sample_profile(config, i, pairs[i]);
      if (config.wind_reductions.empty()) {
        s.before = run_cascade(net, s.profile, config.policy, options);
        s.blackout_before = s.before.total_blackout();
      } else {
        auto run = run_with_wind_reduction(net, s.profile, config.policy, options);
        s.before = std::move(run.before);
        s.after = std::move(run.after);
        s.blackout_before = run.blackout_before;
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(config.n_samples));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool_threads;
    for (unsigned k = 0; k < threads; ++k) pool_threads.emplace_back(worker);
  }

  std::tie(pool.train, pool.test) = split_indices(config.n_samples, config.train_fraction, config.seed);
  return pool;
}

PoolStatistics pool_statistics(const SamplePool& pool) {
  if (pool.samples.empty()) throw std::invalid_argument("pool statistics of an empty pool");
  const auto& first = pool.samples.front().before;
  const auto n_br = first.states.front().size();
  const auto n_bus = first.demand.front().size();
  PoolStatistics stats;
  stats.samples = pool.samples.size();
  stats.branch_failure_frequency = Eigen::VectorXd::Zero(n_br);
  stats.bus_shed_frequency = Eigen::VectorXd::Zero(n_bus);
  double steps = 0.0;
  for (const auto& s : pool.samples) {
    Eigen::VectorXd failed = Eigen::VectorXd::Zero(n_br);
    Eigen::VectorXd shed = Eigen::VectorXd::Zero(n_bus);
    for (const CascadeTrace* trace : s.traces()) {
      steps += static_cast<double>(trace->length());
      for (std::size_t t = 1; t < trace->length(); ++t)
        for (Eigen::Index k = 0; k < n_br; ++k)
          if (trace->states[t - 1][k] && !trace->states[t][k]) failed[k] = 1.0;
      for (const auto& bits : trace->load_bits)
        for (Eigen::Index b = 0; b < n_bus; ++b)
          if (!bits[b]) shed[b] = 1.0;
    }
    stats.branch_failure_frequency += failed;
    stats.bus_shed_frequency += shed;
  }
  const double n = static_cast<double>(pool.samples.size());
  stats.branch_failure_frequency /= n;
  stats.bus_shed_frequency /= n;
  stats.mean_trace_length = steps / n;
  return stats;
}

}  // namespace windcascade
