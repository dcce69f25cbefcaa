#include "windcascade/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace windcascade {

double loss_discount(double t) { return std::exp(-kLossDiscountRate * t); }

namespace {

Eigen::VectorXd branch_contributions(const CascadeTrace& trace, const NetworkCase& net) {
  const auto n = static_cast<Eigen::Index>(net.branch_count());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  if (trace.states.empty()) return out;
  if (trace.states.front().size() != n) throw std::invalid_argument("trace does not match the case");
  for (Eigen::Index b = 0; b < n; ++b) {
    for (std::size_t t = 0; t < trace.length(); ++t) {
      if (!trace.states[t][b]) {
        out[b] = net.branches[static_cast<std::size_t>(b)].cost_weight * loss_discount(static_cast<double>(t));
        break;
      }
    }
  }
  return out;
}

Eigen::VectorXd bus_contributions(const CascadeTrace& trace, const NetworkCase& net) {
  const auto n = static_cast<Eigen::Index>(net.bus_count());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  if (trace.served.empty()) return out;
  if (trace.served.front().size() != n) throw std::invalid_argument("trace does not match the case");
  const Eigen::VectorXd priority = net.priorities();
  Eigen::VectorXd previous = Eigen::VectorXd::Zero(n);
  for (std::size_t t = 0; t < trace.length(); ++t) {
    const Eigen::VectorXd unserved = (trace.demand[t] - trace.served[t]).cwiseMax(0.0);
    out += loss_discount(static_cast<double>(t)) * (unserved - previous).cwiseMax(0.0);
    previous = unserved;
  }
  return out.cwiseProduct(priority);
}

}  // namespace

double grid_loss(const CascadeTrace& trace, const NetworkCase& net) { return branch_contributions(trace, net).sum(); }

double consumer_loss(const CascadeTrace& trace, const NetworkCase& net) { return bus_contributions(trace, net).sum(); }

LossReport losses(const CascadeTrace& trace, const NetworkCase& net) {
  LossReport r;
  r.per_branch = branch_contributions(trace, net);
  r.per_bus = bus_contributions(trace, net);
  r.grid_loss = r.per_branch.sum();
  r.consumer_loss = r.per_bus.sum();
  return r;
}

ResilienceReport resilience(const LossReport& pre, const LossReport& post, double delta_w) {
  ResilienceReport r;
  r.pre = pre;
  r.post = post;
  r.delta_w = delta_w;
  r.r_grid = post.grid_loss - pre.grid_loss;
  r.r_load = post.consumer_loss - pre.consumer_loss;
  r.r = r.r_grid + r.r_load;
  return r;
}

ResilienceReport resilience(const PoolSample& sample, const NetworkCase& net) {
  const LossReport pre = losses(sample.before, net);
  if (!sample.after) return resilience(pre, pre, sample.profile.wind_reduction);
  return resilience(pre, losses(sample.full_sequence(), net), sample.profile.wind_reduction);
}

CriticalityReport criticality(const LinkFailureIM& link, const LoadShedIM& load, const std::vector<int>& branch_ids) {
  const Eigen::Index n = link.links();
  if (load.links() != n || link.a11.rows() != n || load.b11.rows() != n || load.b11.cols() != load.buses())
    throw std::invalid_argument("link and load models have mismatched dimensions");
  if (!branch_ids.empty() && static_cast<Eigen::Index>(branch_ids.size()) != n)
    throw std::invalid_argument("branch id list does not match the models");

  CriticalityReport r;
  r.c_d = link.d.cwiseProduct(link.a11 - link.a01).rowwise().sum();
  r.c_e = load.e.transpose().cwiseProduct(load.b11 - load.b01).rowwise().sum();

  auto normalise = [](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    if (v.size() == 0) return v;
    const double lo = v.minCoeff(), hi = v.maxCoeff();
    if (hi - lo <= 0.0) return Eigen::VectorXd::Zero(v.size());
    return (v.array() - lo) / (hi - lo);
  };
  r.combined = normalise(r.c_d) + normalise(r.c_e);

  std::vector<int> ids = branch_ids;
  if (ids.empty()) {
    ids.resize(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 1);
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (r.combined[a] != r.combined[b]) return r.combined[a] > r.combined[b];
    return ids[static_cast<std::size_t>(a)] < ids[static_cast<std::size_t>(b)];
  });
  for (auto k : order) r.ranking.push_back(ids[static_cast<std::size_t>(k)]);
  r.branch_ids = std::move(ids);
  return r;
}

double misclassification(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& observed) {
  if (predicted.rows() != observed.rows() || predicted.cols() != observed.cols())
    throw std::invalid_argument("prediction and observation shapes differ");
  if (predicted.size() == 0) return 0.0;
  return static_cast<double>(((predicted.array() > 0.5) != (observed.array() > 0.5)).count()) /
         static_cast<double>(predicted.size());
}

namespace {

struct Tally {
  double im = 0.0, random = 0.0, uniform = 0.0, entries = 0.0;

  void add_rows(const Eigen::MatrixXd& im_pred, const Eigen::MatrixXd& rnd, const Eigen::MatrixXd& uni,
                const Eigen::MatrixXd& y, Eigen::Index row) {
    const auto truth = y.row(row).array() > 0.5;
    im += static_cast<double>(((im_pred.row(row).array() > 0.5) != truth).count());
    random += static_cast<double>(((rnd.row(row).array() > 0.5) != truth).count());
    uniform += static_cast<double>(((uni.row(row).array() > 0.5) != truth).count());
    entries += static_cast<double>(y.cols());
  }
  MethodErrors rates() const {
    if (entries == 0.0) return {};
    return {im / entries, random / entries, uniform / entries};
  }
};

std::vector<double> loadings_of(const SamplePool& pool) {
  std::vector<double> out;
  for (const auto& s : pool.samples) out.push_back(s.profile.loading_multiplier);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

ErrorRateReport error_rates(const LinkFailureIM& link, const LoadShedIM& load, const SamplePool& pool,
                            std::uint64_t baseline_seed) {
  if (pool.test.empty()) throw std::invalid_argument("pool has an empty test split");
  ErrorRateReport report;
  std::map<double, std::pair<Tally, Tally>> cells;
  std::map<double, std::size_t> samples_per_cell;
  for (auto i : pool.test) ++samples_per_cell[pool.samples[i].profile.loading_multiplier];

  Tally link_total, load_total;
  for (Target target : {Target::Link, Target::Load}) {
    const auto train = collect_observations(pool, pool.train, target);
    const auto test = collect_observations(pool, pool.test, target);
    const Eigen::MatrixXd im = target == Target::Link ? predict_rows(link, test) : predict_rows(load, test);
    if (im.cols() != test.outcomes.cols()) throw std::invalid_argument("model does not match the pool");
    const Eigen::MatrixXd rnd = baseline_predict(Baseline::Random, train, test, baseline_seed);
    const Eigen::MatrixXd uni = baseline_predict(Baseline::Uniform, train, test, baseline_seed);
    Tally& total = target == Target::Link ? link_total : load_total;
    for (Eigen::Index k = 0; k < test.outcomes.rows(); ++k) {
      total.add_rows(im, rnd, uni, test.outcomes, k);
      auto& cell = cells[pool.samples[test.sample[static_cast<std::size_t>(k)]].profile.loading_multiplier];
      (target == Target::Link ? cell.first : cell.second).add_rows(im, rnd, uni, test.outcomes, k);
    }
  }
  report.link = link_total.rates();
  report.load = load_total.rates();
  for (const auto& [c, tallies] : cells)
    report.cells.push_back({c, samples_per_cell[c], tallies.first.rates(), tallies.second.rates()});
  return report;
}

ErrorRateReport loading_cell_error_rates(const SamplePool& pool, std::uint64_t baseline_seed,
                                         const TrainingOptions& options) {
  if (pool.test.empty()) throw std::invalid_argument("pool has an empty test split");
  const LoadBits always_served = always_served_buses(pool);
  ErrorRateReport report;
  for (double c : loadings_of(pool)) {
    std::vector<std::size_t> train, test;
    for (auto i : pool.train)
      if (pool.samples[i].profile.loading_multiplier == c) train.push_back(i);
    for (auto i : pool.test)
      if (pool.samples[i].profile.loading_multiplier == c) test.push_back(i);
    if (train.empty() || test.empty()) continue;
    ErrorCell cell;
    cell.loading = c;
    cell.test_samples = test.size();
    for (Target target : {Target::Link, Target::Load}) {
      const auto tr = collect_observations(pool, train, target);
      const auto te = collect_observations(pool, test, target);
      const Eigen::MatrixXd im = target == Target::Link ? predict_rows(train_link_model(tr, options), te)
                                                        : predict_rows(train_load_model(tr, always_served, options), te);
      MethodErrors e{misclassification(im, te.outcomes),
                     misclassification(baseline_predict(Baseline::Random, tr, te, baseline_seed), te.outcomes),
                     misclassification(baseline_predict(Baseline::Uniform, tr, te, baseline_seed), te.outcomes)};
      (target == Target::Link ? cell.link : cell.load) = e;
    }
    report.cells.push_back(cell);
  }
  if (report.cells.empty()) throw std::invalid_argument("no loading level has both training and test samples");
  const double n = static_cast<double>(report.cells.size());
  for (const auto& cell : report.cells) {
    report.link.im += cell.link.im / n;
    report.link.random += cell.link.random / n;
    report.link.uniform += cell.link.uniform / n;
    report.load.im += cell.load.im / n;
    report.load.random += cell.load.random / n;
    report.load.uniform += cell.load.uniform / n;
  }
  return report;
}

std::vector<ExpectedLoss> expected_losses(const SamplePool& pool, const NetworkCase& net) {
  std::vector<ExpectedLoss> out(net.branch_count());
  for (std::size_t b = 0; b < out.size(); ++b) out[b].branch = net.branches[b].id;
  for (const auto& sample : pool.samples) {
    const auto rep = resilience(sample, net);
    for (int id : sample.profile.initial_contingencies) {
      auto& e = out[net.branch_index(id)];
      ++e.samples;
      e.grid += rep.post.grid_loss;
      e.consumer += rep.post.consumer_loss;
      e.resilience += rep.r;
    }
  }
  for (auto& e : out) {
    if (e.samples == 0) continue;
    const double n = static_cast<double>(e.samples);
    e.grid /= n;
    e.consumer /= n;
    e.resilience /= n;
  }
  return out;
}

}  // namespace windcascade
