#include "windcascade/influence.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "windcascade/parallel.hpp"
#include "windcascade/rng.hpp"
#include "windcascade/simplex_projection.hpp"

namespace windcascade {

std::string_view to_string(Target t) { return t == Target::Link ? "link" : "load"; }

Target parse_target(std::string_view text) {
  if (text == "link") return Target::Link;
  if (text == "load") return Target::Load;
  throw std::invalid_argument("unknown target '" + std::string(text) + "' (expected link or load)");
}

Observations collect_observations(const std::vector<const CascadeTrace*>& traces, Target target) {
  std::size_t rows = 0;
  for (const auto* tr : traces) rows += tr->length();
  Observations obs;
  if (traces.empty()) return obs;
  const Eigen::Index n_br = traces.front()->states.front().size();
  const Eigen::Index n_out = target == Target::Link ? n_br : traces.front()->load_bits.front().size();
  obs.inputs.resize(static_cast<Eigen::Index>(rows), n_br);
  obs.outcomes.resize(static_cast<Eigen::Index>(rows), n_out);
  obs.sample.reserve(rows);
  Eigen::Index r = 0;
  for (const auto* tr : traces) {
    const std::size_t T = tr->length();
    for (std::size_t t = 0; t < T; ++t, ++r) {
      obs.inputs.row(r) = tr->states[t].cast<double>().transpose();
      if (target == Target::Link)
        obs.outcomes.row(r) = tr->states[std::min(t + 1, T - 1)].cast<double>().transpose();
      else
        obs.outcomes.row(r) = tr->load_bits[t].cast<double>().transpose();
    }
  }
  return obs;
}

Observations collect_observations(const SamplePool& pool, const std::vector<std::size_t>& indices, Target target) {
  std::vector<const CascadeTrace*> traces;
  std::vector<std::size_t> owners;
  for (auto i : indices)
    for (const auto* tr : pool.samples.at(i).traces()) {
      traces.push_back(tr);
      owners.insert(owners.end(), tr->length(), i);
    }
  Observations obs = collect_observations(traces, target);
  obs.sample = std::move(owners);
  return obs;
}

TransitionMatrices estimate_transitions(const Observations& obs, double alpha) {
  const Eigen::MatrixXd failed = Eigen::MatrixXd::Ones(obs.inputs.rows(), obs.inputs.cols()) - obs.inputs;
  const Eigen::VectorXd alive_count = obs.inputs.colwise().sum().transpose();
  const Eigen::VectorXd failed_count = failed.colwise().sum().transpose();
  TransitionMatrices tm;
  tm.given_alive = (obs.inputs.transpose() * obs.outcomes).array() + alpha;
  tm.given_failed = (failed.transpose() * obs.outcomes).array() + alpha;
  tm.given_alive.array().colwise() /= (alive_count.array() + 2.0 * alpha);
  tm.given_failed.array().colwise() /= (failed_count.array() + 2.0 * alpha);
  return tm;
}

SimplexFit fit_simplex_least_squares(const Eigen::MatrixXd& features, const Eigen::VectorXd& observed,
                                     const SimplexFitOptions& options, bool keep_trace) {
  const Eigen::Index n = features.cols();
  const Eigen::MatrixXd gram = features.transpose() * features;
  const Eigen::VectorXd cross = features.transpose() * observed;
  const double constant = observed.squaredNorm();
  auto objective = [&](const Eigen::VectorXd& w) { return w.dot(gram * w) - 2.0 * cross.dot(w) + constant; };

  SimplexFit fit;
  fit.weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  fit.objective = objective(fit.weights);
  const double lipschitz =
      2.0 * Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  if (!(lipschitz > 0.0) || n == 1) {
    fit.converged = true;
    return fit;
  }
  const double step = 1.0 / lipschitz;
  while (fit.iterations < options.max_iterations) {
    Eigen::VectorXd next = project_to_simplex(fit.weights - step * 2.0 * (gram * fit.weights - cross));
    const double value = objective(next);
    ++fit.iterations;
    const double improvement = fit.objective - value;
    if (value <= fit.objective) {
      fit.weights = std::move(next);
      fit.objective = value;
    }
    if (keep_trace) fit.trace.push_back(fit.objective);
    if (improvement < options.tolerance) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

ThresholdFit fit_threshold(const Eigen::VectorXd& predictions, const Eigen::VectorXd& outcomes) {
  ThresholdFit fit;
  const Eigen::Index n = predictions.size();
  const auto positives = static_cast<std::size_t>((outcomes.array() > 0.5).count());
  if (positives == 0 || positives == static_cast<std::size_t>(n)) {
    fit.degenerate = true;
    fit.value = 0.5;
    fit.errors = static_cast<std::size_t>(
        ((predictions.array() >= 0.5) != (outcomes.array() > 0.5)).count());
    return fit;
  }
  // Distinct predictions with outcome counts.
  std::vector<std::pair<double, bool>> items(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k)
    items[static_cast<std::size_t>(k)] = {std::clamp(predictions[k], 0.0, 1.0), outcomes[k] > 0.5};
  std::sort(items.begin(), items.end());
  std::vector<double> values;
  std::vector<std::size_t> pos_at, neg_at;
  for (const auto& [v, y] : items) {
    if (values.empty() || v != values.back()) {
      values.push_back(v);
      pos_at.push_back(0);
      neg_at.push_back(0);
    }
    (y ? pos_at : neg_at).back() += 1;
  }
  const std::size_t m = values.size();
  const std::size_t negatives = static_cast<std::size_t>(n) - positives;
  // Interval r (0..m): thresholds in (values[r-1], values[r]]; values below
  // index r are predicted 0, the rest 1.
  std::size_t pos_below = 0, neg_below = 0;
  std::size_t best_errors = std::numeric_limits<std::size_t>::max();
  std::size_t best_r = 0;
  for (std::size_t r = 0; r <= m; ++r) {
    if (r > 0) {
      pos_below += pos_at[r - 1];
      neg_below += neg_at[r - 1];
    }
    if (r == m && values.back() >= 1.0) break;  // threshold above 1 is not admissible
    const std::size_t errors = pos_below + (negatives - neg_below);
    if (errors <= best_errors) {
      best_errors = errors;
      best_r = r;
    }
  }
  const double lo = best_r == 0 ? 0.0 : values[best_r - 1];
  const double hi = best_r == m ? 1.0 : values[best_r];
  fit.value = 0.5 * (lo + hi);
  fit.errors = best_errors;
  return fit;
}

Eigen::MatrixXd fit_influence_weights(const Observations& obs, const TransitionMatrices& transitions, Target target,
                                      const LoadBits& always_served, const TrainingOptions& options,
                                      TrainingMetadata* meta) {
  const Eigen::Index n_br = obs.inputs.cols();
  const Eigen::Index n_out = obs.outcomes.cols();
  Eigen::MatrixXd weights(n_br, n_out);
  std::vector<int> iterations(static_cast<std::size_t>(n_out), 0);
  std::vector<char> converged(static_cast<std::size_t>(n_out), 1);

  parallel_for(
      static_cast<std::size_t>(n_out),
      [&](std::size_t idx) {
        const auto i = static_cast<Eigen::Index>(idx);
        std::vector<Eigen::Index> rows;
        const bool fixed_output = target == Target::Load && always_served.size() > 0 && always_served[i];
        if (!fixed_output)
          for (Eigen::Index k = 0; k < obs.inputs.rows(); ++k)
            if (target == Target::Load || obs.inputs(k, i) > 0.5) rows.push_back(k);
        if (rows.empty()) {
          weights.col(i).setConstant(1.0 / static_cast<double>(n_br));
          return;
        }
        Eigen::MatrixXd features(static_cast<Eigen::Index>(rows.size()), n_br);
        Eigen::VectorXd observed(static_cast<Eigen::Index>(rows.size()));
        const Eigen::RowVectorXd alive_p = transitions.given_alive.col(i).transpose();
        const Eigen::RowVectorXd failed_p = transitions.given_failed.col(i).transpose();
        for (std::size_t r = 0; r < rows.size(); ++r) {
          const Eigen::RowVectorXd s = obs.inputs.row(rows[r]);
          features.row(static_cast<Eigen::Index>(r)) =
              s.cwiseProduct(alive_p) + (Eigen::RowVectorXd::Ones(n_br) - s).cwiseProduct(failed_p);
          observed[static_cast<Eigen::Index>(r)] = obs.outcomes(rows[r], i);
        }
        const auto fit = fit_simplex_least_squares(features, observed, options.fit);
        weights.col(i) = fit.weights;
        iterations[idx] = fit.iterations;
        converged[idx] = fit.converged ? 1 : 0;
      },
      options.threads);

  if (meta) {
    meta->iterations = iterations;
    meta->converged.assign(converged.begin(), converged.end());
    meta->observations = static_cast<std::size_t>(obs.inputs.rows());
  }
  return weights;
}

// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd link_probabilities(const LinkFailureIM& m, const Eigen::MatrixXd& states) {
  const Eigen::MatrixXd w11 = m.a11.cwiseProduct(m.d);
  const Eigen::MatrixXd w01 = m.a01.cwiseProduct(m.d);
  const Eigen::MatrixXd failed = Eigen::MatrixXd::Ones(states.rows(), states.cols()) - states;
  return states * w11 + failed * w01;
}

Eigen::MatrixXd load_probabilities(const LoadShedIM& m, const Eigen::MatrixXd& states) {
  const Eigen::MatrixXd w11 = m.b11.cwiseProduct(m.e.transpose());
  const Eigen::MatrixXd w01 = m.b01.cwiseProduct(m.e.transpose());
  const Eigen::MatrixXd failed = Eigen::MatrixXd::Ones(states.rows(), states.cols()) - states;
  return states * w11 + failed * w01;
}

double mismatch_rate(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& observed) {
  if (predicted.size() == 0) return 0.0;
  return static_cast<double>(((predicted.array() > 0.5) != (observed.array() > 0.5)).count()) /
         static_cast<double>(predicted.size());
}

}  // namespace

void fit_thresholds(LinkFailureIM& model, const Observations& train) {
  const Eigen::MatrixXd prob = link_probabilities(model, train.inputs);
  const Eigen::Index n = model.links();
  model.epsilon.resize(n);
  model.meta.threshold_flagged.assign(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> p, y;
    for (Eigen::Index k = 0; k < train.inputs.rows(); ++k) {
      if (train.inputs(k, i) < 0.5) continue;  // masked: already failed
      p.push_back(prob(k, i));
      y.push_back(train.outcomes(k, i));
    }
    auto fit = fit_threshold(Eigen::Map<Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())),
                             Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())));
    model.epsilon[i] = fit.value;
    model.meta.threshold_flagged[static_cast<std::size_t>(i)] = fit.degenerate;
  }
}

void fit_thresholds(LoadShedIM& model, const Observations& train) {
  const Eigen::MatrixXd prob = load_probabilities(model, train.inputs);
  const Eigen::Index n = model.buses();
  model.delta.resize(n);
  model.meta.threshold_flagged.assign(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (model.always_served[i]) {
      model.delta[i] = 0.5;
      continue;
    }
    auto fit = fit_threshold(prob.col(i), train.outcomes.col(i));
    model.delta[i] = fit.value;
    model.meta.threshold_flagged[static_cast<std::size_t>(i)] = fit.degenerate;
  }
}

LinkFailureIM train_link_model(const Observations& train, const TrainingOptions& options) {
  if (train.inputs.rows() == 0) throw std::invalid_argument("no training observations");
  LinkFailureIM model;
  const auto tm = estimate_transitions(train, options.smoothing);
  model.a11 = tm.given_alive;
  model.a01 = tm.given_failed;
  model.d = fit_influence_weights(train, tm, Target::Link, LoadBits{}, options, &model.meta);
  fit_thresholds(model, train);
  model.meta.training_error = mismatch_rate(predict_rows(model, train), train.outcomes);
  return model;
}

LoadShedIM train_load_model(const Observations& train, const LoadBits& always_served, const TrainingOptions& options) {
  if (train.inputs.rows() == 0) throw std::invalid_argument("no training observations");
  LoadShedIM model;
  const auto tm = estimate_transitions(train, options.smoothing);
  model.b11 = tm.given_alive;
  model.b01 = tm.given_failed;
  model.always_served = always_served;
  model.e = fit_influence_weights(train, tm, Target::Load, always_served, options, &model.meta).transpose();
  fit_thresholds(model, train);
  model.meta.training_error = mismatch_rate(predict_rows(model, train), train.outcomes);
  return model;
}

LoadBits always_served_buses(const SamplePool& pool) {
  if (pool.samples.empty()) throw std::invalid_argument("empty pool");
  const auto& d = pool.samples.front().before.demand.front();
  LoadBits mask(d.size());
  for (Eigen::Index b = 0; b < d.size(); ++b) mask[b] = d[b] <= 0.0 ? 1 : 0;
  return mask;
}

LinkFailureIM train_link_model(const SamplePool& pool, const TrainingOptions& options) {
  if (pool.train.empty()) throw std::invalid_argument("pool has an empty training split");
  auto model = train_link_model(collect_observations(pool, pool.train, Target::Link), options);
  model.meta.seed = pool.config.seed;
  return model;
}

LoadShedIM train_load_model(const SamplePool& pool, const TrainingOptions& options) {
  if (pool.train.empty()) throw std::invalid_argument("pool has an empty training split");
  auto model = train_load_model(collect_observations(pool, pool.train, Target::Load), always_served_buses(pool), options);
  model.meta.seed = pool.config.seed;
  return model;
}

PredictionOutcome predict_next_state(const LinkFailureIM& model, const Topology& state) {
  if (state.size() != model.links()) throw std::invalid_argument("state length does not match the model");
  const Eigen::MatrixXd s = state.cast<double>().transpose();
  PredictionOutcome out;
  out.probabilities = link_probabilities(model, s).row(0).transpose();
  out.binarized.resize(state.size());
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    if (!state[i]) out.probabilities[i] = 0.0;
    out.binarized[i] = (state[i] && out.probabilities[i] >= model.epsilon[i]) ? 1 : 0;
  }
  return out;
}

std::vector<Topology> predict_cascade(const LinkFailureIM& model, const Topology& initial) {
  std::vector<Topology> seq{initial};
  while (seq.size() <= static_cast<std::size_t>(model.links())) {
    Topology next = predict_next_state(model, seq.back()).binarized;
    if (next == seq.back()) break;
    seq.push_back(std::move(next));
  }
  return seq;
}

PredictionOutcome predict_load_shed(const LoadShedIM& model, const Topology& state) {
  if (state.size() != model.links()) throw std::invalid_argument("state length does not match the model");
  const Eigen::MatrixXd s = state.cast<double>().transpose();
  PredictionOutcome out;
  out.probabilities = load_probabilities(model, s).row(0).transpose();
  out.binarized.resize(model.buses());
  for (Eigen::Index i = 0; i < model.buses(); ++i) {
    if (model.always_served[i]) out.probabilities[i] = 1.0;
    out.binarized[i] = out.probabilities[i] >= model.delta[i] ? 1 : 0;
  }
  return out;
}

Eigen::MatrixXd predict_rows(const LinkFailureIM& model, const Observations& obs) {
  const Eigen::MatrixXd prob = link_probabilities(model, obs.inputs);
  Eigen::MatrixXd bits(prob.rows(), prob.cols());
  for (Eigen::Index k = 0; k < prob.rows(); ++k)
    for (Eigen::Index i = 0; i < prob.cols(); ++i)
      bits(k, i) = (obs.inputs(k, i) > 0.5 && prob(k, i) >= model.epsilon[i]) ? 1.0 : 0.0;
  return bits;
}

Eigen::MatrixXd predict_rows(const LoadShedIM& model, const Observations& obs) {
  const Eigen::MatrixXd prob = load_probabilities(model, obs.inputs);
  Eigen::MatrixXd bits(prob.rows(), prob.cols());
  for (Eigen::Index k = 0; k < prob.rows(); ++k)
    for (Eigen::Index i = 0; i < prob.cols(); ++i)
      bits(k, i) = (model.always_served[i] || prob(k, i) >= model.delta[i]) ? 1.0 : 0.0;
  return bits;
}

Eigen::MatrixXd baseline_predict(Baseline kind, const Observations& train, const Observations& test,
                                 std::uint64_t seed) {
  const Eigen::RowVectorXd marginal =
      train.outcomes.rows() > 0 ? Eigen::RowVectorXd(train.outcomes.colwise().mean())
                                : Eigen::RowVectorXd::Ones(test.outcomes.cols());
  Eigen::MatrixXd pred(test.outcomes.rows(), test.outcomes.cols());
  if (kind == Baseline::Uniform) {
    const Eigen::RowVectorXd majority = (marginal.array() >= 0.5).cast<double>();
    pred.rowwise() = majority;
    return pred;
  }
  auto rng = SplitMix64::stream(seed, 0);
  for (Eigen::Index k = 0; k < pred.rows(); ++k)
    for (Eigen::Index i = 0; i < pred.cols(); ++i) pred(k, i) = rng.uniform() < marginal[i] ? 1.0 : 0.0;
  return pred;
}

Eigen::MatrixXd baseline_predict(Baseline kind, const SamplePool& pool, Target target, std::uint64_t seed) {
  if (pool.test.empty()) throw std::invalid_argument("pool has an empty test split");
  return baseline_predict(kind, collect_observations(pool, pool.train, target),
                          collect_observations(pool, pool.test, target), seed);
}

}  // namespace windcascade
