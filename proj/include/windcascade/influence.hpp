#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "windcascade/cascade.hpp"
#include "windcascade/sampler.hpp"

namespace windcascade {

enum class Target { Link, Load };

std::string_view to_string(Target t);
Target parse_target(std::string_view text);

/// Paired observations drawn from traces. Row k holds the link state s[t]
/// in `inputs` and the outcome in `outcomes`: s[t+1] for the link target
/// (the terminal state repeats as its own successor), l[t] for the load target.
struct Observations {
  Eigen::MatrixXd inputs;    // K x N_br, entries 0/1
  Eigen::MatrixXd outcomes;  // K x N_out, entries 0/1
  std::vector<std::size_t> sample;  // pool sample index of each row
};

Observations collect_observations(const SamplePool& pool, const std::vector<std::size_t>& indices, Target target);
Observations collect_observations(const std::vector<const CascadeTrace*>& traces, Target target);

/// Empirical conditional probabilities with Laplace smoothing:
/// given_alive(j, i) = P(out_i = 1 | s_j = 1), given_failed(j, i) = P(out_i = 1 | s_j = 0).
struct TransitionMatrices {
  Eigen::MatrixXd given_alive;   // N_br x N_out
  Eigen::MatrixXd given_failed;  // N_br x N_out
};

TransitionMatrices estimate_transitions(const Observations& obs, double alpha = 1.0);

struct SimplexFitOptions {
  double tolerance = 1e-9;  // stop when the objective improves by less
  int max_iterations = 10000;
};

struct SimplexFit {
  Eigen::VectorXd weights;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // objective after each iteration
};

/// Least squares over the simplex: minimise ||y - M w||^2, w >= 0, sum w = 1,
/// by projected gradient with step 1 / L, L = 2 lambda_max(M'M).
SimplexFit fit_simplex_least_squares(const Eigen::MatrixXd& features, const Eigen::VectorXd& observed,
                                     const SimplexFitOptions& options = {}, bool keep_trace = false);

struct ThresholdFit {
  double value = 0.5;
  std::size_t errors = 0;
  bool degenerate = false;  // no positive or no negative example
};

/// Threshold in [0, 1] minimising misclassification of (prediction >= value)
/// against binary outcomes. Scans the sorted distinct predictions; among
/// optimal intervals the highest wins, and its midpoint is returned.
ThresholdFit fit_threshold(const Eigen::VectorXd& predictions, const Eigen::VectorXd& outcomes);

struct TrainingMetadata {
  std::string pool_hash;
  std::uint64_t seed = 0;
  std::size_t observations = 0;
  std::vector<int> iterations;          // per output index
  std::vector<bool> converged;          // per output index
  std::vector<bool> threshold_flagged;  // per output index
  double training_error = 0.0;
};

/// Link-failure model. Column i of `d` holds the weights of every source
/// link j on link i; a11/a01 share the (source, target) layout.
struct LinkFailureIM {
  Eigen::MatrixXd a11, a01, d;
  Eigen::VectorXd epsilon;
  TrainingMetadata meta;

  Eigen::Index links() const { return d.rows(); }
};

/// Load-shed model. Row i of `e` holds the weights of every link on bus i;
/// b11/b01 are (link, bus).
struct LoadShedIM {
  Eigen::MatrixXd b11, b01, e;
  Eigen::VectorXd delta;
  LoadBits always_served;  // zero-demand buses, predicted served
  TrainingMetadata meta;

  Eigen::Index links() const { return e.cols(); }
  Eigen::Index buses() const { return e.rows(); }
};

struct TrainingOptions {
  double smoothing = 1.0;
  SimplexFitOptions fit;
  unsigned threads = 0;
};

/// Influence weights, one simplex fit per output index. Rows where the
/// output is already determined (a failed link, a zero-demand bus) carry no
/// information for the fit and are skipped. Returns N_br x N_out.
Eigen::MatrixXd fit_influence_weights(const Observations& obs, const TransitionMatrices& transitions, Target target,
                                      const LoadBits& always_served, const TrainingOptions& options,
                                      TrainingMetadata* meta = nullptr);

/// Buses with zero demand in the pool; their service bit is fixed at 1.
LoadBits always_served_buses(const SamplePool& pool);

LinkFailureIM train_link_model(const SamplePool& pool, const TrainingOptions& options = {});
LoadShedIM train_load_model(const SamplePool& pool, const TrainingOptions& options = {});
LinkFailureIM train_link_model(const Observations& train, const TrainingOptions& options = {});
LoadShedIM train_load_model(const Observations& train, const LoadBits& always_served,
                            const TrainingOptions& options = {});

/// Refits the thresholds of a model with fitted weights.
void fit_thresholds(LinkFailureIM& model, const Observations& train);
void fit_thresholds(LoadShedIM& model, const Observations& train);

struct PredictionOutcome {
  Eigen::VectorXd probabilities;
  LoadBits binarized;
};

/// One step of the link model; links already failed stay failed and report
/// probability 0.
PredictionOutcome predict_next_state(const LinkFailureIM& model, const Topology& state);
/// Iterates the link model from s0 to its fixpoint; returns s0, s1, ...
std::vector<Topology> predict_cascade(const LinkFailureIM& model, const Topology& initial);
PredictionOutcome predict_load_shed(const LoadShedIM& model, const Topology& state);

/// Binary predictions of the model for every row of `obs`.
Eigen::MatrixXd predict_rows(const LinkFailureIM& model, const Observations& obs);
Eigen::MatrixXd predict_rows(const LoadShedIM& model, const Observations& obs);

enum class Baseline { Random, Uniform };

/// Baseline predictions for the pool's test split: UNIFORM repeats the
/// training majority per index, RANDOM draws each entry from the training
/// marginal with a seeded coin. Rows align with collect_observations(pool, pool.test, target).
Eigen::MatrixXd baseline_predict(Baseline kind, const SamplePool& pool, Target target, std::uint64_t seed);
Eigen::MatrixXd baseline_predict(Baseline kind, const Observations& train, const Observations& test,
                                 std::uint64_t seed);

}  // namespace windcascade
