#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "windcascade/influence.hpp"

namespace windcascade {

inline constexpr double kLossDiscountRate = 0.2;

/// e^{-0.2 t}
double loss_discount(double t);

struct LossReport {
  double grid_loss = 0.0;
  double consumer_loss = 0.0;
  Eigen::VectorXd per_branch;  // contribution of each branch to grid_loss
  Eigen::VectorXd per_bus;     // contribution of each bus to consumer_loss
};

/// Sum over branches that failed in the trace (t = 0 included) of
/// cost_weight * e^{-0.2 t_b}.
double grid_loss(const CascadeTrace& trace, const NetworkCase& net);

/// Priority-weighted, discounted increase in unserved MW. The unserved
/// load before step 0 is taken as zero, so shedding present at t = 0 is
/// charged at weight 1.
double consumer_loss(const CascadeTrace& trace, const NetworkCase& net);

LossReport losses(const CascadeTrace& trace, const NetworkCase& net);

struct ResilienceReport {
  double r = 0.0;
  double r_grid = 0.0;
  double r_load = 0.0;
  LossReport pre;
  LossReport post;
  double delta_w = 0.0;
};

ResilienceReport resilience(const LossReport& pre, const LossReport& post, double delta_w);

/// pre: the cascade at net load; post: the full sequence through the wind
/// reduction. A sample without a second trace has R = 0.
ResilienceReport resilience(const PoolSample& sample, const NetworkCase& net);

struct CriticalityReport {
  Eigen::VectorXd c_d;       // per branch
  Eigen::VectorXd c_e;       // per branch
  Eigen::VectorXd combined;  // min-max normalised c_d + c_e
  std::vector<int> branch_ids;  // id of each position in the vectors
  std::vector<int> ranking;  // branch ids, most critical first
};

/// c_d(j) = sum_i d(j,i) (a11(j,i) - a01(j,i)),
/// c_e(j) = sum_i e(i,j) (b11(j,i) - b01(j,i)).
/// `branch_ids` defaults to 1..N_br.
CriticalityReport criticality(const LinkFailureIM& link, const LoadShedIM& load,
                              const std::vector<int>& branch_ids = {});

struct MethodErrors {
  double im = 0.0;
  double random = 0.0;
  double uniform = 0.0;
};

struct ErrorCell {
  double loading = 0.0;
  std::size_t test_samples = 0;
  MethodErrors link;
  MethodErrors load;
};

struct ErrorRateReport {
  MethodErrors link;
  MethodErrors load;
  std::vector<ErrorCell> cells;  // by loading multiplier, ascending
};

/// Mean misclassification over every (step, index) entry of the pool's test
/// split. Cells break the same predictions down by loading multiplier.
ErrorRateReport error_rates(const LinkFailureIM& link, const LoadShedIM& load, const SamplePool& pool,
                            std::uint64_t baseline_seed);

/// Trains one pair of models per loading multiplier on that multiplier's
/// share of the split and evaluates it on the matching test samples. The
/// headline rates are the means over cells.
ErrorRateReport loading_cell_error_rates(const SamplePool& pool, std::uint64_t baseline_seed,
                                         const TrainingOptions& options = {});

double misclassification(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& observed);

struct ExpectedLoss {
  int branch = 0;
  std::size_t samples = 0;  // samples whose contingency contains the branch
  double grid = 0.0;
  double consumer = 0.0;
  double resilience = 0.0;
};

/// Pool means of G, L (full sequence) and R conditioned on the branch being
/// one of the initial contingencies. One entry per branch of `net`.
std::vector<ExpectedLoss> expected_losses(const SamplePool& pool, const NetworkCase& net);

}  // namespace windcascade
