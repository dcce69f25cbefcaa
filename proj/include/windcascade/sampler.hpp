#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "windcascade/cascade.hpp"
#include "windcascade/netcase.hpp"

namespace windcascade {

struct PoolConfig {
  std::size_t n_samples = 100;
  std::vector<double> loading_multipliers{1.0};
  double wind_fraction = 0.1;
  /// Candidate reductions; empty runs the pre-reduction cascade only.
  std::vector<double> wind_reductions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  Policy policy = Policy::Exp1;
  std::uint64_t seed = 1;
  double train_fraction = 0.7;
  /// Only draw pairs whose removal leaves a generator in every loaded island.
  bool screen_islanding = true;

  void validate() const;
};

/// One Monte Carlo sample: the cascade at the net load and, when a wind
/// reduction was drawn and the first cascade did not black out, the cascade
/// that follows it.
struct PoolSample {
  std::size_t index = 0;
  ScenarioProfile profile;
  CascadeTrace before;
  std::optional<CascadeTrace> after;
  bool blackout_before = false;

  /// The traces in time order.
  std::vector<const CascadeTrace*> traces() const;
  /// before + after as one sequence (just `before` without a reduction).
  CascadeTrace full_sequence() const;
  bool operator==(const PoolSample&) const = default;
};

struct SamplePool {
  PoolConfig config;
  std::vector<PoolSample> samples;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  /// Content hash of the case the pool was generated on (hex, may be empty).
  std::string case_hash;
};

using BranchPair = std::pair<int, int>;  // branch ids, first < second

/// Every unordered branch pair, optionally screened for generator-less islands.
std::vector<BranchPair> admissible_pairs(const NetworkCase& net, bool screen_islanding);

/// `count` pairs, without replacement within each pass over the admissible
/// set; passes are reshuffled from independent streams of `seed`.
std::vector<BranchPair> draw_contingency_pairs(const NetworkCase& net, std::size_t count, std::uint64_t seed,
                                               bool screen_islanding);

/// Deterministic train/test partition of `n` indices.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double train_fraction,
                                                                            std::uint64_t seed);

/// Generates the pool. Samples are computed in parallel (`threads` = 0 uses
/// the hardware concurrency) and assembled by index.
SamplePool generate_pool(const NetworkCase& net, const PoolConfig& config, const CascadeOptions& options = {},
                         unsigned threads = 0);

struct PoolStatistics {
  std::size_t samples = 0;
  Eigen::VectorXd branch_failure_frequency;  // samples with a post-initial trip of the branch
  Eigen::VectorXd bus_shed_frequency;        // samples with any step of reduced service at the bus
  double mean_trace_length = 0.0;            // steps, before + after
};

PoolStatistics pool_statistics(const SamplePool& pool);

// Stream ids of the pool RNG.
inline constexpr std::uint64_t kPairStream = 0x5041495200000000ULL;
inline constexpr std::uint64_t kSampleStream = 0x53414D5000000000ULL;
inline constexpr std::uint64_t kSplitStream = 0x53504C4954000000ULL;

}  // namespace windcascade
