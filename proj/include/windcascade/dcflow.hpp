#pragma once

#include <vector>

#include <Eigen/Core>

#include "windcascade/netcase.hpp"

namespace windcascade {

/// Binary alive vector over branches (the network state s[t]).
using Topology = Eigen::Matrix<unsigned char, Eigen::Dynamic, 1>;

inline Topology all_alive(const NetworkCase& net) {
  return Topology::Ones(static_cast<Eigen::Index>(net.branch_count()));
}

/// Connected components of the alive-branch graph. Each island lists bus
/// positions in ascending order; islands are ordered by their smallest bus id.
using Island = std::vector<std::size_t>;
std::vector<Island> islands(const NetworkCase& net, const Topology& alive);

/// Slack for an island: generator bus with the largest p_max, ties by the
/// smallest bus id; the smallest bus id when the island has no generator.
std::size_t island_slack(const NetworkCase& net, const Island& island);
bool island_has_generation(const NetworkCase& net, const Island& island);

struct FlowSolution {
  Eigen::VectorXd angles;      // radians per bus
  Eigen::VectorXd flows;       // MW per branch, 0 on dead branches
  Eigen::VectorXd injections;  // MW per bus, after slack adjustment
  std::vector<Island> islands;
  std::vector<bool> blacked_out;  // per island
  Eigen::VectorXd shed;           // MW of demand dropped in blacked-out islands
};

/// DC power flow with explicit bus injections (MW). Each island's slack
/// absorbs its mismatch; an island that would need a slack but has no
/// generator, or whose reduced susceptance matrix is singular, is blacked out
/// and its withdrawals are reported as shed.
FlowSolution dc_power_flow(const NetworkCase& net, const Topology& alive,
                           const Eigen::VectorXd& injections);
/// Injections are the negated bus demands; slacks supply the balance.
FlowSolution dc_power_flow(const NetworkCase& net, const Topology& alive);

/// Power transfer distribution factors (MW flow per MW injected at a bus,
/// withdrawn at the slack) for the branches and buses of one island.
/// Rows index all branches; only columns of the island's buses are filled.
Eigen::MatrixXd island_ptdf(const NetworkCase& net, const Topology& alive, const Island& island);

// ---------------------------------------------------------------------------
// Optimal dispatch

enum class ShedPolicy { FullService, CostBasedShed };

struct DispatchOptions {
  /// Shed cost per MW relative to the steepest generation cost segment.
  double shed_cost_weight = 1e3;
  /// Tolerance of the uniform-shed bisection.
  double gamma_tolerance = 1e-4;
};

struct DispatchSolution {
  Eigen::VectorXd generation;  // MW per generator
  Eigen::VectorXd served;      // MW per bus
  Eigen::VectorXd flows;       // MW per branch
  double objective = 0.0;
  bool feasible = false;
  std::vector<Island> islands;
  std::vector<double> island_gamma;  // served fraction per island (uniform shed)
};

/// Applicable branch ratings: long-term on an intact network, 1.05x long-term
/// once any branch is out.
Eigen::VectorXd applicable_ratings(const NetworkCase& net, const Topology& alive);
inline constexpr double kShortTermRatingFactor = 1.05;

/// Linear OPF over the alive topology with 3-segment linearised generator
/// costs. FullService forbids shedding and returns feasible=false when the
/// demand cannot be met; CostBasedShed prices shed at the bus priority.
DispatchSolution dc_opf(const NetworkCase& net, const Topology& alive, const Eigen::VectorXd& ratings,
                        ShedPolicy policy, const DispatchOptions& options = {});

/// Serves the largest uniform fraction of each island's demand that a
/// FullService dispatch can carry (bisection on the fraction).
DispatchSolution emergency_uniform_shed(const NetworkCase& net, const Topology& alive,
                                        const Eigen::VectorXd& ratings,
                                        const DispatchOptions& options = {});

}  // namespace windcascade
