#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sb/common.hpp"
#include "sb/sampling.hpp"
#include "sb/subgraph.hpp"

namespace sb {

struct SolverInfo {
  std::string method = "none";  // "sparse_lu", "neumann", "direct" or "none"
  double residual = 0.0;
  std::size_t neumann_steps = 0;
};

// Values follow `states`. Unvisited states keep value 0 and are absent from `covered`.
struct EstimateResult {
  std::vector<StateId> states;
  Vector values;
  std::vector<StateId> covered;
  SolverInfo solver;
  std::vector<std::string> warnings;
  std::size_t trajectories_used = 0;

  double value(StateId s) const;
  bool is_covered(StateId s) const;
};

struct TdOptions {
  // When set, the discounted form: V(s) = r(s) + discount * E[V(S1) | S0 = s, S1 not terminal].
  std::optional<double> discount;
};

EstimateResult td_estimate(TrajectorySpan data, const TdOptions& opts = {});
EstimateResult mc_estimate(TrajectorySpan data, const std::optional<std::vector<StateId>>& states = std::nullopt);
EstimateResult subgraph_estimate(TrajectorySpan data, const Subgraph& g);

struct FixedPointSolution {
  Vector x;
  SolverInfo info;
};

// Solves x = P_hat x + b for a row-substochastic P_hat.
FixedPointSolution solve_empirical_fixed_point(const SparseCounts& p_hat, const Vector& b, double tol = 1e-12);

// Per-state sufficient statistics of the subgraph fixed point on a data set.
struct SubgraphStatistics {
  Vector visits;       // N(s)
  Vector reward_sum;   // sum of R_t at visits
  Vector exit_sum;     // sum of the suffix after leaving G
  SparseCounts transitions;  // M(s, s') within G
};

SubgraphStatistics subgraph_statistics(TrajectorySpan data, const Subgraph& g);

}  // namespace sb
