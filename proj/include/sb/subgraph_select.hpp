#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "sb/common.hpp"
#include "sb/mrp.hpp"
#include "sb/sampling.hpp"
#include "sb/subgraph.hpp"
#include "sb/variance_estimation.hpp"

namespace sb {

// Variance at the target state for a candidate subgraph; +inf marks an unusable subgraph.
using VarianceFn = std::function<double(const Subgraph&)>;

// States whose holdout occupancy estimate reaches c1 h^3 log^4(n) / n.
std::vector<StateId> candidate_set(TrajectorySpan holdout, double n, double c1, double h);

struct SelectionRound {
  StateId chosen = 0;
  double before = 0.0;
  double after = 0.0;
  bool accepted = false;
};

struct SelectionTrace {
  std::vector<StateId> candidates;
  std::vector<SelectionRound> rounds;
  std::string stop_reason;  // "no_improvement", "candidates_exhausted", "budget_exceeded"
  std::size_t evaluations = 0;
};

struct SelectionResult {
  Subgraph subgraph;
  double variance = std::numeric_limits<double>::infinity();
  SelectionTrace trace;
  bool budget_exceeded = false;
};

// Greedy growth from {s0}; each round adds the candidate with the lowest variance
// if it strictly improves. Ties go to the lowest state id. At most `budget`
// distinct subgraphs are evaluated.
SelectionResult greedy_select(const std::vector<StateId>& candidates, StateId s0, const VarianceFn& variance_fn,
                              std::size_t budget = 10000);

// Candidate set from the holdout, then greedy search. Requires s0 visited in the holdout.
SelectionResult greedy_select(TrajectorySpan holdout, StateId s0, double n, const VarianceFn& variance_fn,
                              double c1 = 1.0, std::optional<double> h = std::nullopt, std::size_t budget = 10000);

// Exact sandwiched variance at s0; +inf when s0 has zero occupancy.
VarianceFn exact_variance_oracle(const Mrp& mrp, StateId s0);

// Multistage variance estimate on a fixed dataset; +inf when the estimator fails.
VarianceFn data_variance_fn(TrajectorySpan data, StateId s0, VarianceConfig cfg = {});

}  // namespace sb
