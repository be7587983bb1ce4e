#include "sb/subgraph_select.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

#include "sb/covariance.hpp"
#include "sb/error.hpp"
#include "sb/rootsa.hpp"

namespace sb {

std::vector<StateId> candidate_set(TrajectorySpan holdout, double n, double c1, double h) {
  if (holdout.empty()) return {};
  const double ln = std::log(std::max(n, 1.0));
  const double threshold = c1 * h * h * h * std::pow(ln, 4) / std::max(n, 1.0);
  const auto counts = empirical_counts(holdout);
  std::vector<StateId> out;
  for (std::size_t i = 0; i < counts.states.size(); ++i) {
    if (counts.nu_hat[static_cast<Eigen::Index>(i)] >= threshold) out.push_back(counts.states[i]);
  }
  return out;
}

SelectionResult greedy_select(const std::vector<StateId>& candidates, StateId s0, const VarianceFn& variance_fn,
                              std::size_t budget) {
  SelectionResult res{Subgraph({s0}), std::numeric_limits<double>::infinity(), {}, false};
  res.trace.candidates = candidates;
  std::sort(res.trace.candidates.begin(), res.trace.candidates.end());

  std::map<std::string, double> cache;
  bool over = false;
  auto eval = [&](const Subgraph& g) -> std::optional<double> {
    const auto key = g.key();
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    if (res.trace.evaluations >= budget) {
      over = true;
      return std::nullopt;
    }
    ++res.trace.evaluations;
    const double v = variance_fn(g);
    cache.emplace(key, v);
    return v;
  };

  while (true) {
    const auto current = eval(res.subgraph);
    if (!current) break;
    res.variance = *current;

    bool found = false;
    StateId best_state = 0;
    double best = std::numeric_limits<double>::infinity();
    for (auto s : res.trace.candidates) {
      if (res.subgraph.contains(s)) continue;
      const auto v = eval(res.subgraph.with(s));
      if (!v) break;
      if (!found || *v < best) {
        found = true;
        best = *v;
        best_state = s;
      }
    }
    if (over) break;
    if (!found) {
      res.trace.stop_reason = "candidates_exhausted";
      return res;
    }
    const bool accept = best < res.variance;
    res.trace.rounds.push_back({best_state, res.variance, best, accept});
    if (!accept) {
      res.trace.stop_reason = "no_improvement";
      return res;
    }
    res.subgraph = res.subgraph.with(best_state);
  }
  res.budget_exceeded = true;
  res.trace.stop_reason = "budget_exceeded";
  return res;
}

SelectionResult greedy_select(TrajectorySpan holdout, StateId s0, double n, const VarianceFn& variance_fn, double c1,
                              std::optional<double> h, std::size_t budget) {
  const auto visited = visited_states(holdout);
  if (!std::binary_search(visited.begin(), visited.end(), s0)) {
    throw Error(ErrorCode::ZeroVisits, "target state not visited in the holdout", s0);
  }
  const double hh = h ? *h : horizon_from_lengths(holdout);
  return greedy_select(candidate_set(holdout, n, c1, hh), s0, variance_fn, budget);
}

VarianceFn exact_variance_oracle(const Mrp& mrp, StateId s0) {
  auto model = std::make_shared<Mrp>(mrp);
  return [model, s0](const Subgraph& g) {
    try {
      return sigma_subgraph(*model, g, CovarianceMethod::Exact).sandwiched_at(s0);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ZeroOccupancy) return std::numeric_limits<double>::infinity();
      throw;
    }
  };
}

VarianceFn data_variance_fn(TrajectorySpan data, StateId s0, VarianceConfig cfg) {
  return [data, s0, cfg](const Subgraph& g) {
    try {
      return variance_estimate(data, g, s0, cfg).value;
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
}

}  // namespace sb
