#include "sb/estimators.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>

#include "sb/error.hpp"

namespace sb {

namespace {

using Index = Eigen::Index;
using Triplet = Eigen::Triplet<double>;

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

std::vector<StateId> covered_of(const std::vector<StateId>& states, const Vector& visits) {
  std::vector<StateId> out;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (visits[static_cast<Index>(i)] > 0) out.push_back(states[i]);
  }
  return out;
}

void warn_unvisited(EstimateResult& res, const Vector& visits) {
  for (std::size_t i = 0; i < res.states.size(); ++i) {
    if (visits[static_cast<Index>(i)] == 0) {
      res.warnings.push_back("ZeroVisits: state " + std::to_string(res.states[i]) + " unvisited, value set to 0");
    }
  }
}

// Rows of M divided by `denominators` (0/0 = 0), times `scale`.
SparseCounts normalize_rows(const SparseCounts& m, const Vector& denominators, double scale) {
  SparseCounts p = m;
  for (Index r = 0; r < p.outerSize(); ++r) {
    for (SparseCounts::InnerIterator it(p, r); it; ++it) {
      it.valueRef() = denominators[r] > 0 ? scale * it.value() / denominators[r] : 0.0;
    }
  }
  return p;
}

Vector divide_or_zero(const Vector& num, const Vector& den) {
  Vector out(num.size());
  for (Index i = 0; i < num.size(); ++i) out[i] = den[i] > 0 ? num[i] / den[i] : 0.0;
  return out;
}

EstimateResult fixed_point_estimate(TrajectorySpan data, const Subgraph& g) {
  const auto stats = subgraph_statistics(data, g);
  const SparseCounts p_hat = normalize_rows(stats.transitions, stats.visits, 1.0);
  const Vector b = divide_or_zero(stats.reward_sum, stats.visits) + divide_or_zero(stats.exit_sum, stats.visits);
  auto sol = solve_empirical_fixed_point(p_hat, b);
  EstimateResult res;
  res.states = g.members();
  res.values = std::move(sol.x);
  res.covered = covered_of(res.states, stats.visits);
  res.solver = sol.info;
  res.trajectories_used = data.size();
  warn_unvisited(res, stats.visits);
  return res;
}

}  // namespace

double EstimateResult::value(StateId s) const {
  const auto it = std::lower_bound(states.begin(), states.end(), s);
  if (it == states.end() || *it != s) return 0.0;
  return values[it - states.begin()];
}

bool EstimateResult::is_covered(StateId s) const { return std::binary_search(covered.begin(), covered.end(), s); }

SubgraphStatistics subgraph_statistics(TrajectorySpan data, const Subgraph& g) {
  const auto k = static_cast<Index>(g.size());
  SubgraphStatistics st;
  st.visits = Vector::Zero(k);
  st.reward_sum = Vector::Zero(k);
  st.exit_sum = Vector::Zero(k);
  std::vector<Triplet> trips;
  std::vector<long> pos;
  for (const auto& tr : data) {
    pos.resize(tr.size());
    for (std::size_t t = 0; t < tr.size(); ++t) {
      const auto p = g.position(tr.states[t]);
      pos[t] = p ? static_cast<long>(*p) : -1;
    }
    double tail = 0.0;  // sum of rewards strictly after t
    for (std::size_t t = tr.size(); t-- > 0;) {
      if (pos[t] >= 0) {
        st.visits[pos[t]] += 1.0;
        st.reward_sum[pos[t]] += tr.rewards[t];
        if (t + 1 < tr.size() && pos[t + 1] >= 0) {
          trips.emplace_back(pos[t], pos[t + 1], 1.0);
        } else {
          st.exit_sum[pos[t]] += tail;
        }
      }
      tail += tr.rewards[t];
    }
  }
  st.transitions.resize(k, k);
  st.transitions.setFromTriplets(trips.begin(), trips.end());
  return st;
}

FixedPointSolution solve_empirical_fixed_point(const SparseCounts& p_hat, const Vector& b, double tol) {
  const Index n = p_hat.rows();
  if (p_hat.cols() != n || b.size() != n) throw Error(ErrorCode::InvalidArgument, "fixed-point system shape mismatch");
  for (Index r = 0; r < n; ++r) {
    double row = 0.0;
    for (SparseCounts::InnerIterator it(p_hat, r); it; ++it) {
      if (it.value() < 0.0) throw Error(ErrorCode::InvalidArgument, "empirical kernel has a negative entry");
      row += it.value();
    }
    if (row > 1.0 + 1e-9) throw Error(ErrorCode::InvalidArgument, "empirical kernel row sum exceeds 1");
  }
  FixedPointSolution sol;
  if (n == 0) {
    sol.x = Vector(0);
    sol.info.method = "none";
    return sol;
  }
  if (p_hat.nonZeros() == 0) {
    sol.x = b;
    sol.info.method = "direct";
    return sol;
  }

  const double scale = std::max(1.0, inf_norm(b));
  Eigen::SparseMatrix<double> a(n, n);
  a.setIdentity();
  a -= Eigen::SparseMatrix<double>(p_hat);
  a.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() == Eigen::Success) {
    Vector x = lu.solve(b);
    const double residual = inf_norm(a * x - b);
    if (lu.info() == Eigen::Success && x.allFinite() && residual <= 1e-9 * scale) {
      sol.x = std::move(x);
      sol.info = {"sparse_lu", residual, 0};
      return sol;
    }
  }

  // Neumann fallback, capped at 10 k0 log(1/tol) steps.
  Vector survival = Vector::Ones(n);
  std::size_t k0 = 0;
  for (std::size_t k = 1, checkpoint = 1; checkpoint <= (std::size_t{1} << 16); ++k) {
    survival = p_hat * survival;
    if (k == checkpoint) {
      if (inf_norm(survival) <= 0.5) {
        k0 = checkpoint;
        break;
      }
      checkpoint *= 2;
    }
  }
  if (k0 == 0) throw Error(ErrorCode::FixedPointNotContractive, "empirical kernel shows no Neumann decay");
  const auto cap = static_cast<std::size_t>(std::ceil(10.0 * static_cast<double>(k0) * std::log(1.0 / tol)));
  Vector x = b;
  for (std::size_t step = 1; step <= cap; ++step) {
    Vector next = p_hat * x + b;
    const double change = inf_norm(next - x);
    x.swap(next);
    if (!x.allFinite()) break;
    if (change <= tol * std::max(1.0, inf_norm(x))) {
      sol.x = x;
      sol.info = {"neumann", inf_norm(x - p_hat * x - b), step};
      return sol;
    }
  }
  throw Error(ErrorCode::FixedPointNotContractive, "Neumann iteration did not converge within its cap");
}

EstimateResult td_estimate(TrajectorySpan data, const TdOptions& opts) {
  const auto visited = visited_states(data);
  if (visited.empty()) {
    EstimateResult empty;
    empty.values = Vector(0);
    return empty;
  }
  const Subgraph all(visited);
  if (!opts.discount) return fixed_point_estimate(data, all);

  const double gamma = *opts.discount;
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error(ErrorCode::InvalidArgument, "discount must lie in [0, 1]");
  const auto stats = subgraph_statistics(data, all);
  Vector continuing = Vector::Zero(stats.visits.size());
  for (Index r = 0; r < stats.transitions.outerSize(); ++r) {
    for (SparseCounts::InnerIterator it(stats.transitions, r); it; ++it) continuing[r] += it.value();
  }
  const SparseCounts p_hat = normalize_rows(stats.transitions, continuing, gamma);
  auto sol = solve_empirical_fixed_point(p_hat, divide_or_zero(stats.reward_sum, stats.visits));
  EstimateResult res;
  res.states = all.members();
  res.values = std::move(sol.x);
  res.covered = covered_of(res.states, stats.visits);
  res.solver = sol.info;
  res.trajectories_used = data.size();
  return res;
}

EstimateResult mc_estimate(TrajectorySpan data, const std::optional<std::vector<StateId>>& states) {
  EstimateResult res;
  res.states = states ? *states : visited_states(data);
  std::sort(res.states.begin(), res.states.end());
  res.states.erase(std::unique(res.states.begin(), res.states.end()), res.states.end());
  const Subgraph lookup = res.states.empty() ? Subgraph({0}) : Subgraph(res.states);
  const auto k = static_cast<Index>(res.states.size());
  Vector visits = Vector::Zero(k);
  Vector sums = Vector::Zero(k);
  for (const auto& tr : data) {
    double tail = 0.0;
    for (std::size_t t = tr.size(); t-- > 0;) {
      tail += tr.rewards[t];
      if (k == 0) continue;
      if (const auto p = lookup.position(tr.states[t])) {
        visits[static_cast<Index>(*p)] += 1.0;
        sums[static_cast<Index>(*p)] += tail;
      }
    }
  }
  res.values = divide_or_zero(sums, visits);
  res.covered = covered_of(res.states, visits);
  res.trajectories_used = data.size();
  if (states) warn_unvisited(res, visits);
  return res;
}

EstimateResult subgraph_estimate(TrajectorySpan data, const Subgraph& g) { return fixed_point_estimate(data, g); }

}  // namespace sb
