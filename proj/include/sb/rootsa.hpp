#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sb/common.hpp"
#include "sb/estimators.hpp"
#include "sb/sampling.hpp"
#include "sb/subgraph.hpp"

namespace sb {

struct RootSaConfig {
  double eta = 0.1;
  std::size_t m = 1;          // trajectories per oracle call
  std::size_t B0 = 2;         // burn-in oracle calls
  std::size_t K_restart = 1;
  std::size_t n_A = 1;        // auxiliary trajectories for the weights
  double c = 1.0;
  double c_prime = 1.0;
  double delta = 0.1;
  bool fitted = false;        // formula values were shrunk to fit the budget

  // Parameter formulas for n trajectories, horizon h and smallest occupancy
  // nu_min. When the formula values need more than n trajectories they are
  // shrunk to fit: n_A <= n/10, at least 64 batches, B0 <= batches/8 and
  // restarts using at most half of the batches.
  static RootSaConfig defaults(std::size_t n, double h, double nu_min, double delta = 0.1, double c = 1.0,
                               double c_prime = 1.0);

  std::size_t required_budget() const { return n_A + 2 * B0 * m * K_restart + m; }
  // Throws InvalidArgument when an invariant is violated.
  void check() const;
};

struct WeightVector {
  std::vector<StateId> states;
  Vector w;
};

// w(s) = 1 / (2 nu_hat(s)) from the auxiliary data; ZeroVisits if some s in G is unvisited.
WeightVector compute_weights(TrajectorySpan aux, const Subgraph& g);

// F(theta) for one mini-batch, stored as its affine sufficient statistics.
class BatchOperator {
 public:
  BatchOperator(TrajectorySpan batch, const Subgraph& g);
  Vector apply(const Vector& theta, const WeightVector& w) const;

 private:
  SubgraphStatistics stats_;
  double batch_size_;
};

Vector stochastic_operator(TrajectorySpan batch, const Vector& theta, const WeightVector& w, const Subgraph& g);

using Oracle = std::function<Vector(const Vector&)>;
using OracleStream = std::function<Oracle()>;
using StepTrace = std::function<void(std::size_t t, const Vector& theta, const Vector& u)>;

// Recursive one-point estimator: B0 burn-in calls at theta0, then
// u_t = (F_t(th_{t-1}) - th_{t-1}) + ((t-1)/t) (u_{t-1} - (F_t(th_{t-2}) - th_{t-2})),
// th_t = th_{t-1} + eta u_t, for t = B0+1..n_steps.
Vector root_sa(const OracleStream& stream, const Vector& theta0, double eta, std::size_t B0, std::size_t n_steps,
               const StepTrace& trace = {});

struct PhaseBudget {
  std::string name;      // "auxiliary", "restart-<k>", "final", "unused"
  std::size_t first = 0; // first trajectory index
  std::size_t count = 0; // trajectories consumed
  std::size_t steps = 0; // oracle calls
};

struct RootSaSettings {
  std::optional<RootSaConfig> config;  // explicit config; otherwise defaults from the data
  std::optional<double> h;             // effective horizon; estimated from trajectory lengths when absent
  double delta = 0.1;
  double c = 1.0;
  double c_prime = 1.0;
};

struct RootSaResult {
  EstimateResult estimate;
  RootSaConfig config;
  std::vector<PhaseBudget> phases;
  WeightVector weights;
  double h_used = 0.0;
  double nu_min_used = 0.0;
};

using PhaseTrace = std::function<void(std::string_view phase, std::size_t t, const Vector& theta)>;

RootSaResult root_sa_with_restarts(TrajectorySpan data, const Subgraph& g, const RootSaSettings& settings = {},
                                   const PhaseTrace& trace = {});

// max_p (mean T^p)^(1/p) / p over the given trajectories, p = 1..p_max.
double horizon_from_lengths(TrajectorySpan data, int p_max = 8);

}  // namespace sb
