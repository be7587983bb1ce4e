#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sb/common.hpp"
#include "sb/rootsa.hpp"
#include "sb/sampling.hpp"
#include "sb/subgraph.hpp"

namespace sb {

struct IndexRange {
  std::size_t first = 0;
  std::size_t count = 0;
};

struct VarianceConfig {
  std::optional<std::size_t> L;  // default ceil(2 h log(h n0))
  std::optional<double> h;       // default: estimated from trajectory lengths
  RootSaSettings rootsa;         // Step I value estimate
};

struct VarianceEstimate {
  std::string method;  // "multistage" or "plugin"
  double value = 0.0;
  std::size_t L = 0;
  std::size_t n0 = 0;
  std::vector<IndexRange> splits;
  std::vector<StateId> states;
  StateId s0 = 0;
  Matrix sigma_hat;
  std::vector<Matrix> p_hat;    // l = 1..L
  std::vector<Matrix> p_check;  // l = 1..L, independent quarter
  Vector v_hat;
  std::vector<std::string> warnings;
};

// P_hat^(l)(s, s') = fraction of visits to s whose next l states stay in G and end at s'.
std::vector<Matrix> transition_power_estimate(TrajectorySpan quarter, const Subgraph& g, std::size_t L,
                                              std::vector<std::string>* warnings = nullptr);

// Per-trajectory residual sums, averaged as an outer product and scaled by the
// occupancy estimate of the same data.
Matrix residual_covariance(TrajectorySpan quarter, const Subgraph& g, const Vector& v_hat);

// [(I + sum p_hat) sigma (I + sum p_check)^T](s0, s0)
double assemble_variance(const std::vector<Matrix>& p_hat, const Matrix& sigma, const std::vector<Matrix>& p_check,
                         std::size_t s0_position);

VarianceEstimate variance_estimate(TrajectorySpan data, const Subgraph& g, StateId s0, const VarianceConfig& cfg = {});

// Single split: plug-in fixed point, residual covariance and (I - P_hat)^-1 on all data.
VarianceEstimate variance_estimate_plugin(TrajectorySpan data, const Subgraph& g, StateId s0);

}  // namespace sb
