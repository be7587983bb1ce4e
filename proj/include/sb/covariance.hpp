#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sb/common.hpp"
#include "sb/mrp.hpp"
#include "sb/subgraph.hpp"

namespace sb {

enum class CovarianceMethod { Exact, TruncatedDp, MonteCarloOracle };
std::string to_string(CovarianceMethod method);

struct TruncationOptions {
  double tail_tol = 1e-10;
  std::size_t max_horizon = 1'000'000;
};

// lambda: per-trajectory covariance of the summed noise terms;
// sigma = D_nu^-1 lambda D_nu^-1; sandwiched = asymptotic covariance of the
// estimator itself. Rows and columns follow `states`.
struct CovarianceReport {
  std::vector<StateId> states;
  Vector occupancy;
  Matrix lambda;
  Matrix sigma;
  Matrix sandwiched;

  // Subgraph reports only: the bootstrap part X and the rollout part Y.
  Matrix lambda_x;
  Matrix lambda_y;
  Matrix sigma_x;
  Matrix sigma_y;

  CovarianceMethod method = CovarianceMethod::Exact;
  std::size_t horizon = 0;     // TruncatedDp
  double tail_bound = 0.0;     // TruncatedDp
  std::size_t n_sim = 0;       // MonteCarloOracle
  Matrix stderr_matrix;        // MonteCarloOracle, entrywise stderr of lambda

  std::optional<std::size_t> position(StateId s) const;
  // Throws ZeroOccupancy when s is not covered by the report.
  double sandwiched_at(StateId s) const;
};

CovarianceReport sigma_td(const Mrp& mrp);
CovarianceReport sigma_mc(const Mrp& mrp, CovarianceMethod method = CovarianceMethod::TruncatedDp,
                          const TruncationOptions& opts = {});
CovarianceReport sigma_subgraph(const Mrp& mrp, const Subgraph& g,
                                CovarianceMethod method = CovarianceMethod::TruncatedDp,
                                const TruncationOptions& opts = {});
CovarianceReport sigma_subgraph_transient(const Mrp& mrp, const Subgraph& g);

bool check_transient(const Mrp& mrp, const Subgraph& g);

// sum_{s'} E[N(s') | S0 = s]^2 sigma^2(s') / nu(s'), the scalar TD variance at s.
double td_variance_via_visits(const Mrp& mrp, StateId s);

// Simulated lambda with exact V* and exact occupancy; method MonteCarloOracle.
CovarianceReport simulate_subgraph_covariance(const Mrp& mrp, const Subgraph& g, std::size_t n_sim,
                                              std::uint64_t seed);

struct RefinedDiagonal {
  StateId state = 0;
  double occupancy = 0.0;
  double mean_exits = 0.0;        // E[K]
  double mean_exits_sq = 0.0;     // E[K^2]
  double loop_cubic = 0.0;        // E[(K-1) K (2K-1)]
  double loop_pairs = 0.0;        // E[K (K-1)]
  double nu_loop = 0.0;
  double nu_out = 0.0;
  double sigma2_loop = 0.0;
  double sigma2_out = 0.0;
  double lambda = 0.0;            // assembled diagonal entry
  double lambda_stderr = 0.0;
  double sigma = 0.0;             // lambda / nu^2
  double sigma_stderr = 0.0;
  std::size_t n_sim = 0;
};

RefinedDiagonal refined_diagonal_oracle(const Mrp& mrp, const Subgraph& g, StateId s, std::size_t n_sim,
                                        std::uint64_t seed);

struct ExitDiagnostic {
  StateId state = 0;
  double one_step_variance = 0.0;
  double occupancy = 0.0;
  double exit_probability = 0.0;  // includes the terminal mass
  double variance_over_occupancy = 0.0;
  double exit_over_occupancy = 0.0;
};

std::vector<ExitDiagnostic> exit_diagnostics(const Mrp& mrp, const Subgraph& g);

// min eigenvalue of 2 lambda_x + 2 lambda_y - lambda, divided by trace(lambda) when positive.
double psd_domination_margin(const CovarianceReport& subgraph_report);

}  // namespace sb
