#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sb/common.hpp"
#include "sb/error.hpp"
#include "sb/linalg.hpp"
#include "sb/rng.hpp"

namespace sb {

class RewardModel {
 public:
  enum class Kind { Deterministic, UniformInterval, DiscretePmf };

  static RewardModel deterministic(double value);
  static RewardModel uniform(double lo, double hi);
  static RewardModel discrete(std::vector<double> values, std::vector<double> probs);

  Kind kind() const { return kind_; }
  double mean() const;
  double variance() const;
  double sample(Rng& rng) const;

  double support_min() const;
  double support_max() const;
  bool in_support(double r) const;

  // Deterministic: {value}. Uniform: {lo, hi}. Discrete: the atoms.
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& probs() const { return probs_; }

 private:
  RewardModel(Kind kind, std::vector<double> values, std::vector<double> probs);

  Kind kind_;
  std::vector<double> values_;
  std::vector<double> probs_;
  std::vector<double> cumulative_;
};

std::string to_string(RewardModel::Kind kind);

// Sampling-only view of an MRP. Materialized MRPs and procedural families
// (which never build their transition matrix) both implement it.
class TrajectoryModel {
 public:
  virtual ~TrajectoryModel() = default;
  virtual std::size_t num_states() const = 0;
  virtual StateId sample_initial(Rng& rng) const = 0;
  // nullopt means the terminal state.
  virtual std::optional<StateId> sample_next(StateId s, Rng& rng) const = 0;
  virtual double sample_reward(StateId s, Rng& rng) const = 0;
  virtual std::uint64_t fingerprint() const = 0;
};

class Mrp final : public TrajectoryModel {
 public:
  // Shape and sign checks only; use validate() for the model invariants.
  Mrp(Matrix transition, std::vector<RewardModel> rewards, Vector initial);

  std::size_t num_states() const override { return static_cast<std::size_t>(p_.rows()); }
  const Matrix& transition() const { return p_; }
  const std::vector<RewardModel>& rewards() const { return rewards_; }
  const Vector& initial() const { return mu_; }
  Vector mean_rewards() const;
  Vector reward_variances() const;
  double terminal_mass(StateId s) const;

  StateId sample_initial(Rng& rng) const override;
  std::optional<StateId> sample_next(StateId s, Rng& rng) const override;
  double sample_reward(StateId s, Rng& rng) const override;
  std::uint64_t fingerprint() const override { return fingerprint_; }

  Mrp relabeled(const std::vector<StateId>& new_id_of) const;

 private:
  struct Edge {
    StateId to;
    double cumulative;
  };

  Matrix p_;
  std::vector<RewardModel> rewards_;
  Vector mu_;
  std::vector<std::vector<Edge>> rows_;
  std::vector<double> mu_cumulative_;
  std::uint64_t fingerprint_ = 0;
};

struct ValidationIssue {
  ErrorCode code;
  std::string message;
  std::optional<StateId> state;
};

struct ValidationReport {
  bool valid = true;
  std::vector<ValidationIssue> issues;
  std::vector<StateId> unreachable;
  linalg::AbsorptionCertificate absorption;
};

inline constexpr double kRowSumTol = 1e-12;

ValidationReport validate(const Mrp& mrp, std::size_t power_cap = linalg::kDefaultPowerCap);
// Throws the first issue of validate() as an Error.
void require_valid(const Mrp& mrp);

Vector exact_value(const Mrp& mrp);
Vector exact_occupancy(const Mrp& mrp);
Vector one_step_variance(const Mrp& mrp, const Vector& value);
std::vector<StateId> reachable_states(const Mrp& mrp);

struct HorizonProfile {
  std::vector<double> moments;  // E_mu[T^p], p = 1..P_max
  Matrix per_state;             // rows: states, cols: p-1
  double h_estimate = 0.0;      // max over reachable states and p of E_s[T^p]^(1/p) / p
  std::optional<double> h_declared;
  bool declared_holds = true;   // E_s[T^p] <= (p h_declared)^p for all computed p
};

HorizonProfile horizon_profile(const Mrp& mrp, int p_max = 8, std::optional<double> h_declared = std::nullopt);

}  // namespace sb
