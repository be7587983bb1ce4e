#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sb/common.hpp"
#include "sb/estimators.hpp"
#include "sb/mrp.hpp"
#include "sb/rootsa.hpp"
#include "sb/subgraph.hpp"

namespace sb {

struct KnownValue {
  StateId state;
  double value;
};

struct MrpFamily {
  std::string name;
  nlohmann::json params;
  std::shared_ptr<const TrajectoryModel> model;
  std::shared_ptr<const Mrp> materialized;  // null for lazy families too large to build
  StateId start = 0;
  std::vector<KnownValue> values;  // closed-form V* entries
  nlohmann::json facts;            // other closed-form quantities
  std::optional<double> discount;  // transition mass to the terminal state is 1 - discount at every state
};

// k sources (ids 0..k-1, uniform start) feeding a deterministic chain of T-1 states
// (ids k..k+T-2); every reward is uniform on [-1, 1].
MrpFamily layered_mrp(std::size_t k, std::size_t T);
Subgraph layered_sources(std::size_t k);
// Sources plus the first chain state, where all trajectories merge.
Subgraph layered_pooling_subgraph(std::size_t k, std::size_t T);

// State ids: s0 = 0, s_i = i, s_i' = N + i (i = 1..N), s_-1 = 2N + 1.
class TdFailureModel final : public TrajectoryModel {
 public:
  TdFailureModel(std::uint64_t N, double gamma);
  std::size_t num_states() const override { return static_cast<std::size_t>(2 * n_ + 2); }
  StateId sample_initial(Rng&) const override { return 0; }
  std::optional<StateId> sample_next(StateId s, Rng& rng) const override;
  double sample_reward(StateId s, Rng&) const override { return s > n_ && s <= 2 * n_ ? 1.0 : 0.0; }
  std::uint64_t fingerprint() const override { return fingerprint_; }
  std::uint64_t N() const { return n_; }
  double gamma() const { return gamma_; }

 private:
  std::uint64_t n_;
  double gamma_;
  std::uint64_t fingerprint_;
};

inline constexpr std::uint64_t kMaterializeLimit = 2000;

// Materialized only when N <= kMaterializeLimit.
MrpFamily td_failure_mrp(std::uint64_t N, double gamma = 0.5);
// E[gamma^2 Z / ((1 - gamma) M + Z)], the mean of the discounted TD estimate at s0 when no index repeats.
double td_failure_bias_target(double gamma);

// Start uniform on s_0..s_{m-1} (ids 0..m-1); s_j' are ids m..m+N-1.
MrpFamily lower_bound_mrp(std::size_t m, std::size_t N, double q, double epsilon, const std::vector<int>& psi,
                          const std::vector<int>& zeta);

struct RandomMrpOptions {
  std::size_t n_states = 5;
  double edge_prob = 0.4;
  double min_terminal = 0.05;
  std::size_t max_atoms = 3;
  bool acyclic = false;   // edges only to larger ids
  bool start_at_zero = false;
};

// Erdos-Renyi kernel, terminal mass >= min_terminal per row, discrete rewards
// with 1..max_atoms atoms in [-1, 1].
Mrp random_mrp(Rng& rng, const RandomMrpOptions& opts = {});

// Layers of the given widths, edges only from layer l to layer l+1.
Mrp random_layered_dag(Rng& rng, const std::vector<std::size_t>& widths, double edge_prob = 0.6,
                       std::size_t max_atoms = 3);
// Member ids of each layer of random_layered_dag.
std::vector<std::vector<StateId>> layer_members(const std::vector<std::size_t>& widths);

struct EstimatorSpec {
  std::string kind = "subgraph";  // "td", "mc", "subgraph", "rootsa"
  std::optional<Subgraph> subgraph;
  TdOptions td;
  RootSaSettings rootsa;
  std::vector<StateId> states;  // states scored; defaults to the family's known values

  std::string id() const;
};

struct ExperimentRecord {
  std::string family;
  std::string params;
  std::string estimator;
  std::size_t n = 0;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  std::vector<StateId> states;
  std::vector<double> errors;  // estimate - truth
  double runtime_ms = 0.0;
  std::optional<std::string> failure;
};

// Replicate r at grid point n draws its data from Rng::stream(master_seed, n_index * R + r).
// Estimator errors are stored in the record; the sweep continues.
std::vector<ExperimentRecord> run_replicates(const MrpFamily& family, const EstimatorSpec& spec,
                                             const std::vector<std::size_t>& n_grid, std::size_t R,
                                             std::uint64_t master_seed, unsigned jobs = 1);

inline constexpr const char* kRecordHeader = "family,params,estimator,n,replicate,state,error,n_sq_error,runtime_ms";

void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records,
                       const nlohmann::json& config);
// Per (estimator, n, state): mean n*sq-error with a 95% normal interval, and failures.
nlohmann::json summarize_records(const std::vector<ExperimentRecord>& records);

}  // namespace sb
