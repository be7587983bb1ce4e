#pragma once

#include <Eigen/SparseCore>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <iterator>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "sb/common.hpp"
#include "sb/mrp.hpp"
#include "sb/rng.hpp"
#include "sb/subgraph.hpp"

namespace sb {

inline constexpr std::size_t kDefaultMaxLen = 1'000'000;

struct Trajectory {
  std::vector<StateId> states;
  std::vector<double> rewards;

  std::size_t size() const { return states.size(); }
  bool operator==(const Trajectory&) const = default;
};

using TrajectorySpan = std::span<const Trajectory>;
using SparseCounts = Eigen::SparseMatrix<double, Eigen::RowMajor>;

Trajectory sample_trajectory(const TrajectoryModel& model, Rng& rng, std::size_t max_len = kDefaultMaxLen);

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Trajectory> trajectories, std::uint64_t seed, std::uint64_t fingerprint)
      : trajectories_(std::move(trajectories)), seed_(seed), fingerprint_(fingerprint) {}

  const std::vector<Trajectory>& trajectories() const { return trajectories_; }
  std::size_t size() const { return trajectories_.size(); }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t fingerprint() const { return fingerprint_; }

  TrajectorySpan span() const { return trajectories_; }
  operator TrajectorySpan() const { return trajectories_; }
  TrajectorySpan slice(std::size_t begin, std::size_t count) const { return span().subspan(begin, count); }

 private:
  std::vector<Trajectory> trajectories_;
  std::uint64_t seed_ = 0;
  std::uint64_t fingerprint_ = 0;
};

// Trajectory i is drawn from Rng::stream(seed, i); output does not depend on jobs.
Dataset generate_dataset(const TrajectoryModel& model, std::size_t n, std::uint64_t seed,
                         std::size_t max_len = kDefaultMaxLen, unsigned jobs = 1);

struct SubTrajectory {
  std::size_t trajectory;
  std::size_t offset;
  std::span<const StateId> states;
  std::span<const double> rewards;
};

// Every suffix of every trajectory, in (trajectory, offset) order.
class PooledView {
 public:
  class iterator {
   public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = SubTrajectory;
    using difference_type = std::ptrdiff_t;
    using pointer = void;
    using reference = SubTrajectory;

    iterator() = default;
    iterator(TrajectorySpan data, std::size_t i, std::size_t t) : data_(data), i_(i), t_(t) { skip_empty(); }

    SubTrajectory operator*() const {
      const auto& tr = data_[i_];
      return {i_, t_, std::span<const StateId>(tr.states).subspan(t_), std::span<const double>(tr.rewards).subspan(t_)};
    }
    iterator& operator++() {
      ++t_;
      skip_empty();
      return *this;
    }
    iterator operator++(int) {
      auto copy = *this;
      ++*this;
      return copy;
    }
    bool operator==(const iterator& o) const { return i_ == o.i_ && t_ == o.t_; }

   private:
    void skip_empty() {
      while (i_ < data_.size() && t_ >= data_[i_].size()) {
        ++i_;
        t_ = 0;
      }
    }
    TrajectorySpan data_;
    std::size_t i_ = 0;
    std::size_t t_ = 0;
  };

  explicit PooledView(TrajectorySpan data) : data_(data) {}
  iterator begin() const { return iterator(data_, 0, 0); }
  iterator end() const { return iterator(data_, data_.size(), 0); }
  std::size_t size() const;

 private:
  TrajectorySpan data_;
};

inline PooledView pooled_view(TrajectorySpan data) { return PooledView(data); }

struct EmpiricalCounts {
  std::vector<StateId> states;     // tracked states, sorted; row/column order below
  Vector visits;                   // N_n(s)
  Vector nu_hat;                   // N_n(s) / n
  SparseCounts transitions;        // M_n(s, s') with both ends tracked
  std::vector<SparseCounts> paths; // paths[l]: l-step in-subgraph path counts, paths[0] = diag(N_n)
  std::size_t n_trajectories = 0;

  std::optional<std::size_t> index_of(StateId s) const;
};

// With subgraph == nullopt every visited state is tracked.
EmpiricalCounts empirical_counts(TrajectorySpan data, const std::optional<Subgraph>& subgraph = std::nullopt,
                                 std::size_t max_power = 1);

std::vector<StateId> visited_states(TrajectorySpan data);

// Suffix reward sums: out[t] = sum_{l >= t} rewards[l], with out[size] = 0.
std::vector<double> suffix_sums(const Trajectory& tr);

// CSV records "i,t,state,reward" plus a JSON header sidecar.
void write_dataset_csv(std::ostream& out, const Dataset& data);
Dataset read_dataset_csv(std::istream& in, std::uint64_t seed, std::uint64_t fingerprint);
nlohmann::json dataset_header(const Dataset& data);

}  // namespace sb
