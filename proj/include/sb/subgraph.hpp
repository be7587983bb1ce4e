#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sb/common.hpp"
#include "sb/error.hpp"

namespace sb {

// Sorted, duplicate-free set of non-terminal states. Positions in the
// sorted order index every G-local vector and matrix.
class Subgraph {
 public:
  explicit Subgraph(std::vector<StateId> members) : members_(std::move(members)) {
    std::sort(members_.begin(), members_.end());
    members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
    if (members_.empty()) throw Error(ErrorCode::InvalidArgument, "subgraph must be non-empty");
  }

  static Subgraph all(std::size_t n_states) {
    std::vector<StateId> m(n_states);
    for (std::size_t i = 0; i < n_states; ++i) m[i] = static_cast<StateId>(i);
    return Subgraph(std::move(m));
  }

  const std::vector<StateId>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  bool contains(StateId s) const { return std::binary_search(members_.begin(), members_.end(), s); }

  std::optional<std::size_t> position(StateId s) const {
    const auto it = std::lower_bound(members_.begin(), members_.end(), s);
    if (it == members_.end() || *it != s) return std::nullopt;
    return static_cast<std::size_t>(it - members_.begin());
  }

  Subgraph with(StateId s) const {
    auto m = members_;
    m.push_back(s);
    return Subgraph(std::move(m));
  }

  std::string key() const {
    std::string k;
    for (auto s : members_) {
      if (!k.empty()) k += ',';
      k += std::to_string(s);
    }
    return k;
  }

  bool operator==(const Subgraph& other) const { return members_ == other.members_; }

 private:
  std::vector<StateId> members_;
};

}  // namespace sb
