#include "sb/sampling.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <thread>
#include <tuple>

namespace sb {

Trajectory sample_trajectory(const TrajectoryModel& model, Rng& rng, std::size_t max_len) {
  if (max_len < 1) throw Error(ErrorCode::InvalidArgument, "max_len must be at least 1");
  Trajectory tr;
  std::optional<StateId> s = model.sample_initial(rng);
  while (s) {
    if (tr.states.size() == max_len) {
      throw Error(ErrorCode::MaxLenExceeded, "trajectory reached max_len = " + std::to_string(max_len));
    }
    tr.states.push_back(*s);
    tr.rewards.push_back(model.sample_reward(*s, rng));
    s = model.sample_next(*s, rng);
  }
  return tr;
}

Dataset generate_dataset(const TrajectoryModel& model, std::size_t n, std::uint64_t seed, std::size_t max_len,
                         unsigned jobs) {
  std::vector<Trajectory> out(n);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng = Rng::stream(seed, i);
      out[i] = sample_trajectory(model, rng, max_len);
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, n / 256))));
  if (jobs == 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(jobs);
    const std::size_t chunk = (n + jobs - 1) / jobs;
    for (unsigned j = 0; j < jobs; ++j) {
      pool.emplace_back([&, j] {
        try {
          work(std::min(n, j * chunk), std::min(n, (j + 1) * chunk));
        } catch (...) {
          errors[j] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return Dataset(std::move(out), seed, model.fingerprint());
}

std::size_t PooledView::size() const {
  std::size_t total = 0;
  for (const auto& tr : data_) total += tr.size();
  return total;
}

std::optional<std::size_t> EmpiricalCounts::index_of(StateId s) const {
  const auto it = std::lower_bound(states.begin(), states.end(), s);
  if (it == states.end() || *it != s) return std::nullopt;
  return static_cast<std::size_t>(it - states.begin());
}

std::vector<StateId> visited_states(TrajectorySpan data) {
  std::vector<StateId> out;
  for (const auto& tr : data) out.insert(out.end(), tr.states.begin(), tr.states.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<double> suffix_sums(const Trajectory& tr) {
  std::vector<double> out(tr.size() + 1, 0.0);
  for (std::size_t t = tr.size(); t-- > 0;) out[t] = out[t + 1] + tr.rewards[t];
  return out;
}

EmpiricalCounts empirical_counts(TrajectorySpan data, const std::optional<Subgraph>& subgraph, std::size_t max_power) {
  EmpiricalCounts c;
  c.states = subgraph ? subgraph->members() : visited_states(data);
  c.n_trajectories = data.size();
  const auto k = static_cast<Eigen::Index>(c.states.size());
  c.visits = Vector::Zero(k);

  std::vector<std::vector<Eigen::Triplet<double>>> triplets(max_power + 1);
  std::vector<long> local;  // per-step tracked index or -1
  for (const auto& tr : data) {
    local.assign(tr.size(), -1);
    for (std::size_t t = 0; t < tr.size(); ++t) {
      if (auto idx = c.index_of(tr.states[t])) local[t] = static_cast<long>(*idx);
    }
    for (std::size_t t = 0; t < tr.size(); ++t) {
      if (local[t] < 0) continue;
      c.visits[local[t]] += 1.0;
      for (std::size_t l = 1; l <= max_power && t + l < tr.size() && local[t + l] >= 0; ++l) {
        triplets[l].emplace_back(local[t], local[t + l], 1.0);
      }
    }
  }
  c.nu_hat = data.empty() ? Vector(Vector::Zero(k)) : Vector(c.visits / static_cast<double>(data.size()));
  c.paths.resize(max_power + 1);
  for (std::size_t l = 0; l <= max_power; ++l) {
    c.paths[l].resize(k, k);
    if (l == 0) {
      for (Eigen::Index i = 0; i < k; ++i) {
        if (c.visits[i] > 0) triplets[0].emplace_back(i, i, c.visits[i]);
      }
    }
    c.paths[l].setFromTriplets(triplets[l].begin(), triplets[l].end());
  }
  c.transitions = max_power >= 1 ? c.paths[1] : SparseCounts(k, k);
  return c;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << "i,t,state,reward\n";
  char buf[64];
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& tr = data.trajectories()[i];
    for (std::size_t t = 0; t < tr.size(); ++t) {
      std::snprintf(buf, sizeof buf, "%.17g", tr.rewards[t]);
      out << i << ',' << t << ',' << tr.states[t] << ',' << buf << '\n';
    }
  }
}

Dataset read_dataset_csv(std::istream& in, std::uint64_t seed, std::uint64_t fingerprint) {
  std::string line;
  std::vector<Trajectory> out;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "i,t,state,reward") throw Error(ErrorCode::ParseError, "dataset CSV header must be i,t,state,reward");
      header_seen = true;
      continue;
    }
    std::size_t fields[3];
    std::size_t pos = 0;
    for (auto& f : fields) {
      const auto comma = line.find(',', pos);
      if (comma == std::string::npos) throw Error(ErrorCode::ParseError, "dataset line " + std::to_string(line_no));
      const auto res = std::from_chars(line.data() + pos, line.data() + comma, f);
      if (res.ec != std::errc() || res.ptr != line.data() + comma) {
        throw Error(ErrorCode::ParseError, "dataset line " + std::to_string(line_no));
      }
      pos = comma + 1;
    }
    double reward = 0.0;
    try {
      std::size_t used = 0;
      reward = std::stod(line.substr(pos), &used);
      if (pos + used != line.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError, "dataset line " + std::to_string(line_no));
    }
    const auto [i, t, s] = std::tuple(fields[0], fields[1], fields[2]);
    if (i != out.size() && i + 1 != out.size()) throw Error(ErrorCode::ParseError, "trajectory ids must be consecutive");
    if (i == out.size()) out.emplace_back();
    if (t != out.back().size()) throw Error(ErrorCode::ParseError, "time steps must be consecutive");
    out.back().states.push_back(static_cast<StateId>(s));
    out.back().rewards.push_back(reward);
  }
  return Dataset(std::move(out), seed, fingerprint);
}

nlohmann::json dataset_header(const Dataset& data) {
  return {{"seed", data.seed()}, {"mrp_fingerprint", data.fingerprint()}, {"n", data.size()}};
}

}  // namespace sb
