#include "sb/mrp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <numeric>


namespace sb {

namespace {

class Fnv1a {
 public:
  void add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h_ ^= (v >> (8 * i)) & 0xffU;
      h_ *= 0x100000001b3ULL;
    }
  }
  void add(double d) { add(std::bit_cast<std::uint64_t>(d)); }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

// ---- RewardModel ----

RewardModel::RewardModel(Kind kind, std::vector<double> values, std::vector<double> probs)
    : kind_(kind), values_(std::move(values)), probs_(std::move(probs)) {
  if (kind_ == Kind::DiscretePmf) {
    cumulative_.resize(probs_.size());
    std::partial_sum(probs_.begin(), probs_.end(), cumulative_.begin());
  }
}

RewardModel RewardModel::deterministic(double value) {
  if (!std::isfinite(value)) throw Error(ErrorCode::InvalidArgument, "reward value must be finite");
  return RewardModel(Kind::Deterministic, {value}, {1.0});
}

RewardModel RewardModel::uniform(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) {
    throw Error(ErrorCode::InvalidArgument, "uniform reward needs finite lo <= hi");
  }
  return RewardModel(Kind::UniformInterval, {lo, hi}, {});
}

RewardModel RewardModel::discrete(std::vector<double> values, std::vector<double> probs) {
  if (values.empty() || values.size() != probs.size()) {
    throw Error(ErrorCode::InvalidArgument, "discrete reward needs matching non-empty values and probs");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) || !(probs[i] >= 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "discrete reward atoms must be finite with non-negative mass");
    }
    total += probs[i];
  }
  if (std::fabs(total - 1.0) > 1e-12) throw Error(ErrorCode::InvalidArgument, "discrete reward probabilities must sum to 1");
  return RewardModel(Kind::DiscretePmf, std::move(values), std::move(probs));
}

double RewardModel::mean() const {
  switch (kind_) {
    case Kind::Deterministic: return values_[0];
    case Kind::UniformInterval: return 0.5 * (values_[0] + values_[1]);
    case Kind::DiscretePmf: {
      double m = 0.0;
      for (std::size_t i = 0; i < values_.size(); ++i) m += probs_[i] * values_[i];
      return m;
    }
  }
  return 0.0;
}

double RewardModel::variance() const {
  switch (kind_) {
    case Kind::Deterministic: return 0.0;
    case Kind::UniformInterval: {
      const double w = values_[1] - values_[0];
      return w * w / 12.0;
    }
    case Kind::DiscretePmf: {
      const double m = mean();
      double v = 0.0;
      for (std::size_t i = 0; i < values_.size(); ++i) v += probs_[i] * (values_[i] - m) * (values_[i] - m);
      return v;
    }
  }
  return 0.0;
}

double RewardModel::sample(Rng& rng) const {
  switch (kind_) {
    case Kind::Deterministic: return values_[0];
    case Kind::UniformInterval: return values_[0] + (values_[1] - values_[0]) * rng.uniform();
    case Kind::DiscretePmf: {
      const double u = rng.uniform() * cumulative_.back();
      const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
      const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), values_.size() - 1);
      return values_[idx];
    }
  }
  return 0.0;
}

double RewardModel::support_min() const { return *std::min_element(values_.begin(), values_.end()); }
double RewardModel::support_max() const { return *std::max_element(values_.begin(), values_.end()); }

bool RewardModel::in_support(double r) const {
  switch (kind_) {
    case Kind::Deterministic: return r == values_[0];
    case Kind::UniformInterval: return r >= values_[0] && r <= values_[1];
    case Kind::DiscretePmf: return std::find(values_.begin(), values_.end(), r) != values_.end();
  }
  return false;
}

std::string to_string(RewardModel::Kind kind) {
  switch (kind) {
    case RewardModel::Kind::Deterministic: return "deterministic";
    case RewardModel::Kind::UniformInterval: return "uniform";
    case RewardModel::Kind::DiscretePmf: return "discrete";
  }
  return "unknown";
}

// ---- Mrp ----

Mrp::Mrp(Matrix transition, std::vector<RewardModel> rewards, Vector initial)
    : p_(std::move(transition)), rewards_(std::move(rewards)), mu_(std::move(initial)) {
  const auto n = p_.rows();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "MRP needs at least one state");
  if (p_.cols() != n) throw Error(ErrorCode::InvalidArgument, "transition matrix must be square");
  if (static_cast<Eigen::Index>(rewards_.size()) != n) throw Error(ErrorCode::InvalidArgument, "one reward model per state");
  if (mu_.size() != n) throw Error(ErrorCode::InvalidArgument, "initial distribution has wrong length");
  for (Eigen::Index i = 0; i < p_.size(); ++i) {
    const double v = p_.data()[i];
    if (!std::isfinite(v) || v < 0.0) throw Error(ErrorCode::InvalidArgument, "transition entries must be finite and non-negative");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(mu_[i]) || mu_[i] < 0.0) throw Error(ErrorCode::InvalidArgument, "initial mass must be non-negative");
  }

  rows_.resize(static_cast<std::size_t>(n));
  for (Eigen::Index s = 0; s < n; ++s) {
    double acc = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (p_(s, t) > 0.0) {
        acc += p_(s, t);
        rows_[static_cast<std::size_t>(s)].push_back({static_cast<StateId>(t), acc});
      }
    }
  }
  mu_cumulative_.resize(static_cast<std::size_t>(n));
  std::partial_sum(mu_.data(), mu_.data() + n, mu_cumulative_.begin());

  Fnv1a h;
  h.add(static_cast<std::uint64_t>(n));
  for (Eigen::Index i = 0; i < p_.size(); ++i) h.add(p_.data()[i]);
  for (const auto& r : rewards_) {
    h.add(static_cast<std::uint64_t>(r.kind()));
    for (double v : r.values()) h.add(v);
    for (double v : r.probs()) h.add(v);
  }
  for (Eigen::Index i = 0; i < n; ++i) h.add(mu_[i]);
  fingerprint_ = h.value();
}

Vector Mrp::mean_rewards() const {
  Vector r(p_.rows());
  for (Eigen::Index s = 0; s < r.size(); ++s) r[s] = rewards_[static_cast<std::size_t>(s)].mean();
  return r;
}

Vector Mrp::reward_variances() const {
  Vector r(p_.rows());
  for (Eigen::Index s = 0; s < r.size(); ++s) r[s] = rewards_[static_cast<std::size_t>(s)].variance();
  return r;
}

double Mrp::terminal_mass(StateId s) const { return std::max(0.0, 1.0 - p_.row(s).sum()); }

StateId Mrp::sample_initial(Rng& rng) const {
  const double u = rng.uniform() * mu_cumulative_.back();
  const auto it = std::upper_bound(mu_cumulative_.begin(), mu_cumulative_.end(), u);
  auto idx = static_cast<std::size_t>(it - mu_cumulative_.begin());
  if (idx >= mu_cumulative_.size()) idx = mu_cumulative_.size() - 1;
  // Skip zero-mass states that share the cumulative value.
  while (mu_[static_cast<Eigen::Index>(idx)] == 0.0 && idx + 1 < mu_cumulative_.size()) ++idx;
  return static_cast<StateId>(idx);
}

std::optional<StateId> Mrp::sample_next(StateId s, Rng& rng) const {
  const auto& row = rows_[s];
  const double u = rng.uniform();
  const auto it = std::upper_bound(row.begin(), row.end(), u, [](double x, const Edge& e) { return x < e.cumulative; });
  if (it == row.end()) return std::nullopt;
  return it->to;
}

double Mrp::sample_reward(StateId s, Rng& rng) const { return rewards_[s].sample(rng); }

Mrp Mrp::relabeled(const std::vector<StateId>& new_id_of) const {
  const auto n = p_.rows();
  if (static_cast<Eigen::Index>(new_id_of.size()) != n) throw Error(ErrorCode::InvalidArgument, "relabeling has wrong length");
  Matrix p(n, n);
  std::vector<RewardModel> rewards(rewards_);
  Vector mu(n);
  for (Eigen::Index s = 0; s < n; ++s) {
    const auto ns = new_id_of[static_cast<std::size_t>(s)];
    mu[ns] = mu_[s];
    rewards[ns] = rewards_[static_cast<std::size_t>(s)];
    for (Eigen::Index t = 0; t < n; ++t) p(ns, new_id_of[static_cast<std::size_t>(t)]) = p_(s, t);
  }
  return Mrp(std::move(p), std::move(rewards), std::move(mu));
}

// ---- validation and exact solvers ----

std::vector<StateId> reachable_states(const Mrp& mrp) {
  const auto n = mrp.num_states();
  std::vector<char> seen(n, 0);
  std::deque<StateId> queue;
  for (std::size_t s = 0; s < n; ++s) {
    if (mrp.initial()[static_cast<Eigen::Index>(s)] > 0.0) {
      seen[s] = 1;
      queue.push_back(static_cast<StateId>(s));
    }
  }
  while (!queue.empty()) {
    const StateId s = queue.front();
    queue.pop_front();
    for (std::size_t t = 0; t < n; ++t) {
      if (!seen[t] && mrp.transition()(s, static_cast<Eigen::Index>(t)) > 0.0) {
        seen[t] = 1;
        queue.push_back(static_cast<StateId>(t));
      }
    }
  }
  std::vector<StateId> out;
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) out.push_back(static_cast<StateId>(s));
  }
  return out;
}

ValidationReport validate(const Mrp& mrp, std::size_t power_cap) {
  ValidationReport rep;
  const auto n = mrp.num_states();
  const auto& p = mrp.transition();
  for (std::size_t s = 0; s < n; ++s) {
    const double row = p.row(static_cast<Eigen::Index>(s)).sum();
    if (row > 1.0 + kRowSumTol) {
      rep.issues.push_back({ErrorCode::RowSumExceedsOne, "row sum " + std::to_string(row) + " exceeds 1",
                            static_cast<StateId>(s)});
    }
    const auto& r = mrp.rewards()[s];
    if (r.support_min() < -1.0 || r.support_max() > 1.0) {
      rep.issues.push_back({ErrorCode::RewardOutOfBounds, "reward support leaves [-1, 1]", static_cast<StateId>(s)});
    }
  }
  const double mu_total = mrp.initial().sum();
  if (std::fabs(mu_total - 1.0) > 1e-12) {
    rep.issues.push_back({ErrorCode::InvalidArgument, "initial distribution sums to " + std::to_string(mu_total), std::nullopt});
  }

  const auto reach = reachable_states(mrp);
  std::vector<char> seen(n, 0);
  for (auto s : reach) seen[s] = 1;
  for (std::size_t s = 0; s < n; ++s) {
    if (!seen[s]) rep.unreachable.push_back(static_cast<StateId>(s));
  }

  // A row sum above 1 can make the norm grow without bound; only certify
  // absorption for sub-stochastic kernels.
  const bool rows_ok = std::none_of(rep.issues.begin(), rep.issues.end(),
                                    [](const ValidationIssue& i) { return i.code == ErrorCode::RowSumExceedsOne; });
  if (rows_ok) {
    rep.absorption = linalg::absorption_certificate(p, power_cap);
    if (!rep.absorption.absorbing) {
      rep.issues.push_back({ErrorCode::NotAbsorbing,
                            "||P^k|| did not fall to 1/2 by k = " + std::to_string(power_cap), std::nullopt});
    }
  }
  rep.valid = rep.issues.empty();
  return rep;
}

void require_valid(const Mrp& mrp) {
  const auto rep = validate(mrp);
  if (!rep.valid) {
    const auto& i = rep.issues.front();
    throw Error(i.code, i.message, i.state);
  }
}

Vector exact_value(const Mrp& mrp) {
  linalg::ResolventSolver solver(mrp.transition());
  return solver.solve(mrp.mean_rewards());
}

Vector exact_occupancy(const Mrp& mrp) {
  linalg::ResolventSolver solver(mrp.transition());
  Vector nu = solver.solve_transpose(mrp.initial());
  for (Eigen::Index i = 0; i < nu.size(); ++i) nu[i] = std::max(0.0, nu[i]);
  return nu;
}

Vector one_step_variance(const Mrp& mrp, const Vector& value) {
  const auto& p = mrp.transition();
  if (value.size() != p.rows()) throw Error(ErrorCode::InvalidArgument, "value vector has wrong length");
  const Vector pv = p * value;
  const Vector pv2 = p * value.cwiseProduct(value);
  Vector out(p.rows());
  for (Eigen::Index s = 0; s < out.size(); ++s) {
    out[s] = std::max(0.0, mrp.rewards()[static_cast<std::size_t>(s)].variance() + pv2[s] - pv[s] * pv[s]);
  }
  return out;
}

HorizonProfile horizon_profile(const Mrp& mrp, int p_max, std::optional<double> h_declared) {
  if (p_max < 1) throw Error(ErrorCode::InvalidArgument, "p_max must be at least 1");
  const auto& p = mrp.transition();
  const auto n = p.rows();
  linalg::ResolventSolver solver(p);
  std::vector<Vector> m;  // m[k-1] = E_s[T^k]
  for (int order = 1; order <= p_max; ++order) {
    Vector rhs = Vector::Ones(n);
    for (int k = 1; k < order; ++k) rhs += binomial(order, k) * (p * m[static_cast<std::size_t>(k - 1)]);
    m.push_back(solver.solve(rhs));
  }
  HorizonProfile prof;
  prof.h_declared = h_declared;
  prof.per_state = Matrix(n, p_max);
  for (int k = 0; k < p_max; ++k) {
    prof.per_state.col(k) = m[static_cast<std::size_t>(k)];
    prof.moments.push_back(mrp.initial().dot(m[static_cast<std::size_t>(k)]));
  }
  for (auto s : reachable_states(mrp)) {
    for (int k = 1; k <= p_max; ++k) {
      const double mk = prof.per_state(s, k - 1);
      prof.h_estimate = std::max(prof.h_estimate, std::pow(mk, 1.0 / k) / k);
      if (h_declared && mk > std::pow(k * *h_declared, k) * (1.0 + 1e-12)) prof.declared_holds = false;
    }
  }
  return prof;
}

}  // namespace sb
