#include "sb/benchmarks.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <thread>
#include <tuple>

#include "sb/error.hpp"
#include "sb/sampling.hpp"

namespace sb {

namespace {

std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RewardModel random_reward(Rng& rng, std::size_t max_atoms) {
  const std::size_t atoms = 1 + static_cast<std::size_t>(rng.below(std::max<std::size_t>(max_atoms, 1)));
  if (atoms == 1) return RewardModel::deterministic(2.0 * rng.uniform() - 1.0);
  std::vector<double> values(atoms), probs(atoms);
  double total = 0.0;
  for (std::size_t a = 0; a < atoms; ++a) {
    values[a] = 2.0 * rng.uniform() - 1.0;
    probs[a] = 0.1 + rng.uniform();
    total += probs[a];
  }
  double acc = 0.0;
  for (std::size_t a = 0; a + 1 < atoms; ++a) {
    probs[a] /= total;
    acc += probs[a];
  }
  probs[atoms - 1] = 1.0 - acc;
  return RewardModel::discrete(std::move(values), std::move(probs));
}

// Scales each row to a random total in [0, 1 - min_terminal].
void scale_rows(Matrix& p, Rng& rng, double min_terminal) {
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double sum = p.row(r).sum();
    if (sum <= 0.0) continue;
    const double keep = (1.0 - min_terminal) * (0.3 + 0.7 * rng.uniform());
    p.row(r) *= keep / sum;
  }
}

}  // namespace

MrpFamily layered_mrp(std::size_t k, std::size_t T) {
  if (k < 1 || T < 1) throw Error(ErrorCode::InvalidArgument, "layered MRP needs k, T >= 1");
  const std::size_t n = k + T - 1;
  const auto ni = static_cast<Eigen::Index>(n);
  Matrix p = Matrix::Zero(ni, ni);
  if (T >= 2) {
    for (std::size_t s = 0; s < k; ++s) p(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)) = 1.0;
    for (std::size_t s = k; s + 1 < n; ++s) p(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s + 1)) = 1.0;
  }
  Vector mu = Vector::Zero(ni);
  mu.head(static_cast<Eigen::Index>(k)).setConstant(1.0 / static_cast<double>(k));
  std::vector<RewardModel> rewards(n, RewardModel::uniform(-1.0, 1.0));
  auto mrp = std::make_shared<Mrp>(std::move(p), std::move(rewards), std::move(mu));
  require_valid(*mrp);

  MrpFamily f;
  f.name = "layered";
  f.params = {{"k", k}, {"T", T}};
  f.model = mrp;
  f.materialized = mrp;
  f.start = 0;
  for (std::size_t s = 0; s < n; ++s) f.values.push_back({static_cast<StateId>(s), 0.0});
  const double kd = static_cast<double>(k), td = static_cast<double>(T);
  f.facts = {{"sigma2_mc_source", kd * td / 3.0}, {"sigma2_td_source", (kd + td - 1.0) / 3.0}};
  return f;
}

Subgraph layered_sources(std::size_t k) {
  std::vector<StateId> m(k);
  for (std::size_t s = 0; s < k; ++s) m[s] = static_cast<StateId>(s);
  return Subgraph(std::move(m));
}

Subgraph layered_pooling_subgraph(std::size_t k, std::size_t T) {
  auto g = layered_sources(k);
  return T >= 2 ? g.with(static_cast<StateId>(k)) : g;
}

TdFailureModel::TdFailureModel(std::uint64_t N, double gamma) : n_(N), gamma_(gamma) {
  if (N < 1) throw Error(ErrorCode::InvalidArgument, "TD-failure MRP needs N >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw Error(ErrorCode::InvalidArgument, "gamma must lie in (0, 1)");
  if (2 * N + 2 > std::numeric_limits<StateId>::max()) throw Error(ErrorCode::InvalidArgument, "N too large for state ids");
  char buf[96];
  std::snprintf(buf, sizeof buf, "td_failure:%llu:%.17g", static_cast<unsigned long long>(N), gamma);
  fingerprint_ = fnv(buf);
}

std::optional<StateId> TdFailureModel::sample_next(StateId s, Rng& rng) const {
  const double u = rng.uniform();
  if (u >= gamma_) return std::nullopt;
  if (s == 0) return static_cast<StateId>(1 + rng.below(n_));
  if (s <= n_) return u < 0.5 * gamma_ ? s : static_cast<StateId>(s + n_);
  return static_cast<StateId>(2 * n_ + 1);
}

double td_failure_bias_target(double gamma) {
  // M ~ Geom(1 - gamma/2) on {0, 1, ...}, Z ~ Ber(gamma / (2 - gamma)).
  const double z = gamma / (2.0 - gamma);
  double sum = 0.0, pm = 1.0 - 0.5 * gamma;
  for (int m = 0; m < 2000 && pm > 1e-300; ++m) {
    sum += pm / ((1.0 - gamma) * m + 1.0);
    pm *= 0.5 * gamma;
  }
  return gamma * gamma * z * sum;
}

MrpFamily td_failure_mrp(std::uint64_t N, double gamma) {
  auto lazy = std::make_shared<TdFailureModel>(N, gamma);
  MrpFamily f;
  f.name = "td-failure";
  f.params = {{"N", N}, {"gamma", gamma}};
  f.model = lazy;
  f.start = 0;
  f.discount = gamma;
  f.values = {{0, gamma * gamma / (2.0 - gamma)}};
  f.facts = {{"value_s0", gamma * gamma / (2.0 - gamma)},
             {"occupancy_s0", 1.0},
             {"td_bias_target", td_failure_bias_target(gamma)}};
  if (N <= kMaterializeLimit) {
    const auto n = static_cast<Eigen::Index>(2 * N + 2);
    const auto Ni = static_cast<Eigen::Index>(N);
    Matrix p = Matrix::Zero(n, n);
    std::vector<RewardModel> rewards(static_cast<std::size_t>(n), RewardModel::deterministic(0.0));
    for (Eigen::Index i = 1; i <= Ni; ++i) {
      p(0, i) = gamma / static_cast<double>(N);
      p(i, i) = 0.5 * gamma;
      p(i, Ni + i) = 0.5 * gamma;
      p(Ni + i, n - 1) = gamma;
      rewards[static_cast<std::size_t>(Ni + i)] = RewardModel::deterministic(1.0);
    }
    p(n - 1, n - 1) = gamma;
    Vector mu = Vector::Zero(n);
    mu[0] = 1.0;
    f.materialized = std::make_shared<Mrp>(std::move(p), std::move(rewards), std::move(mu));
  }
  return f;
}

MrpFamily lower_bound_mrp(std::size_t m, std::size_t N, double q, double epsilon, const std::vector<int>& psi,
                          const std::vector<int>& zeta) {
  auto bad = [](const std::string& msg) { return Error(ErrorCode::ParameterMismatch, msg); };
  if (m < 1 || N < 2 || N % 2 != 0) throw bad("need m >= 1 and N even, N >= 2");
  if (psi.size() != N || zeta.size() != m) throw bad("psi needs N entries and zeta m entries");
  auto pm1 = [](int v) { return v == 1 || v == -1; };
  if (!std::all_of(psi.begin(), psi.end(), pm1) || !std::all_of(zeta.begin(), zeta.end(), pm1)) {
    throw bad("psi and zeta entries must be +1 or -1");
  }
  long total = 0;
  for (int v : psi) total += v;
  if (total != 0) throw bad("psi must sum to zero");
  if (!(q >= 0.0 && q <= 1.0)) throw bad("q must lie in [0, 1]");
  if (!(std::abs(epsilon) <= 1.0)) throw bad("|epsilon| must be at most 1");

  const auto n = static_cast<Eigen::Index>(m + N);
  Matrix p = Matrix::Zero(n, n);
  std::vector<RewardModel> rewards(static_cast<std::size_t>(n), RewardModel::deterministic(0.0));
  for (std::size_t j = 0; j < N; ++j) {
    const double up = 0.5 * (1.0 + psi[j] * epsilon);
    rewards[m + j] = RewardModel::discrete({-1.0, 1.0}, {1.0 - up, up});
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      if (zeta[i] * psi[j] == 1) p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m + j)) = 2.0 * q / N;
    }
  }
  Vector mu = Vector::Zero(n);
  mu.head(static_cast<Eigen::Index>(m)).setConstant(1.0 / static_cast<double>(m));
  auto mrp = std::make_shared<Mrp>(std::move(p), std::move(rewards), std::move(mu));
  require_valid(*mrp);

  MrpFamily f;
  f.name = "lower-bound";
  f.params = {{"m", m}, {"N", N}, {"q", q}, {"epsilon", epsilon}, {"psi", psi}, {"zeta", zeta}};
  f.model = mrp;
  f.materialized = mrp;
  f.start = 0;
  for (std::size_t i = 0; i < m; ++i) f.values.push_back({static_cast<StateId>(i), zeta[i] * q * epsilon});
  for (std::size_t j = 0; j < N; ++j) f.values.push_back({static_cast<StateId>(m + j), psi[j] * epsilon});
  return f;
}

Mrp random_mrp(Rng& rng, const RandomMrpOptions& opts) {
  const auto n = static_cast<Eigen::Index>(opts.n_states);
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "random MRP needs at least one state");
  Matrix p = Matrix::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = opts.acyclic ? r + 1 : 0; c < n; ++c) {
      if (rng.uniform() < opts.edge_prob) p(r, c) = 0.05 + rng.uniform();
    }
  }
  scale_rows(p, rng, opts.min_terminal);
  std::vector<RewardModel> rewards;
  rewards.reserve(opts.n_states);
  for (std::size_t s = 0; s < opts.n_states; ++s) rewards.push_back(random_reward(rng, opts.max_atoms));
  Vector mu = Vector::Zero(n);
  if (opts.start_at_zero) {
    mu[0] = 1.0;
  } else {
    for (Eigen::Index s = 0; s < n; ++s) mu[s] = rng.uniform() < 0.5 ? 0.1 + rng.uniform() : 0.0;
    if (mu.sum() <= 0.0) mu[0] = 1.0;
    mu /= mu.sum();
  }
  return Mrp(std::move(p), std::move(rewards), std::move(mu));
}

std::vector<std::vector<StateId>> layer_members(const std::vector<std::size_t>& widths) {
  std::vector<std::vector<StateId>> out;
  StateId next = 0;
  for (auto w : widths) {
    auto& layer = out.emplace_back();
    for (std::size_t i = 0; i < w; ++i) layer.push_back(next++);
  }
  return out;
}

Mrp random_layered_dag(Rng& rng, const std::vector<std::size_t>& widths, double edge_prob, std::size_t max_atoms) {
  const auto layers = layer_members(widths);
  std::size_t n = 0;
  for (auto w : widths) n += w;
  if (n == 0 || widths.front() == 0) throw Error(ErrorCode::InvalidArgument, "first layer must be non-empty");
  const auto ni = static_cast<Eigen::Index>(n);
  Matrix p = Matrix::Zero(ni, ni);
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    for (auto a : layers[l]) {
      for (auto b : layers[l + 1]) {
        if (rng.uniform() < edge_prob) p(a, b) = 0.05 + rng.uniform();
      }
    }
  }
  scale_rows(p, rng, 0.05);
  std::vector<RewardModel> rewards;
  for (std::size_t s = 0; s < n; ++s) rewards.push_back(random_reward(rng, max_atoms));
  Vector mu = Vector::Zero(ni);
  for (auto s : layers.front()) mu[s] = 0.1 + rng.uniform();
  mu /= mu.sum();
  return Mrp(std::move(p), std::move(rewards), std::move(mu));
}

std::string EstimatorSpec::id() const {
  if (kind == "td" && td.discount) return "td_discounted";
  if ((kind == "subgraph" || kind == "rootsa") && subgraph) return kind + "[" + subgraph->key() + "]";
  return kind;
}

namespace {

EstimateResult run_estimator(const EstimatorSpec& spec, TrajectorySpan data) {
  if (spec.kind == "td") return td_estimate(data, spec.td);
  if (spec.kind == "mc") return mc_estimate(data, spec.states.empty() ? std::nullopt
                                                                        : std::optional<std::vector<StateId>>(spec.states));
  const Subgraph g = spec.subgraph ? *spec.subgraph : Subgraph(visited_states(data));
  if (spec.kind == "subgraph") return subgraph_estimate(data, g);
  if (spec.kind == "rootsa") return root_sa_with_restarts(data, g, spec.rootsa).estimate;
  throw Error(ErrorCode::InvalidArgument, "unknown estimator '" + spec.kind + "'");
}

}  // namespace

std::vector<ExperimentRecord> run_replicates(const MrpFamily& family, const EstimatorSpec& spec,
                                             const std::vector<std::size_t>& n_grid, std::size_t R,
                                             std::uint64_t master_seed, unsigned jobs) {
  std::vector<KnownValue> truth;
  if (spec.states.empty()) {
    truth = family.values;
  } else {
    for (auto s : spec.states) {
      const auto it = std::find_if(family.values.begin(), family.values.end(),
                                   [s](const KnownValue& kv) { return kv.state == s; });
      if (it == family.values.end()) {
        throw Error(ErrorCode::InvalidArgument, "no known value for scored state " + std::to_string(s), s);
      }
      truth.push_back(*it);
    }
  }
  const std::string params = family.params.dump();
  const std::string estimator = spec.id();

  std::vector<ExperimentRecord> records(n_grid.size() * R);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job = next++; job < records.size(); job = next++) {
      const std::size_t gi = job / R, r = job % R;
      ExperimentRecord& rec = records[job];
      rec.family = family.name;
      rec.params = params;
      rec.estimator = estimator;
      rec.n = n_grid[gi];
      rec.replicate = r;
      rec.seed = Rng::stream(master_seed, job)();
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const auto data = generate_dataset(*family.model, rec.n, rec.seed);
        const auto est = run_estimator(spec, data);
        for (const auto& kv : truth) {
          rec.states.push_back(kv.state);
          rec.errors.push_back(est.value(kv.state) - kv.value);
        }
      } catch (const std::exception& e) {
        rec.states.clear();
        rec.errors.clear();
        rec.failure = e.what();
      }
      rec.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(records.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::stable_sort(records.begin(), records.end(), [](const ExperimentRecord& a, const ExperimentRecord& b) {
    return std::tie(a.n, a.replicate) < std::tie(b.n, b.replicate);
  });
  return records;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records, const nlohmann::json& config) {
  out << "# " << nlohmann::json{{"version", std::string(kVersion)}, {"config", config}}.dump() << '\n';
  out << kRecordHeader << '\n';
  char buf[160];
  for (const auto& rec : records) {
    const std::string head = csv_field(rec.family) + ',' + csv_field(rec.params) + ',' + csv_field(rec.estimator) + ',' +
                             std::to_string(rec.n) + ',' + std::to_string(rec.replicate) + ',';
    if (rec.failure) {
      std::snprintf(buf, sizeof buf, ",nan,nan,%.3f", rec.runtime_ms);
      out << head << buf << '\n';
      continue;
    }
    for (std::size_t i = 0; i < rec.states.size(); ++i) {
      const double e = rec.errors[i];
      std::snprintf(buf, sizeof buf, "%u,%.17g,%.17g,%.3f", rec.states[i], e, static_cast<double>(rec.n) * e * e,
                    rec.runtime_ms);
      out << head << buf << '\n';
    }
  }
}

nlohmann::json summarize_records(const std::vector<ExperimentRecord>& records) {
  struct Acc {
    double sum = 0.0, sum_sq = 0.0;
    std::size_t count = 0;
  };
  std::map<std::tuple<std::string, std::size_t, StateId>, Acc> acc;
  std::map<std::pair<std::string, std::size_t>, std::size_t> failures;
  for (const auto& rec : records) {
    if (rec.failure) {
      ++failures[{rec.estimator, rec.n}];
      continue;
    }
    for (std::size_t i = 0; i < rec.states.size(); ++i) {
      const double v = static_cast<double>(rec.n) * rec.errors[i] * rec.errors[i];
      auto& a = acc[{rec.estimator, rec.n, rec.states[i]}];
      a.sum += v;
      a.sum_sq += v * v;
      ++a.count;
    }
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [key, a] : acc) {
    const auto& [estimator, n, state] = key;
    const double c = static_cast<double>(a.count);
    const double mean = a.sum / c;
    const double var = a.count > 1 ? std::max(0.0, (a.sum_sq - c * mean * mean) / (c - 1.0)) : 0.0;
    const double half = 1.96 * std::sqrt(var / c);
    const auto f = failures.find({estimator, n});
    rows.push_back({{"estimator", estimator},
                    {"n", n},
                    {"state", state},
                    {"replicates", a.count},
                    {"mean_n_sq_error", mean},
                    {"ci_low", mean - half},
                    {"ci_high", mean + half},
                    {"failures", f == failures.end() ? 0 : f->second}});
  }
  for (const auto& [key, count] : failures) {
    const bool seen = std::any_of(acc.begin(), acc.end(), [&](const auto& kv) {
      return std::get<0>(kv.first) == key.first && std::get<1>(kv.first) == key.second;
    });
    if (!seen) rows.push_back({{"estimator", key.first}, {"n", key.second}, {"replicates", 0}, {"failures", count}});
  }
  return {{"version", std::string(kVersion)}, {"rows", rows}};
}

}  // namespace sb
