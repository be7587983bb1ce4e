#include "sb/rootsa.hpp"

#include <algorithm>
#include <cmath>

#include "sb/error.hpp"

namespace sb {

namespace {

using Index = Eigen::Index;

std::size_t ceil_size(double x) { return x <= 1.0 ? 1 : static_cast<std::size_t>(std::ceil(x)); }

}  // namespace

RootSaConfig RootSaConfig::defaults(std::size_t n, double h, double nu_min, double delta, double c, double c_prime) {
  if (n < 2) throw Error(ErrorCode::InsufficientBudget, "need at least two trajectories");
  if (!(h > 0.0) || !(nu_min > 0.0) || !(delta > 0.0 && delta < 1.0) || !(c > 0.0) || !(c_prime > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "defaults need h > 0, nu_min > 0, delta in (0, 1), c, c' > 0");
  }
  const double nd = static_cast<double>(n);
  const double log_term = std::log(nd / delta);
  RootSaConfig cfg;
  cfg.c = c;
  cfg.c_prime = c_prime;
  cfg.delta = delta;
  cfg.n_A = ceil_size(c * h / nu_min * log_term);
  cfg.m = cfg.n_A;
  cfg.eta = std::min(1.0, std::sqrt(static_cast<double>(cfg.m) / nd));
  cfg.B0 = std::max<std::size_t>(2, ceil_size(c_prime * h / cfg.eta * log_term));
  cfg.K_restart = ceil_size(3.0 * std::log(nd));
  if (cfg.required_budget() <= n) return cfg;

  cfg.fitted = true;
  cfg.n_A = std::min(cfg.n_A, std::max<std::size_t>(1, n / 10));
  const std::size_t avail = n - cfg.n_A;
  cfg.m = std::min(cfg.m, std::max<std::size_t>(1, avail / 64));
  const std::size_t batches = avail / cfg.m;
  cfg.eta = std::min(1.0, std::sqrt(static_cast<double>(cfg.m) / nd));
  cfg.B0 = std::clamp<std::size_t>(cfg.B0, 2, std::max<std::size_t>(2, batches / 8));
  cfg.K_restart = std::clamp<std::size_t>(cfg.K_restart, 1, std::max<std::size_t>(1, batches / (4 * cfg.B0)));
  return cfg;
}

void RootSaConfig::check() const {
  if (!(eta > 0.0 && eta <= 1.0)) throw Error(ErrorCode::InvalidArgument, "eta must lie in (0, 1]");
  if (m < 1 || B0 < 2 || K_restart < 1 || n_A < 1) {
    throw Error(ErrorCode::InvalidArgument, "m, K_restart, n_A must be >= 1 and B0 >= 2");
  }
}

WeightVector compute_weights(TrajectorySpan aux, const Subgraph& g) {
  if (aux.empty()) throw Error(ErrorCode::ZeroVisits, "auxiliary data set is empty");
  const auto stats = subgraph_statistics(aux, g);
  WeightVector wv;
  wv.states = g.members();
  wv.w = Vector(stats.visits.size());
  for (Index i = 0; i < wv.w.size(); ++i) {
    if (stats.visits[i] <= 0) {
      const auto s = g.members()[static_cast<std::size_t>(i)];
      throw Error(ErrorCode::ZeroVisits, "state " + std::to_string(s) + " unvisited in the auxiliary data", s);
    }
    const double nu_hat = stats.visits[i] / static_cast<double>(aux.size());
    wv.w[i] = 0.5 / nu_hat;
  }
  return wv;
}

BatchOperator::BatchOperator(TrajectorySpan batch, const Subgraph& g)
    : stats_(subgraph_statistics(batch, g)), batch_size_(static_cast<double>(batch.size())) {
  if (batch.empty()) throw Error(ErrorCode::InvalidArgument, "empty mini-batch");
}

Vector BatchOperator::apply(const Vector& theta, const WeightVector& w) const {
  if (theta.size() != stats_.visits.size() || w.w.size() != theta.size()) {
    throw Error(ErrorCode::InvalidArgument, "theta and weights must have one entry per subgraph state");
  }
  const Vector increment = stats_.transitions * theta + stats_.reward_sum + stats_.exit_sum -
                           stats_.visits.cwiseProduct(theta);
  return theta + w.w.cwiseProduct(increment) / batch_size_;
}

Vector stochastic_operator(TrajectorySpan batch, const Vector& theta, const WeightVector& w, const Subgraph& g) {
  return BatchOperator(batch, g).apply(theta, w);
}

Vector root_sa(const OracleStream& stream, const Vector& theta0, double eta, std::size_t B0, std::size_t n_steps,
               const StepTrace& trace) {
  if (B0 < 1) throw Error(ErrorCode::InvalidArgument, "B0 must be positive");
  if (!(eta > 0.0)) throw Error(ErrorCode::InvalidArgument, "eta must be positive");
  const std::size_t burn = std::min(B0, n_steps);
  Vector u = Vector::Zero(theta0.size());
  for (std::size_t t = 1; t <= burn; ++t) {
    const Oracle f = stream();
    u += f(theta0) - theta0;
  }
  if (burn > 0) u /= static_cast<double>(burn);
  Vector prev = theta0;  // theta_{t-2}
  Vector cur = theta0;   // theta_{t-1}
  if (trace && burn > 0) trace(burn, cur, u);
  for (std::size_t t = B0 + 1; t <= n_steps; ++t) {
    const Oracle f = stream();
    const Vector g_cur = f(cur) - cur;
    const Vector g_prev = f(prev) - prev;
    const double decay = static_cast<double>(t - 1) / static_cast<double>(t);
    u = g_cur + decay * (u - g_prev);
    Vector next = cur + eta * u;
    if (!next.allFinite()) throw Error(ErrorCode::NonFiniteIterate, "iterate diverged at step " + std::to_string(t));
    prev = std::move(cur);
    cur = std::move(next);
    if (trace) trace(t, cur, u);
  }
  return cur;
}

double horizon_from_lengths(TrajectorySpan data, int p_max) {
  if (data.empty()) throw Error(ErrorCode::InvalidArgument, "no trajectories to estimate the horizon from");
  double h = 0.0;
  for (int p = 1; p <= p_max; ++p) {
    double acc = 0.0;
    for (const auto& tr : data) acc += std::pow(static_cast<double>(tr.size()), p);
    h = std::max(h, std::pow(acc / static_cast<double>(data.size()), 1.0 / p) / p);
  }
  return h;
}

RootSaResult root_sa_with_restarts(TrajectorySpan data, const Subgraph& g, const RootSaSettings& settings,
                                   const PhaseTrace& trace) {
  const std::size_t n = data.size();
  RootSaResult res;
  if (settings.config) {
    res.config = *settings.config;
    res.config.check();
    res.h_used = settings.h.value_or(0.0);
  } else {
    if (n < 20) throw Error(ErrorCode::InsufficientBudget, "need at least 20 trajectories for default parameters");
    const std::size_t probe = std::min(n / 10, std::max<std::size_t>(16, n / 100));
    res.h_used = settings.h ? *settings.h : horizon_from_lengths(data.first(probe));
    const double log_term = std::log(static_cast<double>(n) / settings.delta);
    std::size_t pilot = std::max(probe, ceil_size(settings.c * res.h_used * log_term));
    pilot = std::min(pilot, std::max<std::size_t>(1, n / 10));
    const auto pilot_stats = subgraph_statistics(data.first(pilot), g);
    const double clip = 1.0 / static_cast<double>(pilot);
    res.nu_min_used = std::max(clip, pilot_stats.visits.minCoeff() / static_cast<double>(pilot));
    res.config = RootSaConfig::defaults(n, res.h_used, res.nu_min_used, settings.delta, settings.c, settings.c_prime);
    // The pilot prefix is part of the auxiliary split.
    if (res.config.n_A < pilot) res.config.n_A = pilot;
    res.nu_min_used = std::max(res.nu_min_used, 1.0 / static_cast<double>(res.config.n_A));
  }
  const auto& cfg = res.config;
  if (n < cfg.required_budget()) {
    throw Error(ErrorCode::InsufficientBudget, "need " + std::to_string(cfg.required_budget()) +
                                                   " trajectories, have " + std::to_string(n));
  }

  res.weights = compute_weights(data.first(cfg.n_A), g);
  res.phases.push_back({"auxiliary", 0, cfg.n_A, 0});

  std::size_t cursor = cfg.n_A;
  auto make_stream = [&]() -> OracleStream {
    return [&]() -> Oracle {
      auto op = std::make_shared<BatchOperator>(data.subspan(cursor, cfg.m), g);
      cursor += cfg.m;
      const WeightVector* w = &res.weights;
      return [op, w](const Vector& theta) { return op->apply(theta, *w); };
    };
  };

  Vector theta = Vector::Zero(static_cast<Index>(g.size()));
  for (std::size_t k = 1; k <= cfg.K_restart; ++k) {
    const std::string name = "restart-" + std::to_string(k);
    const std::size_t first = cursor;
    StepTrace step_trace;
    if (trace) step_trace = [&](std::size_t t, const Vector& th, const Vector&) { trace(name, t, th); };
    theta = root_sa(make_stream(), theta, cfg.eta, cfg.B0, 2 * cfg.B0, step_trace);
    res.phases.push_back({name, first, cursor - first, 2 * cfg.B0});
  }
  const std::size_t q = (n - cursor) / cfg.m;
  const std::size_t first = cursor;
  StepTrace step_trace;
  if (trace) step_trace = [&](std::size_t t, const Vector& th, const Vector&) { trace("final", t, th); };
  theta = root_sa(make_stream(), theta, cfg.eta, cfg.B0, q, step_trace);
  res.phases.push_back({"final", first, cursor - first, q});
  if (cursor < n) res.phases.push_back({"unused", cursor, n - cursor, 0});

  res.estimate.states = g.members();
  res.estimate.values = theta;
  res.estimate.covered = g.members();
  res.estimate.solver.method = "root_sa";
  res.estimate.trajectories_used = cursor;
  return res;
}

}  // namespace sb
