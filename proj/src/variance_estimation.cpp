#include "sb/variance_estimation.hpp"

#include <cmath>

#include "sb/error.hpp"
#include "sb/estimators.hpp"
#include "sb/kernels.hpp"
#include "sb/linalg.hpp"

namespace sb {

namespace {

using Index = Eigen::Index;

std::size_t require_member(const Subgraph& g, StateId s0) {
  const auto pos = g.position(s0);
  if (!pos) throw Error(ErrorCode::InvalidArgument, "target state must belong to the subgraph", s0);
  return *pos;
}

void check_negative(VarianceEstimate& est) {
  if (est.value < 0.0) {
    est.warnings.push_back("negative variance estimate " + std::to_string(est.value) +
                           " from the non-symmetric power sums");
  }
}

}  // namespace

std::vector<Matrix> transition_power_estimate(TrajectorySpan quarter, const Subgraph& g, std::size_t L,
                                              std::vector<std::string>* warnings) {
  if (L < 1) throw Error(ErrorCode::InvalidArgument, "L must be at least 1");
  const auto counts = empirical_counts(quarter, g, L);
  const auto k = static_cast<Index>(g.size());
  std::vector<Matrix> out;
  out.reserve(L);
  for (std::size_t l = 1; l <= L; ++l) {
    Matrix p = Matrix::Zero(k, k);
    for (Index r = 0; r < k; ++r) {
      if (counts.visits[r] <= 0) continue;
      for (SparseCounts::InnerIterator it(counts.paths[l], r); it; ++it) p(r, it.col()) = it.value() / counts.visits[r];
    }
    out.push_back(std::move(p));
  }
  if (warnings) {
    for (Index r = 0; r < k; ++r) {
      if (counts.visits[r] <= 0) {
        warnings->push_back("ZeroVisits: state " + std::to_string(g.members()[static_cast<std::size_t>(r)]) +
                            " unvisited, power rows set to 0");
      }
    }
  }
  return out;
}

Matrix residual_covariance(TrajectorySpan quarter, const Subgraph& g, const Vector& v_hat) {
  const auto k = static_cast<Index>(g.size());
  const auto ku = static_cast<std::size_t>(k);
  if (v_hat.size() != k) throw Error(ErrorCode::InvalidArgument, "value estimate must have one entry per subgraph state");
  if (quarter.empty()) throw Error(ErrorCode::ZeroVisits, "empty data split");
  Matrix acc = Matrix::Zero(k, k);
  Vector visits = Vector::Zero(k);
  Vector eps(k);
  std::vector<long> pos;
  for (const auto& tr : quarter) {
    eps.setZero();
    pos.resize(tr.size());
    for (std::size_t t = 0; t < tr.size(); ++t) {
      const auto p = g.position(tr.states[t]);
      pos[t] = p ? static_cast<long>(*p) : -1;
    }
    double tail = 0.0;
    for (std::size_t t = tr.size(); t-- > 0;) {
      if (pos[t] >= 0) {
        visits[pos[t]] += 1.0;
        double term = tr.rewards[t] - v_hat[pos[t]];
        term += (t + 1 < tr.size() && pos[t + 1] >= 0) ? v_hat[pos[t + 1]] : tail;
        eps[pos[t]] += term;
      }
      tail += tr.rewards[t];
    }
    kernels::rank1_update(1.0, {eps.data(), ku}, {eps.data(), ku}, {acc.data(), ku * ku});
  }
  const double q = static_cast<double>(quarter.size());
  for (Index i = 0; i < k; ++i) {
    if (visits[i] <= 0) {
      const auto s = g.members()[static_cast<std::size_t>(i)];
      throw Error(ErrorCode::ZeroVisits, "state " + std::to_string(s) + " unvisited in the residual split", s);
    }
  }
  const Vector nu_hat = visits / q;
  Matrix sigma(k, k);
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < k; ++j) sigma(i, j) = acc(i, j) / q / (nu_hat[i] * nu_hat[j]);
  }
  return 0.5 * (sigma + sigma.transpose());
}

double assemble_variance(const std::vector<Matrix>& p_hat, const Matrix& sigma, const std::vector<Matrix>& p_check,
                         std::size_t s0_position) {
  const auto k = sigma.rows();
  const auto i = static_cast<Index>(s0_position);
  Eigen::RowVectorXd a = Eigen::RowVectorXd::Zero(k);
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(k);
  a[i] = 1.0;
  b[i] = 1.0;
  for (const auto& m : p_hat) a += m.row(i);
  for (const auto& m : p_check) b += m.row(i);
  return a * sigma * b.transpose();
}

VarianceEstimate variance_estimate(TrajectorySpan data, const Subgraph& g, StateId s0, const VarianceConfig& cfg) {
  const std::size_t s0_pos = require_member(g, s0);
  VarianceEstimate est;
  est.method = "multistage";
  est.s0 = s0;
  est.states = g.members();
  est.n0 = data.size() / 4 * 4;
  const std::size_t q = est.n0 / 4;
  if (q == 0) throw Error(ErrorCode::InsufficientBudget, "need at least four trajectories");
  for (std::size_t i = 0; i < 4; ++i) est.splits.push_back({i * q, q});

  const double h = cfg.h ? *cfg.h : horizon_from_lengths(data.first(est.n0));
  est.L = cfg.L ? *cfg.L
                : static_cast<std::size_t>(std::ceil(2.0 * h * std::log(std::max(h * static_cast<double>(est.n0), 2.0))));
  est.L = std::max<std::size_t>(est.L, 1);

  RootSaSettings rs = cfg.rootsa;
  if (!rs.h) rs.h = h;
  const auto step1 = root_sa_with_restarts(data.subspan(0, q), g, rs);
  est.v_hat = step1.estimate.values;
  est.p_hat = transition_power_estimate(data.subspan(q, q), g, est.L, &est.warnings);
  est.p_check = transition_power_estimate(data.subspan(2 * q, q), g, est.L, &est.warnings);
  est.sigma_hat = residual_covariance(data.subspan(3 * q, q), g, est.v_hat);
  est.value = assemble_variance(est.p_hat, est.sigma_hat, est.p_check, s0_pos);
  check_negative(est);
  return est;
}

VarianceEstimate variance_estimate_plugin(TrajectorySpan data, const Subgraph& g, StateId s0) {
  const std::size_t s0_pos = require_member(g, s0);
  if (data.empty()) throw Error(ErrorCode::InsufficientBudget, "empty data set");
  VarianceEstimate est;
  est.method = "plugin";
  est.s0 = s0;
  est.states = g.members();
  est.n0 = data.size();
  est.splits.push_back({0, data.size()});
  const auto fit = subgraph_estimate(data, g);
  est.warnings = fit.warnings;
  est.v_hat = fit.values;
  est.sigma_hat = residual_covariance(data, g, est.v_hat);
  est.p_hat = transition_power_estimate(data, g, 1);
  linalg::ResolventSolver solver(est.p_hat[0]);
  const Matrix inv = solver.inverse();
  est.value = (inv * est.sigma_hat * inv.transpose())(static_cast<Index>(s0_pos), static_cast<Index>(s0_pos));
  check_negative(est);
  return est;
}

}  // namespace sb
