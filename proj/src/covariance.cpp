#include "sb/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <span>

#include "sb/kernels.hpp"
#include "sb/linalg.hpp"
#include "sb/sampling.hpp"

namespace sb {

namespace {

using Index = Eigen::Index;

std::span<double> row_span(Matrix& m, Index r) { return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())}; }

std::span<const double> flat(const Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }

Matrix restrict(const Matrix& m, const std::vector<StateId>& rows, const std::vector<StateId>& cols) {
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) out(static_cast<Index>(i), static_cast<Index>(j)) = m(rows[i], cols[j]);
  }
  return out;
}

Vector restrict(const Vector& v, const std::vector<StateId>& idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Index>(i)] = v[idx[i]];
  return out;
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix sandwich(const Matrix& p_sub, const Matrix& sigma) {
  linalg::ResolventSolver solver(p_sub);
  const Matrix inv = solver.inverse();
  return symmetrize(inv * sigma * inv.transpose());
}

Matrix scale_by_occupancy(const Matrix& lambda, const Vector& nu) {
  Matrix out = lambda;
  for (Index i = 0; i < out.rows(); ++i) {
    for (Index j = 0; j < out.cols(); ++j) out(i, j) /= nu[i] * nu[j];
  }
  return out;
}

void require_occupied(const Mrp& mrp, const std::vector<StateId>& states) {
  const auto reach = reachable_states(mrp);
  for (auto s : states) {
    if (s >= mrp.num_states()) throw Error(ErrorCode::InvalidArgument, "state id out of range", s);
    if (!std::binary_search(reach.begin(), reach.end(), s)) {
      throw Error(ErrorCode::ZeroOccupancy, "state " + std::to_string(s) + " has zero occupancy", s);
    }
  }
}

// P restricted to rows in G and columns outside G, padded to full width.
Matrix exit_kernel(const Mrp& mrp, const Subgraph& g) {
  const auto n = static_cast<Index>(mrp.num_states());
  Matrix px(static_cast<Index>(g.size()), n);
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (Index t = 0; t < n; ++t) {
      px(static_cast<Index>(i), t) = g.contains(static_cast<StateId>(t)) ? 0.0 : mrp.transition()(g.members()[i], t);
    }
  }
  return px;
}

struct Horizon {
  std::size_t steps = 0;
  double tail = 0.0;
};

Horizon choose_horizon(const Matrix& p, double expected_length, const TruncationOptions& opts) {
  const auto n = static_cast<std::size_t>(p.rows());
  Vector survival = Vector::Ones(p.rows());
  Vector next(p.rows());
  for (std::size_t k = 0;; ++k) {
    const double norm = kernels::max_abs({survival.data(), n});
    const double bound = norm * (static_cast<double>(k) + expected_length) * (static_cast<double>(k) + expected_length);
    if (bound <= opts.tail_tol) return {k, bound};
    if (k >= opts.max_horizon) {
      throw Error(ErrorCode::TruncationBudgetExceeded,
                  "tail bound " + std::to_string(bound) + " above tolerance at horizon " + std::to_string(k));
    }
    kernels::gemv(flat(p), n, n, {survival.data(), n}, {next.data(), n});
    survival.swap(next);
  }
}

// sum_{k < steps} R P^k, row by row.
Matrix truncated_row_sums(const Matrix& start, const Matrix& p, std::size_t steps) {
  const auto n = static_cast<std::size_t>(p.rows());
  Matrix sum = Matrix::Zero(start.rows(), start.cols());
  Vector cur(p.rows());
  Vector next(p.rows());
  for (Index r = 0; r < start.rows(); ++r) {
    cur = start.row(r).transpose();
    auto out = row_span(sum, r);
    for (std::size_t k = 0; k < steps; ++k) {
      kernels::axpy(1.0, {cur.data(), n}, out);
      kernels::vecmat({cur.data(), n}, flat(p), n, n, {next.data(), n});
      cur.swap(next);
    }
  }
  return sum;
}

// sum_{k < steps} P^k v.
Vector truncated_col_sum(const Matrix& p, const Vector& v, std::size_t steps) {
  const auto n = static_cast<std::size_t>(p.rows());
  Vector sum = Vector::Zero(p.rows());
  Vector cur = v;
  Vector next(p.rows());
  for (std::size_t k = 0; k < steps; ++k) {
    sum += cur;
    kernels::gemv(flat(p), n, n, {cur.data(), n}, {next.data(), n});
    cur.swap(next);
  }
  return sum;
}

// Occupancy, cumulative one-step variance w = N sigma^2, and expected visits
// after leaving G, either exact or truncated at a common horizon.
struct Factors {
  Vector nu;           // full state space
  Vector w;            // full state space
  Matrix after_exit;   // |G| x |S|: (P_{G,out} N)(s, .)
  Matrix visits;       // requested rows of N (full width)
  Horizon horizon;
};

Factors compute_factors(const Mrp& mrp, const Vector& sigma2, const Matrix* exit_rows,
                        const std::vector<StateId>* visit_rows, CovarianceMethod method, const TruncationOptions& opts) {
  const auto& p = mrp.transition();
  const auto n = p.rows();
  Factors f;
  linalg::ResolventSolver solver(p);
  if (method == CovarianceMethod::Exact) {
    f.nu = solver.solve_transpose(mrp.initial());
    f.w = solver.solve(sigma2);
    if (exit_rows) f.after_exit = solver.solve_transpose(Matrix(exit_rows->transpose())).transpose();
    if (visit_rows) {
      Matrix e = Matrix::Zero(n, static_cast<Index>(visit_rows->size()));
      for (std::size_t i = 0; i < visit_rows->size(); ++i) e((*visit_rows)[i], static_cast<Index>(i)) = 1.0;
      f.visits = solver.solve_transpose(e).transpose();
    }
    return f;
  }
  const double expected_length = solver.solve(Vector(Vector::Ones(n))).maxCoeff();
  f.horizon = choose_horizon(p, expected_length, opts);
  f.nu = truncated_row_sums(Matrix(mrp.initial().transpose()), p, f.horizon.steps).row(0).transpose();
  f.w = truncated_col_sum(p, sigma2, f.horizon.steps);
  if (exit_rows) f.after_exit = truncated_row_sums(*exit_rows, p, f.horizon.steps);
  if (visit_rows) {
    Matrix e = Matrix::Zero(static_cast<Index>(visit_rows->size()), n);
    for (std::size_t i = 0; i < visit_rows->size(); ++i) e(static_cast<Index>(i), (*visit_rows)[i]) = 1.0;
    f.visits = truncated_row_sums(e, p, f.horizon.steps);
  }
  return f;
}

Vector exact_sigma2(const Mrp& mrp) { return one_step_variance(mrp, exact_value(mrp)); }

void check_method(CovarianceMethod method) {
  if (method == CovarianceMethod::MonteCarloOracle) {
    throw Error(ErrorCode::InvalidArgument, "use simulate_subgraph_covariance for the Monte-Carlo oracle");
  }
}

}  // namespace

std::string to_string(CovarianceMethod method) {
  switch (method) {
    case CovarianceMethod::Exact: return "exact";
    case CovarianceMethod::TruncatedDp: return "truncated_dp";
    case CovarianceMethod::MonteCarloOracle: return "monte_carlo_oracle";
  }
  return "unknown";
}

std::optional<std::size_t> CovarianceReport::position(StateId s) const {
  const auto it = std::lower_bound(states.begin(), states.end(), s);
  if (it == states.end() || *it != s) return std::nullopt;
  return static_cast<std::size_t>(it - states.begin());
}

double CovarianceReport::sandwiched_at(StateId s) const {
  const auto pos = position(s);
  if (!pos) throw Error(ErrorCode::ZeroOccupancy, "state " + std::to_string(s) + " not covered", s);
  return sandwiched(static_cast<Index>(*pos), static_cast<Index>(*pos));
}

CovarianceReport sigma_td(const Mrp& mrp) {
  const auto reach = reachable_states(mrp);
  const Vector sigma2 = exact_sigma2(mrp);
  const Vector nu_full = exact_occupancy(mrp);
  CovarianceReport rep;
  rep.method = CovarianceMethod::Exact;
  rep.states = reach;
  rep.occupancy = restrict(nu_full, reach);
  const Vector s2 = restrict(sigma2, reach);
  rep.lambda = rep.occupancy.cwiseProduct(s2).asDiagonal();
  rep.sigma = s2.cwiseQuotient(rep.occupancy).asDiagonal();
  rep.sandwiched = sandwich(restrict(mrp.transition(), reach, reach), rep.sigma);
  return rep;
}

double td_variance_via_visits(const Mrp& mrp, StateId s) {
  const Vector sigma2 = exact_sigma2(mrp);
  const Vector nu = exact_occupancy(mrp);
  linalg::ResolventSolver solver(mrp.transition());
  Vector e = Vector::Zero(static_cast<Index>(mrp.num_states()));
  e[s] = 1.0;
  const Vector visits = solver.solve_transpose(e);  // E[N(s') | S0 = s]
  double total = 0.0;
  for (Index t = 0; t < visits.size(); ++t) {
    if (visits[t] > 0.0 && nu[t] > 0.0) total += visits[t] * visits[t] * sigma2[t] / nu[t];
  }
  return total;
}

CovarianceReport sigma_mc(const Mrp& mrp, CovarianceMethod method, const TruncationOptions& opts) {
  check_method(method);
  const auto reach = reachable_states(mrp);
  const Vector sigma2 = exact_sigma2(mrp);
  const Factors f = compute_factors(mrp, sigma2, nullptr, &reach, method, opts);
  const auto k = static_cast<Index>(reach.size());
  CovarianceReport rep;
  rep.method = method;
  rep.horizon = f.horizon.steps;
  rep.tail_bound = f.horizon.tail;
  rep.states = reach;
  rep.occupancy = restrict(f.nu, reach);
  const Vector w = restrict(f.w, reach);
  const Matrix& visits = f.visits;  // rows follow reach
  Matrix later(k, k);  // E[visits to s' strictly after a visit to s]
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < k; ++j) later(i, j) = visits(i, reach[static_cast<std::size_t>(j)]) - (i == j ? 1.0 : 0.0);
  }
  rep.lambda = Matrix(k, k);
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < k; ++j) {
      double v = rep.occupancy[i] * later(i, j) * w[j] + rep.occupancy[j] * later(j, i) * w[i];
      if (i == j) v += rep.occupancy[i] * w[i];
      rep.lambda(i, j) = v;
    }
  }
  rep.lambda = symmetrize(rep.lambda);
  rep.sigma = scale_by_occupancy(rep.lambda, rep.occupancy);
  rep.sandwiched = rep.sigma;
  return rep;
}

CovarianceReport sigma_subgraph(const Mrp& mrp, const Subgraph& g, CovarianceMethod method,
                                const TruncationOptions& opts) {
  check_method(method);
  require_occupied(mrp, g.members());
  const Vector sigma2 = exact_sigma2(mrp);
  const Matrix px = exit_kernel(mrp, g);
  const Factors f = compute_factors(mrp, sigma2, &px, nullptr, method, opts);
  const auto& m = g.members();
  const auto k = static_cast<Index>(m.size());

  const Vector nu = restrict(f.nu, m);
  const Vector s2 = restrict(sigma2, m);
  const Vector exit_w = px * f.w;  // expected remaining one-step variance after leaving G
  Matrix c(k, k);
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < k; ++j) c(i, j) = f.after_exit(i, m[static_cast<std::size_t>(j)]);
  }

  Matrix a(k, k);
  Matrix b(k, k);
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < k; ++j) {
      a(i, j) = nu[i] * c(i, j) * s2[j];
      b(i, j) = nu[i] * c(i, j) * exit_w[j];
    }
  }
  CovarianceReport rep;
  rep.method = method;
  rep.horizon = f.horizon.steps;
  rep.tail_bound = f.horizon.tail;
  rep.states = m;
  rep.occupancy = nu;
  rep.lambda_x = nu.cwiseProduct(s2).asDiagonal();
  rep.lambda_y = Matrix(nu.cwiseProduct(exit_w).asDiagonal()) + b + b.transpose();
  rep.lambda = symmetrize(rep.lambda_x + a + a.transpose() + rep.lambda_y);
  rep.lambda_y = symmetrize(rep.lambda_y);
  rep.sigma = scale_by_occupancy(rep.lambda, nu);
  rep.sigma_x = scale_by_occupancy(rep.lambda_x, nu);
  rep.sigma_y = scale_by_occupancy(rep.lambda_y, nu);
  rep.sandwiched = sandwich(restrict(mrp.transition(), m, m), rep.sigma);
  return rep;
}

bool check_transient(const Mrp& mrp, const Subgraph& g) {
  const auto n = mrp.num_states();
  const auto& p = mrp.transition();
  std::vector<char> seen(n, 0);
  std::deque<StateId> queue;
  for (auto s : g.members()) {
    if (s >= n) throw Error(ErrorCode::InvalidArgument, "subgraph member out of range", s);
    for (std::size_t t = 0; t < n; ++t) {
      if (!seen[t] && !g.contains(static_cast<StateId>(t)) && p(s, static_cast<Index>(t)) > 0.0) {
        seen[t] = 1;
        queue.push_back(static_cast<StateId>(t));
      }
    }
  }
  while (!queue.empty()) {
    const StateId u = queue.front();
    queue.pop_front();
    for (std::size_t t = 0; t < n; ++t) {
      if (p(u, static_cast<Index>(t)) <= 0.0) continue;
      if (g.contains(static_cast<StateId>(t))) return false;
      if (!seen[t]) {
        seen[t] = 1;
        queue.push_back(static_cast<StateId>(t));
      }
    }
  }
  return true;
}

CovarianceReport sigma_subgraph_transient(const Mrp& mrp, const Subgraph& g) {
  if (!check_transient(mrp, g)) throw Error(ErrorCode::NotTransient, "subgraph can be re-entered after leaving");
  require_occupied(mrp, g.members());
  const Vector sigma2 = exact_sigma2(mrp);
  const Vector nu_full = exact_occupancy(mrp);
  linalg::ResolventSolver solver(mrp.transition());
  const Vector w = solver.solve(sigma2);
  const Vector exit_w = exit_kernel(mrp, g) * w;  // P(exit | s) * sigma^2_out(s)
  const auto& m = g.members();
  CovarianceReport rep;
  rep.method = CovarianceMethod::Exact;
  rep.states = m;
  rep.occupancy = restrict(nu_full, m);
  const Vector s2 = restrict(sigma2, m);
  rep.lambda_x = rep.occupancy.cwiseProduct(s2).asDiagonal();
  rep.lambda_y = rep.occupancy.cwiseProduct(exit_w).asDiagonal();
  rep.lambda = rep.lambda_x + rep.lambda_y;
  rep.sigma = (s2 + exit_w).cwiseQuotient(rep.occupancy).asDiagonal();
  rep.sigma_x = s2.cwiseQuotient(rep.occupancy).asDiagonal();
  rep.sigma_y = exit_w.cwiseQuotient(rep.occupancy).asDiagonal();
  rep.sandwiched = sandwich(restrict(mrp.transition(), m, m), rep.sigma);
  return rep;
}

CovarianceReport simulate_subgraph_covariance(const Mrp& mrp, const Subgraph& g, std::size_t n_sim,
                                              std::uint64_t seed) {
  require_occupied(mrp, g.members());
  if (n_sim < 2) throw Error(ErrorCode::InvalidArgument, "n_sim must be at least 2");
  const Vector v = exact_value(mrp);
  const Vector nu_full = exact_occupancy(mrp);
  const auto& m = g.members();
  const auto k = static_cast<Index>(m.size());
  const auto ku = static_cast<std::size_t>(k);
  Matrix sum = Matrix::Zero(k, k);
  Matrix sum_sq = Matrix::Zero(k, k);
  Vector z(k);
  for (std::size_t i = 0; i < n_sim; ++i) {
    Rng rng = Rng::stream(seed, i);
    const Trajectory tr = sample_trajectory(mrp, rng);
    const auto tail = suffix_sums(tr);
    z.setZero();
    for (std::size_t t = 0; t < tr.size(); ++t) {
      const auto pos = g.position(tr.states[t]);
      if (!pos) continue;
      double term = tr.rewards[t] - v[tr.states[t]];
      if (t + 1 < tr.size() && g.contains(tr.states[t + 1])) {
        term += v[tr.states[t + 1]];
      } else {
        term += tail[t + 1];
      }
      z[static_cast<Index>(*pos)] += term;
    }
    kernels::rank1_update(1.0, {z.data(), ku}, {z.data(), ku}, {sum.data(), ku * ku});
    const Matrix outer = z * z.transpose();
    sum_sq += outer.cwiseProduct(outer);
  }
  const double n = static_cast<double>(n_sim);
  CovarianceReport rep;
  rep.method = CovarianceMethod::MonteCarloOracle;
  rep.n_sim = n_sim;
  rep.states = m;
  rep.occupancy = restrict(nu_full, m);
  rep.lambda = symmetrize(sum / n);
  rep.stderr_matrix = ((sum_sq / n - rep.lambda.cwiseProduct(rep.lambda)).cwiseMax(0.0) / (n - 1)).cwiseSqrt();
  rep.sigma = scale_by_occupancy(rep.lambda, rep.occupancy);
  rep.sandwiched = sandwich(restrict(mrp.transition(), m, m), rep.sigma);
  return rep;
}

RefinedDiagonal refined_diagonal_oracle(const Mrp& mrp, const Subgraph& g, StateId s, std::size_t n_sim,
                                        std::uint64_t seed) {
  if (!g.contains(s)) throw Error(ErrorCode::InvalidArgument, "state must belong to the subgraph", s);
  require_occupied(mrp, {s});
  const Vector sigma2 = exact_sigma2(mrp);
  constexpr std::size_t kBatches = 20;
  if (n_sim < kBatches) throw Error(ErrorCode::InvalidArgument, "n_sim must be at least 20");

  struct Moments {
    double n = 0, visits = 0, k1 = 0, k2 = 0, kcubic = 0, kpairs = 0;
    double loop_segments = 0, loop_visits = 0, loop_var = 0;
    double out_segments = 0, out_visits = 0, out_var = 0;

    void add(const Moments& o) {
      n += o.n; visits += o.visits; k1 += o.k1; k2 += o.k2; kcubic += o.kcubic; kpairs += o.kpairs;
      loop_segments += o.loop_segments; loop_visits += o.loop_visits; loop_var += o.loop_var;
      out_segments += o.out_segments; out_visits += o.out_visits; out_var += o.out_var;
    }
  };
  auto assemble = [&](const Moments& mo, RefinedDiagonal& out) {
    out.occupancy = mo.visits / mo.n;
    out.mean_exits = mo.k1 / mo.n;
    out.mean_exits_sq = mo.k2 / mo.n;
    out.loop_cubic = mo.kcubic / mo.n;
    out.loop_pairs = mo.kpairs / mo.n;
    out.nu_loop = mo.loop_segments > 0 ? mo.loop_visits / mo.loop_segments : 0.0;
    out.sigma2_loop = mo.loop_segments > 0 ? mo.loop_var / mo.loop_segments : 0.0;
    out.nu_out = mo.out_segments > 0 ? mo.out_visits / mo.out_segments : 0.0;
    out.sigma2_out = mo.out_segments > 0 ? mo.out_var / mo.out_segments : 0.0;
    out.lambda = out.occupancy * sigma2[s] + out.loop_cubic / 6.0 * out.sigma2_loop +
                 out.mean_exits_sq * out.sigma2_out +
                 (out.loop_pairs * out.nu_loop + 2.0 * out.mean_exits * out.nu_out) * sigma2[s];
    out.sigma = out.occupancy > 0 ? out.lambda / (out.occupancy * out.occupancy) : 0.0;
  };

  std::vector<Moments> batches(kBatches);
  std::vector<std::size_t> exits;
  for (std::size_t i = 0; i < n_sim; ++i) {
    Moments& mo = batches[i % kBatches];
    Rng rng = Rng::stream(seed, i);
    const Trajectory tr = sample_trajectory(mrp, rng);
    exits.clear();
    for (std::size_t t = 0; t < tr.size(); ++t) {
      if (tr.states[t] != s) continue;
      mo.visits += 1;
      if (t + 1 >= tr.size() || !g.contains(tr.states[t + 1])) exits.push_back(t);
    }
    const double k = static_cast<double>(exits.size());
    mo.n += 1;
    mo.k1 += k;
    mo.k2 += k * k;
    mo.kcubic += (k - 1) * k * (2 * k - 1);
    mo.kpairs += k * (k - 1);
    for (std::size_t e = 0; e < exits.size(); ++e) {
      const std::size_t end = e + 1 < exits.size() ? exits[e + 1] + 1 : tr.size();
      double visits = 0, var = 0;
      for (std::size_t t = exits[e] + 1; t < end; ++t) {
        visits += tr.states[t] == s ? 1.0 : 0.0;
        var += sigma2[tr.states[t]];
      }
      if (e + 1 < exits.size()) {
        mo.loop_segments += 1;
        mo.loop_visits += visits;
        mo.loop_var += var;
      } else {
        mo.out_segments += 1;
        mo.out_visits += visits;
        mo.out_var += var;
      }
    }
  }

  RefinedDiagonal out;
  out.state = s;
  out.n_sim = n_sim;
  Moments total;
  for (const auto& b : batches) total.add(b);
  assemble(total, out);
  double lam_ss = 0, sig_ss = 0;
  for (const auto& b : batches) {
    RefinedDiagonal part;
    assemble(b, part);
    lam_ss += (part.lambda - out.lambda) * (part.lambda - out.lambda);
    sig_ss += (part.sigma - out.sigma) * (part.sigma - out.sigma);
  }
  const double denom = static_cast<double>(kBatches) * static_cast<double>(kBatches - 1);
  out.lambda_stderr = std::sqrt(lam_ss / denom);
  out.sigma_stderr = std::sqrt(sig_ss / denom);
  return out;
}

std::vector<ExitDiagnostic> exit_diagnostics(const Mrp& mrp, const Subgraph& g) {
  require_occupied(mrp, g.members());
  const Vector sigma2 = exact_sigma2(mrp);
  const Vector nu = exact_occupancy(mrp);
  std::vector<ExitDiagnostic> out;
  for (auto s : g.members()) {
    ExitDiagnostic d;
    d.state = s;
    d.one_step_variance = sigma2[s];
    d.occupancy = nu[s];
    double inside = 0.0;
    for (auto t : g.members()) inside += mrp.transition()(s, t);
    d.exit_probability = std::max(0.0, 1.0 - inside);
    d.variance_over_occupancy = d.one_step_variance / d.occupancy;
    d.exit_over_occupancy = d.exit_probability / d.occupancy;
    out.push_back(d);
  }
  return out;
}

double psd_domination_margin(const CovarianceReport& rep) {
  if (rep.lambda_x.size() == 0) throw Error(ErrorCode::InvalidArgument, "report has no X/Y components");
  const Matrix gap = 2.0 * rep.lambda_x + 2.0 * rep.lambda_y - rep.lambda;
  const double trace = rep.lambda.trace();
  const double min_eig = linalg::min_eigenvalue(gap);
  return trace > 0.0 ? min_eig / trace : min_eig;
}

}  // namespace sb
