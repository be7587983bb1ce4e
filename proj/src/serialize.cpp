#include "sb/serialize.hpp"

#include <cmath>

namespace sb {

namespace {

// JSON has no infinity or NaN; those become null.
nlohmann::json number(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const Vector& v) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v[i]));
  return out;
}

nlohmann::json to_json(const Matrix& m) {
  auto out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(to_json(Vector(m.row(r).transpose())));
  return out;
}

nlohmann::json to_json(const ValidationReport& r) {
  auto issues = nlohmann::json::array();
  for (const auto& i : r.issues) {
    nlohmann::json j = {{"code", to_string(i.code)}, {"message", i.message}};
    if (i.state) j["state"] = *i.state;
    issues.push_back(j);
  }
  return {{"valid", r.valid},
          {"issues", issues},
          {"unreachable", r.unreachable},
          {"absorption", {{"absorbing", r.absorption.absorbing}, {"k0", r.absorption.k0}, {"norm", r.absorption.norm}}}};
}

nlohmann::json to_json(const HorizonProfile& p) {
  nlohmann::json j = {{"moments", p.moments}, {"h_estimate", p.h_estimate}, {"declared_holds", p.declared_holds}};
  if (p.h_declared) j["h_declared"] = *p.h_declared;
  return j;
}

nlohmann::json to_json(const CovarianceReport& r) {
  nlohmann::json j = {{"method", to_string(r.method)},
                      {"states", r.states},
                      {"occupancy", to_json(r.occupancy)},
                      {"lambda", to_json(r.lambda)},
                      {"sigma", to_json(r.sigma)},
                      {"sandwiched", to_json(r.sandwiched)}};
  if (r.lambda_x.size() > 0) {
    j["lambda_x"] = to_json(r.lambda_x);
    j["lambda_y"] = to_json(r.lambda_y);
  }
  if (r.method == CovarianceMethod::TruncatedDp) {
    j["horizon"] = r.horizon;
    j["tail_bound"] = r.tail_bound;
  }
  if (r.method == CovarianceMethod::MonteCarloOracle) {
    j["n_sim"] = r.n_sim;
    j["stderr"] = to_json(r.stderr_matrix);
  }
  return j;
}

nlohmann::json to_json(const EstimateResult& r) {
  return {{"states", r.states},
          {"values", to_json(r.values)},
          {"covered", r.covered},
          {"solver", {{"method", r.solver.method}, {"residual", r.solver.residual}, {"neumann_steps", r.solver.neumann_steps}}},
          {"warnings", r.warnings},
          {"trajectories_used", r.trajectories_used}};
}

nlohmann::json to_json(const RootSaConfig& c) {
  return {{"eta", c.eta}, {"m", c.m},     {"B0", c.B0},       {"K_restart", c.K_restart}, {"n_A", c.n_A},
          {"c", c.c},     {"c_prime", c.c_prime}, {"delta", c.delta}, {"fitted", c.fitted}};
}

nlohmann::json to_json(const RootSaResult& r) {
  auto phases = nlohmann::json::array();
  for (const auto& p : r.phases) {
    phases.push_back({{"name", p.name}, {"first", p.first}, {"count", p.count}, {"steps", p.steps}});
  }
  return {{"estimate", to_json(r.estimate)},
          {"config", to_json(r.config)},
          {"phases", phases},
          {"weights", {{"states", r.weights.states}, {"w", to_json(r.weights.w)}}},
          {"h_used", r.h_used},
          {"nu_min_used", r.nu_min_used}};
}

nlohmann::json to_json(const VarianceEstimate& v, bool include_powers) {
  auto splits = nlohmann::json::array();
  for (const auto& s : v.splits) splits.push_back({{"first", s.first}, {"count", s.count}});
  nlohmann::json j = {{"method", v.method},
                      {"value", number(v.value)},
                      {"s0", v.s0},
                      {"states", v.states},
                      {"L", v.L},
                      {"n0", v.n0},
                      {"splits", splits},
                      {"value_estimate", to_json(v.v_hat)},
                      {"sigma_hat", to_json(v.sigma_hat)},
                      {"warnings", v.warnings}};
  if (include_powers) {
    auto ph = nlohmann::json::array(), pc = nlohmann::json::array();
    for (const auto& m : v.p_hat) ph.push_back(to_json(m));
    for (const auto& m : v.p_check) pc.push_back(to_json(m));
    j["p_hat"] = ph;
    j["p_check"] = pc;
  }
  return j;
}

nlohmann::json to_json(const SelectionResult& r) {
  auto rounds = nlohmann::json::array();
  for (const auto& rd : r.trace.rounds) {
    rounds.push_back(
        {{"chosen", rd.chosen}, {"before", number(rd.before)}, {"after", number(rd.after)}, {"accepted", rd.accepted}});
  }
  return {{"subgraph", r.subgraph.members()},
          {"variance", number(r.variance)},
          {"budget_exceeded", r.budget_exceeded},
          {"trace",
           {{"candidates", r.trace.candidates},
            {"rounds", rounds},
            {"stop_reason", r.trace.stop_reason},
            {"evaluations", r.trace.evaluations}}}};
}

nlohmann::json to_json(const MrpFamily& f) {
  auto values = nlohmann::json::array();
  for (const auto& kv : f.values) values.push_back({{"state", kv.state}, {"value", kv.value}});
  nlohmann::json j = {{"name", f.name},
                      {"params", f.params},
                      {"num_states", f.model->num_states()},
                      {"start", f.start},
                      {"facts", f.facts},
                      {"materialized", f.materialized != nullptr}};
  if (f.values.size() <= 64) j["values"] = values;
  if (f.discount) j["discount"] = *f.discount;
  return j;
}

}  // namespace sb
