#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sb/benchmarks.hpp"
#include "sb/covariance.hpp"
#include "sb/error.hpp"
#include "sb/estimators.hpp"
#include "sb/mrp.hpp"
#include "sb/mrp_io.hpp"
#include "sb/rootsa.hpp"
#include "sb/sampling.hpp"
#include "sb/serialize.hpp"
#include "sb/subgraph_select.hpp"
#include "sb/variance_estimation.hpp"

namespace sb {

namespace {

using nlohmann::json;

struct Options {
  // model source
  std::string mrp_path;
  std::string family = "layered";
  std::size_t k = 4, T = 6;
  std::uint64_t N = 10;
  double gamma = 0.5;
  std::size_t lb_m = 2;
  double q = 0.5, epsilon = 0.1;

  // data and randomness
  std::uint64_t seed = 0;
  std::size_t n = 1000;
  std::string data_path, dump_data, trace_path;
  unsigned jobs = 1;

  // targets
  std::string subgraph = "all";
  std::optional<StateId> state;
  std::string method = "exact";
  std::string variance_kind;
  bool discounted = false;

  // constants
  double c = 1.0, c_prime = 1.0, c1 = 1.0, delta = 0.1, tail_tol = 1e-10;
  std::optional<double> h;
  std::optional<std::size_t> L;

  // selection
  std::string oracle = "exact";
  std::string candidates = "cut";
  std::optional<double> candidate_n;
  std::size_t budget = 10000;

  // sweeps
  std::vector<std::size_t> n_grid{1000, 10000};
  std::size_t R = 20;
  std::vector<std::string> estimators;
  std::string summary_path;

  std::string out_path;
};

std::vector<StateId> parse_states(const std::string& text) {
  std::vector<StateId> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      std::size_t used = 0;
      const unsigned long v = std::stoul(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(static_cast<StateId>(v));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad state id '" + tok + "'");
    }
  }
  return out;
}

std::string format_scalar(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

MrpFamily build_family(const Options& o) {
  if (!o.mrp_path.empty()) {
    auto mrp = std::make_shared<Mrp>(load_mrp(o.mrp_path));
    MrpFamily f;
    f.name = "file";
    f.params = {{"path", o.mrp_path}};
    f.model = mrp;
    f.materialized = mrp;
    const Vector v = exact_value(*mrp);
    for (Eigen::Index s = 0; s < v.size(); ++s) f.values.push_back({static_cast<StateId>(s), v[s]});
    Eigen::Index best = 0;
    mrp->initial().maxCoeff(&best);
    f.start = static_cast<StateId>(best);
    return f;
  }
  if (o.family == "layered") return layered_mrp(o.k, o.T);
  if (o.family == "td-failure") return td_failure_mrp(o.N, o.gamma);
  if (o.family == "lower-bound") {
    std::vector<int> psi(o.N), zeta(o.lb_m);
    for (std::size_t j = 0; j < psi.size(); ++j) psi[j] = j % 2 == 0 ? 1 : -1;
    for (std::size_t i = 0; i < zeta.size(); ++i) zeta[i] = i % 2 == 0 ? 1 : -1;
    return lower_bound_mrp(o.lb_m, o.N, o.q, o.epsilon, psi, zeta);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown family '" + o.family + "'");
}

const Mrp& require_materialized(const MrpFamily& f) {
  if (!f.materialized) throw Error(ErrorCode::InvalidArgument, "family '" + f.name + "' is too large to materialize");
  return *f.materialized;
}

Subgraph resolve_subgraph(const Options& o, const MrpFamily& f, TrajectorySpan data) {
  if (o.subgraph == "all") {
    if (!data.empty()) return Subgraph(visited_states(data));
    return Subgraph(reachable_states(require_materialized(f)));
  }
  if (o.subgraph == "sources" && f.name == "layered") return layered_sources(f.params.at("k").get<std::size_t>());
  if (o.subgraph == "pooling" && f.name == "layered") {
    return layered_pooling_subgraph(f.params.at("k").get<std::size_t>(), f.params.at("T").get<std::size_t>());
  }
  if (o.subgraph == "start") return Subgraph({o.state.value_or(f.start)});
  return Subgraph(parse_states(o.subgraph));
}

CovarianceMethod parse_method(const std::string& m) {
  if (m == "exact") return CovarianceMethod::Exact;
  if (m == "truncated_dp") return CovarianceMethod::TruncatedDp;
  if (m == "monte_carlo_oracle") return CovarianceMethod::MonteCarloOracle;
  throw Error(ErrorCode::InvalidArgument, "unknown covariance method '" + m + "'");
}

Dataset obtain_data(const Options& o, const MrpFamily& f) {
  Dataset data;
  if (!o.data_path.empty()) {
    std::ifstream in(o.data_path);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open " + o.data_path);
    data = read_dataset_csv(in, o.seed, f.model->fingerprint());
  } else {
    data = generate_dataset(*f.model, o.n, o.seed, kDefaultMaxLen, o.jobs);
  }
  if (!o.dump_data.empty()) {
    std::ofstream dump(o.dump_data);
    if (!dump) throw Error(ErrorCode::InvalidArgument, "cannot write " + o.dump_data);
    write_dataset_csv(dump, data);
  }
  return data;
}

RootSaSettings rootsa_settings(const Options& o) {
  RootSaSettings s;
  s.h = o.h;
  s.delta = o.delta;
  s.c = o.c;
  s.c_prime = o.c_prime;
  return s;
}

json echo_config(const CLI::App& app, const std::vector<std::string>& path, std::uint64_t seed) {
  json opts = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_name(false, true);
    if (name.empty() || name == "--help" || name == "--config" || name == "--out") continue;
    const std::string key = name.substr(name.find_first_not_of('-'));
    if (opt->count() > 0) {
      const auto& res = opt->results();
      opts[key] = res.size() == 1 ? json(res[0]) : json(res);
    } else if (!opt->get_default_str().empty()) {
      opts[key] = opt->get_default_str();
    }
  }
  opts["seed"] = seed;
  return {{"command", path}, {"options", opts}};
}

class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : fallback_(fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : fallback_; }

 private:
  std::ofstream file_;
  std::ostream& fallback_;
};

json envelope(const json& config, const json& result) {
  return {{"version", std::string(kVersion)}, {"config", config}, {"result", result}};
}

int cmd_validate(const Options& o, const json& config, std::ostream& out) {
  std::optional<Mrp> mrp;
  if (!o.mrp_path.empty()) {
    mrp.emplace(load_mrp(o.mrp_path, false));
  } else {
    mrp.emplace(require_materialized(build_family(o)));
  }
  const auto report = validate(*mrp);
  json result = to_json(report);
  if (report.valid) result["horizon"] = to_json(horizon_profile(*mrp, 8, o.h));
  Output(o.out_path, out).stream() << envelope(config, result).dump(2) << '\n';
  return report.valid ? 0 : 2;
}

int cmd_solve(const Options& o, const json& config, std::ostream& out) {
  const auto fam = build_family(o);
  const Mrp& mrp = require_materialized(fam);
  const StateId s0 = o.state.value_or(fam.start);
  if (!o.variance_kind.empty()) {
    double v = 0.0;
    if (o.variance_kind == "td") {
      v = sigma_td(mrp).sandwiched_at(s0);
    } else if (o.variance_kind == "mc") {
      v = sigma_mc(mrp, parse_method(o.method), {o.tail_tol}).sandwiched_at(s0);
    } else if (o.variance_kind == "subgraph") {
      v = sigma_subgraph(mrp, resolve_subgraph(o, fam, {}), parse_method(o.method), {o.tail_tol}).sandwiched_at(s0);
    } else {
      throw Error(ErrorCode::InvalidArgument, "--variance must be td, mc or subgraph");
    }
    Output(o.out_path, out).stream() << format_scalar(v) << '\n';
    return 0;
  }
  const Vector v = exact_value(mrp);
  const auto td = sigma_td(mrp);
  const auto mc = sigma_mc(mrp, parse_method(o.method), {o.tail_tol});
  json result = {{"family", to_json(fam)},
                 {"value", to_json(v)},
                 {"occupancy", to_json(exact_occupancy(mrp))},
                 {"one_step_variance", to_json(one_step_variance(mrp, v))},
                 {"td", to_json(td)},
                 {"mc", to_json(mc)}};
  Output(o.out_path, out).stream() << envelope(config, result).dump(2) << '\n';
  return 0;
}

int cmd_estimate(const std::string& kind, const Options& o, const json& config, std::ostream& out) {
  const auto fam = build_family(o);
  const auto data = obtain_data(o, fam);
  json result;
  if (kind == "td") {
    TdOptions td;
    if (o.discounted) {
      if (!fam.discount) throw Error(ErrorCode::InvalidArgument, "--discounted needs a discounted family");
      td.discount = fam.discount;
    }
    result = to_json(td_estimate(data, td));
  } else if (kind == "mc") {
    result = to_json(mc_estimate(data));
  } else if (kind == "subgraph") {
    result = to_json(subgraph_estimate(data, resolve_subgraph(o, fam, data)));
  } else {
    std::ofstream trace_file;
    PhaseTrace trace;
    if (!o.trace_path.empty()) {
      trace_file.open(o.trace_path);
      if (!trace_file) throw Error(ErrorCode::InvalidArgument, "cannot write " + o.trace_path);
      trace_file << "phase,t,theta\n";
      trace = [&trace_file](std::string_view phase, std::size_t t, const Vector& theta) {
        trace_file << phase << ',' << t << ",\"" << to_json(theta).dump() << "\"\n";
      };
    }
    result = to_json(root_sa_with_restarts(data, resolve_subgraph(o, fam, data), rootsa_settings(o), trace));
  }
  result["dataset"] = dataset_header(data);
  Output(o.out_path, out).stream() << envelope(config, result).dump(2) << '\n';
  return 0;
}

int cmd_variance(const std::string& kind, const Options& o, const json& config, std::ostream& out) {
  const auto fam = build_family(o);
  const StateId s0 = o.state.value_or(fam.start);
  json result;
  if (kind == "exact") {
    const Mrp& mrp = require_materialized(fam);
    const auto rep = sigma_subgraph(mrp, resolve_subgraph(o, fam, {}), parse_method(o.method), {o.tail_tol});
    result = {{"method", "exact"}, {"s0", s0}, {"value", rep.sandwiched_at(s0)}, {"covariance", to_json(rep)}};
  } else {
    const auto data = obtain_data(o, fam);
    const auto g = resolve_subgraph(o, fam, data);
    if (kind == "multistage") {
      VarianceConfig cfg;
      cfg.L = o.L;
      cfg.h = o.h;
      cfg.rootsa = rootsa_settings(o);
      result = to_json(variance_estimate(data, g, s0, cfg));
    } else {
      result = to_json(variance_estimate_plugin(data, g, s0));
    }
    result["dataset"] = dataset_header(data);
  }
  Output(o.out_path, out).stream() << envelope(config, result).dump(2) << '\n';
  return 0;
}

int cmd_select(const Options& o, const json& config, std::ostream& out) {
  const auto fam = build_family(o);
  const StateId s0 = o.state.value_or(fam.start);
  const auto data = obtain_data(o, fam);
  VarianceFn fn;
  if (o.oracle == "exact") {
    fn = exact_variance_oracle(require_materialized(fam), s0);
  } else if (o.oracle == "data") {
    VarianceConfig cfg;
    cfg.L = o.L;
    cfg.h = o.h;
    cfg.rootsa = rootsa_settings(o);
    fn = data_variance_fn(data, s0, cfg);
  } else {
    throw Error(ErrorCode::InvalidArgument, "--oracle must be exact or data");
  }
  SelectionResult res{Subgraph({s0}), 0.0, {}, false};
  if (o.candidates == "all") {
    const auto visited = visited_states(data);
    res = greedy_select(visited, s0, fn, o.budget);
  } else {
    const double n_cut = o.candidate_n.value_or(static_cast<double>(data.size()));
    res = greedy_select(data, s0, n_cut, fn, o.c1, o.h, o.budget);
  }
  Output(o.out_path, out).stream() << envelope(config, to_json(res)).dump(2) << '\n';
  return res.budget_exceeded ? 3 : 0;
}

std::vector<EstimatorSpec> bench_estimators(const Options& o, const MrpFamily& fam) {
  std::vector<std::string> names = o.estimators;
  if (names.empty()) {
    if (fam.name == "layered") names = {"mc", "td", "subgraph:sources", "subgraph:pooling"};
    else if (fam.name == "td-failure") names = {"mc", "td_discounted"};
    else names = {"mc", "td"};
  }
  std::vector<EstimatorSpec> out;
  for (const auto& name : names) {
    EstimatorSpec spec;
    const auto colon = name.find(':');
    spec.kind = name.substr(0, colon);
    if (spec.kind == "td_discounted") {
      spec.kind = "td";
      if (!fam.discount) throw Error(ErrorCode::InvalidArgument, "td_discounted needs a discounted family");
      spec.td.discount = fam.discount;
    }
    if (colon != std::string::npos) {
      Options sub = o;
      sub.subgraph = name.substr(colon + 1);
      spec.subgraph = resolve_subgraph(sub, fam, {});
    }
    spec.rootsa = rootsa_settings(o);
    spec.states = {o.state.value_or(fam.start)};
    out.push_back(std::move(spec));
  }
  return out;
}

int cmd_bench(const std::string& kind, Options o, const CLI::App& app, json config, std::ostream& out) {
  if (kind == "layered") o.family = "layered";
  if (kind == "lower-bound") o.family = "lower-bound";
  if (kind == "td-failure") {
    o.family = "td-failure";
    if (app.get_option("--N")->count() == 0) {
      std::size_t n_max = 0;
      for (auto n : o.n_grid) n_max = std::max(n_max, n);
      o.N = 40 * static_cast<std::uint64_t>(n_max) * n_max;
      config["options"]["N"] = o.N;
    }
  }
  const auto fam = build_family(o);
  std::vector<ExperimentRecord> records;
  for (const auto& spec : bench_estimators(o, fam)) {
    auto part = run_replicates(fam, spec, o.n_grid, o.R, o.seed, o.jobs);
    records.insert(records.end(), part.begin(), part.end());
  }
  Output(o.out_path, out).stream() << [&] {
    std::ostringstream ss;
    write_records_csv(ss, records, config);
    return ss.str();
  }();
  if (!o.summary_path.empty()) {
    std::ofstream s(o.summary_path);
    if (!s) throw Error(ErrorCode::InvalidArgument, "cannot write " + o.summary_path);
    auto summary = summarize_records(records);
    summary["config"] = config;
    summary["family"] = to_json(fam);
    s << summary.dump(2) << '\n';
  }
  return 0;
}

json error_body(const std::string& code, const std::string& message, std::optional<unsigned long> state = {}) {
  json e = {{"code", code}, {"message", message}};
  if (state) e["state"] = *state;
  return {{"error", e}};
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Subgraph-based policy evaluation toolkit", "sbtool"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "TOML/INI file with option defaults");
  app.fallthrough();
  app.require_subcommand(1);

  Options o;
  std::optional<std::uint64_t> seed;
  app.add_option("--mrp", o.mrp_path, "MRP spec JSON file (overrides --family)");
  app.add_option("--family", o.family, "layered | td-failure | lower-bound")->capture_default_str();
  app.add_option("--k", o.k, "layered: source count")->capture_default_str();
  app.add_option("--T", o.T, "layered: trajectory length")->capture_default_str();
  app.add_option("--N", o.N, "td-failure: branch count; lower-bound: second-layer size")->capture_default_str();
  app.add_option("--gamma", o.gamma, "td-failure: discount")->capture_default_str();
  app.add_option("--lb-m", o.lb_m, "lower-bound: first-layer size")->capture_default_str();
  app.add_option("--q", o.q, "lower-bound: transition mass")->capture_default_str();
  app.add_option("--epsilon", o.epsilon, "lower-bound: reward bias")->capture_default_str();
  app.add_option("--seed", seed, "master seed (fallback: SB_SEED, then 0)");
  app.add_option("--n", o.n, "trajectories to generate")->capture_default_str();
  app.add_option("--data", o.data_path, "read trajectories from CSV instead of generating");
  app.add_option("--dump-data", o.dump_data, "write the trajectories used to CSV");
  app.add_option("--trace", o.trace_path, "rootsa: write iterates to CSV");
  app.add_option("--jobs", o.jobs, "parallel workers for sampling and replicates")->capture_default_str();
  app.add_option("--subgraph", o.subgraph, "all | sources | pooling | start | comma-separated ids")->capture_default_str();
  app.add_option("--state", o.state, "target state (default: the family's start state)");
  app.add_option("--method", o.method, "exact | truncated_dp | monte_carlo_oracle")->capture_default_str();
  app.add_flag("--discounted", o.discounted, "td: discounted form with the family's discount");
  app.add_option("--c", o.c, "rootsa constant c")->capture_default_str();
  app.add_option("--c-prime", o.c_prime, "rootsa constant c'")->capture_default_str();
  app.add_option("--c1", o.c1, "candidate-set constant")->capture_default_str();
  app.add_option("--delta", o.delta, "failure probability for the rootsa defaults")->capture_default_str();
  app.add_option("--tail-tol", o.tail_tol, "truncation tolerance")->capture_default_str();
  app.add_option("--horizon", o.h, "effective horizon (default: estimated)");
  app.add_option("--L", o.L, "power-series length for the variance estimate");
  app.add_option("--oracle", o.oracle, "select: exact | data")->capture_default_str();
  app.add_option("--candidates", o.candidates, "select: cut | all")->capture_default_str();
  app.add_option("--candidate-n", o.candidate_n, "select: n in the candidate threshold");
  app.add_option("--budget", o.budget, "select: maximum variance evaluations")->capture_default_str();
  app.add_option("--n-grid", o.n_grid, "bench: sample sizes")->delimiter(',')->capture_default_str();
  app.add_option("--R", o.R, "bench: replicates per sample size")->capture_default_str();
  app.add_option("--estimators", o.estimators, "bench: mc, td, td_discounted, subgraph[:G], rootsa[:G]")
      ->delimiter(',');
  app.add_option("--summary", o.summary_path, "bench: summary JSON path");
  app.add_option("--out", o.out_path, "output file (default: stdout)");

  auto* validate_cmd = app.add_subcommand("validate", "check an MRP spec");
  auto* solve_cmd = app.add_subcommand("solve", "exact values, occupancy and variances");
  solve_cmd->add_option("--variance", o.variance_kind, "print one scalar variance: td | mc | subgraph");
  std::string estimate_kind, variance_kind, bench_kind;
  auto* estimate_cmd = app.add_subcommand("estimate", "run an estimator on sampled or loaded data");
  estimate_cmd->add_option("kind", estimate_kind, "td | mc | subgraph | rootsa")
      ->required()
      ->check(CLI::IsMember({"td", "mc", "subgraph", "rootsa"}));
  auto* variance_cmd = app.add_subcommand("variance", "asymptotic variance at the target state");
  variance_cmd->add_option("kind", variance_kind, "exact | multistage | plugin")
      ->required()
      ->check(CLI::IsMember({"exact", "multistage", "plugin"}));
  auto* select_cmd = app.add_subcommand("select", "greedy subgraph selection");
  auto* bench_cmd = app.add_subcommand("bench", "replicate sweeps to CSV");
  bench_cmd->add_option("kind", bench_kind, "layered | td-failure | lower-bound | sweep")
      ->required()
      ->check(CLI::IsMember({"layered", "td-failure", "lower-bound", "sweep"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << error_body("UsageError", e.what()).dump() << '\n';
    return 2;
  }

  if (seed) {
    o.seed = *seed;
  } else if (const char* env = std::getenv("SB_SEED")) {
    try {
      o.seed = std::stoull(env);
    } catch (const std::exception&) {
      err << error_body("UsageError", std::string("SB_SEED is not an integer: ") + env).dump() << '\n';
      return 2;
    }
  }

  try {
    std::vector<std::string> path;
    CLI::App* sub = app.get_subcommands().front();
    path.push_back(sub->get_name());
    if (sub == estimate_cmd) path.push_back(estimate_kind);
    if (sub == variance_cmd) path.push_back(variance_kind);
    if (sub == bench_cmd) path.push_back(bench_kind);
    json config = echo_config(app, path, o.seed);
    if (sub == solve_cmd && !o.variance_kind.empty()) config["options"]["variance"] = o.variance_kind;

    if (sub == validate_cmd) return cmd_validate(o, config, out);
    if (sub == solve_cmd) return cmd_solve(o, config, out);
    if (sub == estimate_cmd) return cmd_estimate(estimate_kind, o, config, out);
    if (sub == variance_cmd) return cmd_variance(variance_kind, o, config, out);
    if (sub == select_cmd) return cmd_select(o, config, out);
    return cmd_bench(bench_kind, o, app, config, out);
  } catch (const Error& e) {
    err << error_body(std::string(to_string(e.code())), e.what(), e.state()).dump() << '\n';
    return is_validation_error(e.code()) ? 2 : 3;
  } catch (const std::exception& e) {
    err << error_body("InternalError", e.what()).dump() << '\n';
    return 3;
  }
}

}  // namespace sb
