#include "sb/mrp_io.hpp"

#include <fstream>

namespace sb {

using nlohmann::json;

namespace {

[[noreturn]] void parse_fail(const std::string& what) { throw Error(ErrorCode::ParseError, what); }

StateId state_index(const json& v, std::size_t n) {
  if (!v.is_number_integer() || v.get<long long>() < 0 || static_cast<std::size_t>(v.get<long long>()) >= n) {
    parse_fail("state id out of range: " + v.dump());
  }
  return static_cast<StateId>(v.get<long long>());
}

double number(const json& v, const char* what) {
  if (!v.is_number()) parse_fail(std::string(what) + " must be a number");
  return v.get<double>();
}

RewardModel reward_from_json(const json& r) {
  const auto kind = r.at("kind").get<std::string>();
  const json& params = r.contains("params") ? r.at("params") : json::object();
  if (kind == "deterministic") return RewardModel::deterministic(number(params.at("value"), "value"));
  if (kind == "uniform") return RewardModel::uniform(number(params.at("lo"), "lo"), number(params.at("hi"), "hi"));
  if (kind == "discrete") {
    return RewardModel::discrete(params.at("values").get<std::vector<double>>(), params.at("probs").get<std::vector<double>>());
  }
  parse_fail("unknown reward kind '" + kind + "'");
}

}  // namespace

Mrp mrp_from_json(const json& spec, bool check) {
  try {
    const auto n_raw = spec.at("n_states");
    if (!n_raw.is_number_integer() || n_raw.get<long long>() <= 0) parse_fail("n_states must be a positive integer");
    const auto n = static_cast<std::size_t>(n_raw.get<long long>());
    const auto ni = static_cast<Eigen::Index>(n);

    Matrix p = Matrix::Zero(ni, ni);
    for (const auto& t : spec.at("transitions")) {
      if (!t.is_array() || t.size() != 3) parse_fail("transition entries are [s, s', p]");
      const auto s = state_index(t[0], n);
      const auto s2 = state_index(t[1], n);
      const double prob = number(t[2], "transition probability");
      if (prob < 0.0) parse_fail("negative transition probability");
      if (p(s, s2) != 0.0) parse_fail("duplicate transition entry");
      p(s, s2) = prob;
    }

    std::vector<std::optional<RewardModel>> slots(n);
    for (const auto& r : spec.at("rewards")) {
      const auto s = state_index(r.at("state"), n);
      if (slots[s]) parse_fail("duplicate reward entry for state " + std::to_string(s));
      slots[s] = reward_from_json(r);
    }
    std::vector<RewardModel> rewards;
    rewards.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
      if (!slots[s]) parse_fail("missing reward for state " + std::to_string(s));
      rewards.push_back(*slots[s]);
    }

    Vector mu = Vector::Zero(ni);
    for (const auto& e : spec.at("initial")) {
      if (!e.is_array() || e.size() != 2) parse_fail("initial entries are [s, p]");
      const auto s = state_index(e[0], n);
      const double prob = number(e[1], "initial probability");
      if (prob < 0.0) parse_fail("negative initial probability");
      mu[s] += prob;
    }

    Mrp mrp(std::move(p), std::move(rewards), std::move(mu));
    if (check) require_valid(mrp);
    return mrp;
  } catch (const json::exception& e) {
    parse_fail(e.what());
  }
}

json mrp_to_json(const Mrp& mrp) {
  const auto n = mrp.num_states();
  json transitions = json::array();
  json rewards = json::array();
  json initial = json::array();
  for (std::size_t s = 0; s < n; ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    for (std::size_t t = 0; t < n; ++t) {
      const double v = mrp.transition()(si, static_cast<Eigen::Index>(t));
      if (v > 0.0) transitions.push_back({s, t, v});
    }
    const auto& r = mrp.rewards()[s];
    json params;
    switch (r.kind()) {
      case RewardModel::Kind::Deterministic: params = {{"value", r.values()[0]}}; break;
      case RewardModel::Kind::UniformInterval: params = {{"lo", r.values()[0]}, {"hi", r.values()[1]}}; break;
      case RewardModel::Kind::DiscretePmf: params = {{"values", r.values()}, {"probs", r.probs()}}; break;
    }
    rewards.push_back({{"state", s}, {"kind", to_string(r.kind())}, {"params", params}});
    if (mrp.initial()[si] > 0.0) initial.push_back({s, mrp.initial()[si]});
  }
  return {{"n_states", n}, {"transitions", transitions}, {"rewards", rewards}, {"initial", initial}};
}

Mrp load_mrp(const std::filesystem::path& path, bool check) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
  json spec;
  try {
    in >> spec;
  } catch (const json::exception& e) {
    parse_fail(path.string() + ": " + e.what());
  }
  return mrp_from_json(spec, check);
}

void save_mrp(const Mrp& mrp, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out << mrp_to_json(mrp).dump(2) << '\n';
}

}  // namespace sb
