#include <cmath>

#include "doctest.h"
#include "sb/benchmarks.hpp"
#include "sb/subgraph_select.hpp"

using namespace sb;

TEST_SUITE("select") {
  TEST_CASE("candidate thresholds") {
    const auto fam = layered_mrp(4, 6);
    const auto data = generate_dataset(*fam.model, 2000, 3);
    CHECK(candidate_set(data, 2000, 1e9, 6.0).empty());
    CHECK(candidate_set(data, 2000, 0.0, 6.0).size() == 9);
    CHECK(candidate_set(data, 1e9, 1.0, 6.0).size() == 9);
  }

  TEST_CASE("constant variance stops after one round") {
    const auto res = greedy_select({0, 1, 2}, 0, [](const Subgraph&) { return 1.0; });
    CHECK(res.subgraph == Subgraph({0}));
    CHECK(res.trace.stop_reason == "no_improvement");
    REQUIRE(res.trace.rounds.size() == 1);
    CHECK_FALSE(res.trace.rounds[0].accepted);
    CHECK(res.trace.rounds[0].chosen == 1);  // tie goes to the lowest id
  }

  TEST_CASE("accepted variances strictly decrease") {
    // Variance = 10 - sum of member ids, capped at three members.
    auto fn = [](const Subgraph& g) {
      double v = 10.0;
      for (auto s : g.members()) v -= s;
      return g.size() > 3 ? 100.0 : v;
    };
    const auto res = greedy_select({1, 2, 3, 4}, 0, fn);
    CHECK(res.subgraph == Subgraph({0, 3, 4}));
    double last = std::numeric_limits<double>::infinity();
    for (const auto& r : res.trace.rounds) {
      if (!r.accepted) break;
      CHECK(r.after < r.before);
      CHECK(r.after < last);
      last = r.after;
    }
  }

  TEST_CASE("evaluation budget") {
    std::size_t calls = 0;
    auto fn = [&](const Subgraph& g) {
      ++calls;
      return 100.0 - static_cast<double>(g.size());
    };
    const auto res = greedy_select({1, 2, 3, 4, 5}, 0, fn, 4);
    CHECK(res.budget_exceeded);
    CHECK(res.trace.stop_reason == "budget_exceeded");
    CHECK(calls == 4);
    CHECK(res.subgraph.contains(0));
  }

  TEST_CASE("exact oracle on the layered MRP") {
    const auto fam = layered_mrp(4, 6);
    std::vector<StateId> all;
    for (StateId s = 0; s < 9; ++s) all.push_back(s);
    const auto res = greedy_select(all, 0, exact_variance_oracle(*fam.materialized, 0));
    CHECK(res.variance == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(res.subgraph.contains(0));
    CHECK(res.subgraph.contains(4));
    // Permuting the candidate list does not change the outcome.
    const auto rev = greedy_select({8, 7, 6, 5, 4, 3, 2, 1, 0}, 0, exact_variance_oracle(*fam.materialized, 0));
    CHECK(rev.subgraph == res.subgraph);
  }

  TEST_CASE("TD-failure MRP keeps the singleton") {
    const auto fam = td_failure_mrp(20000);
    const auto data = generate_dataset(*fam.model, 200, 4);
    const auto res = greedy_select(data, 0, 200, [](const Subgraph& g) { return 1.0 / static_cast<double>(g.size()); });
    CHECK(res.subgraph == Subgraph({0}));
  }
}
