#include <cmath>
#include <vector>

#include "doctest.h"
#include "sb/benchmarks.hpp"
#include "sb/error.hpp"
#include "sb/estimators.hpp"
#include "sb/rootsa.hpp"

using namespace sb;

namespace {

using Vec = std::vector<double>;

// F_t(theta) = A_t theta + b_t with entries depending on t.
Vec scripted(std::size_t t, const Vec& th) {
  const std::size_t d = th.size();
  Vec out(d);
  for (std::size_t i = 0; i < d; ++i) {
    double acc = 0.3 * static_cast<double>(i + 1) + 0.01 * static_cast<double>(t % 7);
    for (std::size_t j = 0; j < d; ++j) acc += (0.1 + 0.02 * static_cast<double>((i + 2 * j + t) % 5)) * th[j];
    out[i] = acc;
  }
  return out;
}

Vector to_eigen(const Vec& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

// Line-by-line transcription with explicit theta_t, u_t arrays.
Vec reference(const Vec& theta0, double eta, std::size_t B0, std::size_t T) {
  const std::size_t d = theta0.size();
  std::vector<Vec> theta(T + 1, theta0), u(T + 1, Vec(d, 0.0));
  Vec avg(d, 0.0);
  for (std::size_t t = 1; t <= B0; ++t) {
    const Vec f = scripted(t, theta0);
    for (std::size_t i = 0; i < d; ++i) avg[i] += f[i] - theta0[i];
  }
  for (std::size_t i = 0; i < d; ++i) avg[i] /= static_cast<double>(B0);
  for (std::size_t t = 1; t <= B0; ++t) {
    u[t] = avg;
    theta[t] = theta0;
  }
  for (std::size_t t = B0 + 1; t <= T; ++t) {
    const Vec f1 = scripted(t, theta[t - 1]);
    const Vec f2 = scripted(t, theta[t - 2]);
    const double decay = static_cast<double>(t - 1) / static_cast<double>(t);
    for (std::size_t i = 0; i < d; ++i) {
      u[t][i] = (f1[i] - theta[t - 1][i]) + decay * (u[t - 1][i] - (f2[i] - theta[t - 2][i]));
      theta[t][i] = theta[t - 1][i] + eta * u[t][i];
    }
  }
  return theta[T];
}

Vector run_library(const Vec& theta0, double eta, std::size_t B0, std::size_t T) {
  std::size_t t = 0;
  OracleStream stream = [&t]() -> Oracle {
    const std::size_t step = ++t;
    return [step](const Vector& th) {
      return to_eigen(scripted(step, Vec(th.data(), th.data() + th.size())));
    };
  };
  return root_sa(stream, to_eigen(theta0), eta, B0, T);
}

Trajectory traj(std::vector<StateId> s, std::vector<double> r) { return {std::move(s), std::move(r)}; }

}  // namespace

TEST_SUITE("rootsa") {
  TEST_CASE("transcription matches the scripted reference exactly") {
    for (std::size_t B0 : {2u, 3u, 5u}) {
      for (std::size_t T : {B0, B0 + 1, std::size_t{25}}) {
        const Vec theta0{0.1, -0.2, 0.3};
        const Vec ref = reference(theta0, 0.4, B0, T);
        const Vector lib = run_library(theta0, 0.4, B0, T);
        CAPTURE(B0);
        CAPTURE(T);
        for (std::size_t i = 0; i < 3; ++i) CHECK(lib[static_cast<Eigen::Index>(i)] == ref[i]);
      }
    }
  }

  TEST_CASE("burn-in only") {
    const Vector out = run_library({1.0, 2.0}, 0.5, 4, 3);
    CHECK(out[0] == 1.0);
    CHECK(out[1] == 2.0);
  }

  TEST_CASE("converges on a deterministic contraction") {
    const Vector target = Vector::Constant(2, 3.0);
    OracleStream stream = [&]() -> Oracle { return [&](const Vector& th) -> Vector { return th + 0.5 * (target - th); }; };
    const Vector out = root_sa(stream, Vector::Zero(2), 0.5, 2, 200);
    CHECK((out - target).cwiseAbs().maxCoeff() < 1e-8);
  }

  TEST_CASE("divergence is reported") {
    OracleStream stream = [] { return Oracle([](const Vector& th) -> Vector { return 1e300 * (th + Vector::Ones(1)); }); };
    CHECK_THROWS_AS(root_sa(stream, Vector::Zero(1), 1.0, 2, 50), Error);
  }

  TEST_CASE("batch operator") {
    // G = {0, 1}; trajectory 0 -> 1 -> 2 (rewards 1, 2, 3) and 1 -> end (reward 4).
    const std::vector<Trajectory> batch{traj({0, 1, 2}, {1, 2, 3}), traj({1}, {4})};
    const Subgraph g({0, 1});
    WeightVector w{{0, 1}, Vector::Constant(2, 1.0)};
    Vector theta(2);
    theta << 10.0, 20.0;
    const Vector out = stochastic_operator(batch, theta, w, g);
    // s = 0: theta(1) + R = 21, minus theta(0) -> 11; s = 1: exits with tail 3, and reward 2 + 4, minus 2 theta(1).
    CHECK(out[0] == doctest::Approx(10.0 + 11.0 / 2.0));
    CHECK(out[1] == doctest::Approx(20.0 + (3.0 + 6.0 - 40.0) / 2.0));
  }

  TEST_CASE("weights") {
    const std::vector<Trajectory> aux{traj({0, 1}, {0, 0}), traj({0}, {0})};
    const auto w = compute_weights(aux, Subgraph({0, 1}));
    CHECK(w.w[0] == doctest::Approx(0.5));
    CHECK(w.w[1] == doctest::Approx(1.0));
    CHECK_THROWS_AS(compute_weights(aux, Subgraph({0, 7})), Error);
  }

  TEST_CASE("default configuration") {
    const auto full = RootSaConfig::defaults(10000000000ull, 1.0, 1.0);
    CHECK_FALSE(full.fitted);
    CHECK(full.required_budget() <= 10000000000ull);
    const auto fit = RootSaConfig::defaults(10000, 6.0, 0.25);
    CHECK(fit.fitted);
    CHECK(fit.required_budget() <= 10000u);
    CHECK(fit.n_A <= 1000u);
    CHECK(fit.B0 >= 2u);
    CHECK_NOTHROW(fit.check());
    RootSaConfig bad;
    bad.B0 = 1;
    CHECK_THROWS_AS(bad.check(), Error);
  }

  TEST_CASE("restarted estimator on the layered MRP") {
    const auto fam = layered_mrp(4, 6);
    const auto data = generate_dataset(*fam.model, 20000, 12);
    const auto g = layered_pooling_subgraph(4, 6);
    std::size_t calls = 0;
    const auto res = root_sa_with_restarts(data, g, {}, [&](std::string_view, std::size_t, const Vector&) { ++calls; });
    CHECK(calls > 0);
    std::size_t next = 0;
    for (const auto& ph : res.phases) {
      CHECK(ph.first == next);
      next += ph.count;
    }
    CHECK(next == data.size());
    const auto plug = subgraph_estimate(data, g);
    for (StateId s = 0; s < 4; ++s) CHECK(std::abs(res.estimate.value(s) - plug.value(s)) < 0.1);
    const auto again = root_sa_with_restarts(data, g);
    CHECK(again.estimate.values == res.estimate.values);

    RootSaSettings tight;
    tight.config = RootSaConfig{0.5, 1000, 10, 3, 100};
    try {
      root_sa_with_restarts(data.slice(0, 5000), g, tight);
      FAIL("expected InsufficientBudget");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InsufficientBudget);
    }
  }

  TEST_CASE("horizon from lengths") {
    const std::vector<Trajectory> data{traj({0, 0, 0}, {0, 0, 0}), traj({0, 0, 0}, {0, 0, 0})};
    CHECK(horizon_from_lengths(data) == doctest::Approx(3.0));
  }
}
