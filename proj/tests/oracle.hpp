#pragma once

// Exhaustive enumeration of every (state path, reward atom) outcome of an
// acyclic MRP with discrete rewards. Independent of the library's solvers.

#include <functional>
#include <vector>

#include "sb/mrp.hpp"

namespace oracle {

using sb::Matrix;
using sb::StateId;
using sb::Vector;

struct Outcome {
  std::vector<StateId> states;
  std::vector<double> rewards;
  double prob;
};

inline std::vector<double> atoms_of(const sb::RewardModel& r, std::vector<double>& probs) {
  using K = sb::RewardModel::Kind;
  if (r.kind() == K::Deterministic) {
    probs = {1.0};
    return {r.values()[0]};
  }
  if (r.kind() != K::DiscretePmf) throw std::runtime_error("enumeration needs discrete rewards");
  probs = r.probs();
  return r.values();
}

inline void enumerate(const sb::Mrp& mrp, const Vector& start, const std::function<void(const Outcome&)>& visit) {
  const auto n = static_cast<Eigen::Index>(mrp.num_states());
  Outcome cur{{}, {}, 1.0};
  std::function<void(StateId, double)> go = [&](StateId s, double p) {
    std::vector<double> probs;
    const auto atoms = atoms_of(mrp.rewards()[s], probs);
    for (std::size_t a = 0; a < atoms.size(); ++a) {
      if (probs[a] <= 0.0) continue;
      cur.states.push_back(s);
      cur.rewards.push_back(atoms[a]);
      const double pa = p * probs[a];
      double stay = 0.0;
      for (Eigen::Index t = 0; t < n; ++t) {
        const double q = mrp.transition()(s, t);
        if (q <= 0.0) continue;
        stay += q;
        go(static_cast<StateId>(t), pa * q);
      }
      if (1.0 - stay > 0.0) {
        cur.prob = pa * (1.0 - stay);
        visit(cur);
      }
      cur.states.pop_back();
      cur.rewards.pop_back();
    }
  };
  for (Eigen::Index s = 0; s < n; ++s) {
    if (start[s] > 0.0) go(static_cast<StateId>(s), start[s]);
  }
}

inline Vector values(const sb::Mrp& mrp) {
  const auto n = static_cast<Eigen::Index>(mrp.num_states());
  Vector v(n);
  for (Eigen::Index s = 0; s < n; ++s) {
    Vector e = Vector::Zero(n);
    e[s] = 1.0;
    double acc = 0.0;
    enumerate(mrp, e, [&](const Outcome& o) {
      double ret = 0.0;
      for (double r : o.rewards) ret += r;
      acc += o.prob * ret;
    });
    v[s] = acc;
  }
  return v;
}

inline Vector occupancy(const sb::Mrp& mrp) {
  Vector nu = Vector::Zero(static_cast<Eigen::Index>(mrp.num_states()));
  enumerate(mrp, mrp.initial(), [&](const Outcome& o) {
    for (auto s : o.states) nu[s] += o.prob;
  });
  return nu;
}

struct Covariance {
  Matrix lambda, lambda_x, lambda_y, sigma, sandwiched;
};

// Noise of state s in G along one trajectory:
// X(s) = sum_t 1{S_t = s} (R_t + V(S_{t+1}) - V(s)),
// Y(s) = sum_t 1{S_t = s, S_{t+1} not in G} (sum_{l > t} R_l - V(S_{t+1})), V(terminal) = 0.
inline Covariance subgraph_covariance(const sb::Mrp& mrp, const std::vector<StateId>& g) {
  const Vector v = values(mrp);
  const Vector nu = occupancy(mrp);
  const auto k = static_cast<Eigen::Index>(g.size());
  auto pos = [&](StateId s) -> Eigen::Index {
    for (Eigen::Index i = 0; i < k; ++i)
      if (g[static_cast<std::size_t>(i)] == s) return i;
    return -1;
  };
  Covariance c;
  c.lambda = c.lambda_x = c.lambda_y = Matrix::Zero(k, k);
  enumerate(mrp, mrp.initial(), [&](const Outcome& o) {
    Vector x = Vector::Zero(k), y = Vector::Zero(k);
    const std::size_t len = o.states.size();
    for (std::size_t t = 0; t < len; ++t) {
      const auto i = pos(o.states[t]);
      if (i < 0) continue;
      const bool more = t + 1 < len;
      const double v_next = more ? v[o.states[t + 1]] : 0.0;
      x[i] += o.rewards[t] + v_next - v[o.states[t]];
      if (!more || pos(o.states[t + 1]) < 0) {
        double tail = 0.0;
        for (std::size_t l = t + 1; l < len; ++l) tail += o.rewards[l];
        y[i] += tail - v_next;
      }
    }
    const Vector e = x + y;
    c.lambda += o.prob * e * e.transpose();
    c.lambda_x += o.prob * x * x.transpose();
    c.lambda_y += o.prob * y * y.transpose();
  });
  Matrix pg(k, k);
  Vector nug(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    nug[i] = nu[g[static_cast<std::size_t>(i)]];
    for (Eigen::Index j = 0; j < k; ++j) pg(i, j) = mrp.transition()(g[static_cast<std::size_t>(i)], g[static_cast<std::size_t>(j)]);
  }
  c.sigma = Matrix(nug.cwiseInverse().asDiagonal()) * c.lambda * Matrix(nug.cwiseInverse().asDiagonal());
  const Matrix inv = (Matrix::Identity(k, k) - pg).inverse();
  c.sandwiched = inv * c.sigma * inv.transpose();
  return c;
}

// Every-visit MC noise: e(s) = sum_t 1{S_t = s} (sum_{l >= t} R_l - V(s)).
inline Matrix mc_lambda(const sb::Mrp& mrp, const std::vector<StateId>& states) {
  const Vector v = values(mrp);
  const auto k = static_cast<Eigen::Index>(states.size());
  Matrix lam = Matrix::Zero(k, k);
  enumerate(mrp, mrp.initial(), [&](const Outcome& o) {
    Vector e = Vector::Zero(k);
    for (std::size_t t = 0; t < o.states.size(); ++t) {
      double tail = 0.0;
      for (std::size_t l = t; l < o.states.size(); ++l) tail += o.rewards[l];
      for (Eigen::Index i = 0; i < k; ++i)
        if (states[static_cast<std::size_t>(i)] == o.states[t]) e[i] += tail - v[o.states[t]];
    }
    lam += o.prob * e * e.transpose();
  });
  return lam;
}

}  // namespace oracle
