#pragma once

#include <Eigen/Dense>
#include <random>

#include "bellcert/inequalities.hpp"
#include "bellcert/quantum.hpp"
#include "bellcert/scenario.hpp"

namespace bellcert::testutil {

inline QuantumModel random_model(const Scenario& sc, int da, int db, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  auto random_basis = [&](int d) {
    CMat raw(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) raw(i, j) = Cplx(g(rng), g(rng));
    Eigen::HouseholderQR<CMat> qr(raw);
    CMat q = qr.householderQ();
    std::vector<CVec> vecs;
    for (int k = 0; k < d; ++k) vecs.push_back(q.col(k));
    return vecs;
  };
  auto random_measurement = [&](int d, int outcomes) {
    auto basis = random_basis(d);
    std::vector<CMat> projs(outcomes, CMat::Zero(d, d));
    // distribute basis directions round-robin over outcomes
    for (int k = 0; k < d; ++k)
      projs[k % outcomes] += basis[k] * basis[k].adjoint();
    return ProjectiveMeasurement(std::move(projs));
  };
  QuantumModel m;
  CVec amps(da * db);
  for (int i = 0; i < amps.size(); ++i) amps[i] = Cplx(g(rng), g(rng));
  amps /= amps.norm();
  m.state = PureState(da, db, std::move(amps));
  for (int x = 0; x < sc.m_a; ++x) m.alice.push_back(random_measurement(da, sc.n_a));
  for (int y = 0; y < sc.m_b; ++y) m.bob.push_back(random_measurement(db, sc.n_b));
  return m;
}

inline Behavior random_local_behavior(const Scenario& sc, int mixture, std::mt19937_64& rng) {
  auto strategies = all_deterministic_strategies(sc);
  std::uniform_int_distribution<size_t> pick(0, strategies.size() - 1);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<double> table(sc.joint_cells(), 0.0);
  std::vector<double> w(mixture);
  double tot = 0.0;
  for (double& v : w) tot += (v = u(rng));
  for (int k = 0; k < mixture; ++k) {
    Behavior d = deterministic_behavior(strategies[pick(rng)], sc);
    for (int i = 0; i < sc.joint_cells(); ++i) table[i] += w[k] / tot * d.table()[i];
  }
  return Behavior(sc, std::move(table));
}

/// Random no-signaling behavior: mixture of a random quantum behavior and a
/// random local one.
inline Behavior random_ns_behavior(const Scenario& sc, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Behavior q = behavior_from_model(random_model(sc, sc.n_a, sc.n_b, rng));
  Behavior l = random_local_behavior(sc, 4, rng);
  return Behavior::mix(q, l, u(rng));
}

/// Random sparse functional for oracle-equivalence checks.
inline BellFunctional random_functional(const Scenario& sc, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> coin(0, 3);
  BellFunctional f(sc);
  for (int x = 0; x < sc.m_a; ++x)
    for (int y = 0; y < sc.m_b; ++y)
      for (int a = 0; a < sc.n_a; ++a)
        for (int b = 0; b < sc.n_b; ++b)
          if (coin(rng) == 0) f.add_joint(a, b, x, y, u(rng));
  for (int x = 0; x < sc.m_a; ++x)
    for (int a = 0; a < sc.n_a; ++a)
      if (coin(rng) == 0) f.add_marginal_a(a, x, u(rng));
  for (int y = 0; y < sc.m_b; ++y)
    for (int b = 0; b < sc.n_b; ++b)
      if (coin(rng) == 0) f.add_marginal_b(b, y, u(rng));
  f.add_constant(u(rng));
  return f;
}

/// Brute-force classical bound: full joint enumeration over both parties.
inline double classical_bound_bruteforce(const BellFunctional& f) {
  const Scenario& sc = f.scenario();
  double best = -1e300;
  for (const auto& s : all_deterministic_strategies(sc))
    best = std::max(best, evaluate_functional(f, deterministic_behavior(s, sc)));
  return best;
}

}  // namespace bellcert::testutil
