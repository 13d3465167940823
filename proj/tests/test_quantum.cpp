#include "bellcert/quantum.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "bellcert/inequalities.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace bellcert;

TEST_CASE("maximally entangled computational-basis correlations") {
  QuantumModel m;
  m.state = PureState::maximally_entangled(2);
  std::vector<CMat> projs = {CMat::Zero(2, 2), CMat::Zero(2, 2)};
  projs[0](0, 0) = 1;
  projs[1](1, 1) = 1;
  m.alice = {ProjectiveMeasurement(projs), ProjectiveMeasurement(projs)};
  m.bob = m.alice;
  Behavior p = behavior_from_model(m);
  CHECK(p.at(0, 0, 0, 0) == doctest::Approx(0.5));
  CHECK(p.at(1, 1, 0, 0) == doctest::Approx(0.5));
  CHECK(p.at(0, 1, 0, 0) == doctest::Approx(0.0));
  CHECK(p.at(1, 0, 0, 0) == doctest::Approx(0.0));
}

TEST_CASE("model behaviors satisfy normalization and no-signaling") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 25; ++i) {
    Scenario sc(2 + i % 3, 2 + (i / 2) % 2, 2 + i % 2, 2 + i % 2);
    auto model = testutil::random_model(sc, 2 + i % 3, 2 + (i + 1) % 3, rng);
    Behavior p = behavior_from_model(model);  // constructor checks normalization
    CHECK(p.signaling_gap() <= 1e-10);
  }
}

TEST_CASE("projective measurement validation") {
  CMat p0 = CMat::Zero(2, 2);
  p0(0, 0) = 1;
  CHECK_THROWS(ProjectiveMeasurement({p0, p0}));  // not complete / not orthogonal
  // Lowdin snap accepts rounded data but rejects garbage
  CVec a(2), b(2);
  a << 0.7071, 0.7071;
  b << 0.7071, -0.7071;
  CHECK_NOTHROW(ProjectiveMeasurement::from_vectors({a, b}));
  CVec c(2);
  c << 1.0, 0.9;
  CHECK_THROWS(ProjectiveMeasurement::from_vectors({a, c}));
}

TEST_CASE("satwap optimal model closed form at (2,4)") {
  const int d = 4, m = 2;
  Behavior p = behavior_from_model(satwap_optimal_model(m, d));
  const double pi = std::numbers::pi;
  for (int x = 0; x < m; ++x)
    for (int y = 0; y < m; ++y) {
      double theta = (x + 0.5) / m, zeta = (y + 1.0) / m;
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
          Cplx s = 0;
          for (int q = 0; q < d; ++q)
            s += std::polar(1.0, 2 * pi * q * (a - b - theta + zeta) / d);
          double expect = std::norm(s) / (d * d * d);
          CHECK(p.at(a, b, x, y) == doctest::Approx(expect).epsilon(1e-10));
        }
    }
}

TEST_CASE("satwap optimal behavior depends only on a-b mod d") {
  Behavior p = behavior_from_model(satwap_optimal_model(3, 4));
  for (int x = 0; x < 3; ++x)
    for (int y = 0; y < 3; ++y)
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          CHECK(p.at(a, b, x, y) ==
                doctest::Approx(p.at((a + 1) % 4, (b + 1) % 4, x, y)).epsilon(1e-12));
}

TEST_CASE("satwap(2,2) definitional round trip") {
  auto f = satwap_functional(2, 2);
  double v = evaluate_functional(f, behavior_from_model(satwap_optimal_model(2, 2)));
  CHECK(v == doctest::Approx(*f.quantum_bound).epsilon(1e-9));
}

TEST_CASE("cglmp optimal model at d=2 reproduces the Tsirelson CH value") {
  auto f = cglmp_expression(2);
  double v = evaluate_functional(f, behavior_from_model(cglmp_optimal_model(2)));
  CHECK(v == doctest::Approx((std::sqrt(2.0) - 1) / 2).epsilon(1e-9));
}

TEST_CASE("cglmp(4) optimal state matches the known non-maximally-entangled profile") {
  auto model = cglmp_optimal_model(4);
  // amplitudes (c0, c1, c1, c0)-like with c0 > c1 > 0
  std::vector<double> c(4);
  for (int q = 0; q < 4; ++q) c[q] = std::abs(model.state.amplitudes[q * 4 + q]);
  CHECK(c[0] == doctest::Approx(c[3]).epsilon(1e-6));
  CHECK(c[1] == doctest::Approx(c[2]).epsilon(1e-6));
  CHECK(c[0] > c[1]);
  CHECK(c[0] == doctest::Approx(0.5696).epsilon(2e-3));
  CHECK(c[1] == doctest::Approx(0.4204).epsilon(2e-3));
}

TEST_CASE("detection efficiency transform") {
  std::mt19937_64 rng(13);
  Scenario sc(2, 2, 2, 2);
  Behavior p = testutil::random_ns_behavior(sc, rng);

  SUBCASE("eta = 1 is the identity") {
    Behavior q = apply_detection_efficiency(p, 1.0);
    for (int i = 0; i < sc.joint_cells(); ++i)
      CHECK(q.table()[i] == doctest::Approx(p.table()[i]).epsilon(1e-12));
  }
  SUBCASE("eta = 0 forces the no-click corner") {
    Behavior q = apply_detection_efficiency(p, 0.0);
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) CHECK(q.at(1, 1, x, y) == doctest::Approx(1.0));
  }
  SUBCASE("d=2 case table matches an independent expansion") {
    const double eta = 0.7;
    Behavior q = apply_detection_efficiency(p, eta);
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) {
        double p00 = p.at(0, 0, x, y), pa0 = p.marginal_a(0, x), pb0 = p.marginal_b(0, y);
        double p01 = p.at(0, 1, x, y), p10 = p.at(1, 0, x, y), p11 = p.at(1, 1, x, y);
        CHECK(q.at(0, 0, x, y) == doctest::Approx(eta * eta * p00).epsilon(1e-12));
        CHECK(q.at(0, 1, x, y) ==
              doctest::Approx(eta * eta * p01 + eta * (1 - eta) * pa0).epsilon(1e-12));
        CHECK(q.at(1, 0, x, y) ==
              doctest::Approx(eta * eta * p10 + eta * (1 - eta) * pb0).epsilon(1e-12));
        CHECK(q.at(1, 1, x, y) ==
              doctest::Approx(eta * eta * p11 + (1 - eta) * (1 - eta) +
                              eta * (1 - eta) * ((1 - pa0) + (1 - pb0)))
                  .epsilon(1e-12));
      }
  }
  SUBCASE("preserves normalization and no-signaling across the eta grid") {
    std::mt19937_64 rng2(17);
    for (int trial = 0; trial < 50; ++trial) {
      Scenario sc2(2, 2, 2 + trial % 3, 2 + trial % 3);
      Behavior b = behavior_from_model(testutil::random_model(sc2, sc2.n_a, sc2.n_b, rng2));
      for (double eta : {0.0, 0.25, 0.5, 0.618, 0.8, 1.0}) {
        Behavior q = apply_detection_efficiency(b, eta);
        CHECK(q.signaling_gap() <= 1e-10);
      }
    }
  }
  SUBCASE("affine in the behavior") {
    std::mt19937_64 rng3(19);
    Behavior p1 = testutil::random_ns_behavior(sc, rng3);
    Behavior p2 = testutil::random_ns_behavior(sc, rng3);
    const double w = 0.3, eta = 0.62;
    Behavior lhs = apply_detection_efficiency(Behavior::mix(p1, p2, w), eta);
    Behavior rhs = Behavior::mix(apply_detection_efficiency(p1, eta),
                                 apply_detection_efficiency(p2, eta), w);
    for (int i = 0; i < sc.joint_cells(); ++i)
      CHECK(lhs.table()[i] == doctest::Approx(rhs.table()[i]).epsilon(1e-12));
  }
  CHECK_THROWS(apply_detection_efficiency(p, 1.5));
}

TEST_CASE("poisson bootstrap") {
  auto f = normalized(facet_functional(FacetFamily::ChshCh));
  Behavior ideal = behavior_from_model(chsh_optimal_model());

  SUBCASE("deterministic for a fixed seed") {
    auto r1 = poisson_bootstrap(f, ideal, 10000, 50, 42);
    auto r2 = poisson_bootstrap(f, ideal, 10000, 50, 42);
    CHECK(r1.mean == r2.mean);
    CHECK(r1.stddev == r2.stddev);
    auto r3 = poisson_bootstrap(f, ideal, 10000, 50, 43);
    CHECK(r1.mean != r3.mean);
  }
  SUBCASE("tiny fluctuations at huge event counts") {
    Behavior det = deterministic_behavior({{0, 0}, {0, 0}}, f.scenario());
    auto r = poisson_bootstrap(f, det, 1000000000LL, 20, 1);
    CHECK(r.stddev < 1e-3);
  }
  SUBCASE("mean converges to the ideal value") {
    auto r = poisson_bootstrap(f, ideal, 1000000, 200, 7);
    CHECK(std::abs(r.mean - evaluate_functional(f, ideal)) < 3 * r.stddev + 1e-9);
  }
  CHECK_THROWS(poisson_bootstrap(f, ideal, 0, 10, 1));
  CHECK_THROWS(poisson_bootstrap(f, ideal, 100, 1, 1));
}
