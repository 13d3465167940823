#include "bellcert/inequalities.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "bellcert/quantum.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace bellcert;

TEST_CASE("SATWAP weight closed form") {
  SUBCASE("(2,2) has a single pair with the cotangent value") {
    auto p = SATWAPParams::compute(2, 2);
    REQUIRE(p.alphas.size() == 1);
    double pi = std::numbers::pi;
    double expect = 0.25 * std::tan(pi / 4) *
                    (std::cos(pi / 8) / std::sin(pi / 8) - std::cos(5 * pi / 8) / std::sin(5 * pi / 8));
    CHECK(p.alphas[0] == doctest::Approx(expect).epsilon(1e-14));
  }
  SUBCASE("(2,4) has two pairs") {
    auto p = SATWAPParams::compute(2, 4);
    CHECK(p.alphas.size() == 2);
    CHECK(p.betas.size() == 2);
  }
  CHECK_THROWS(SATWAPParams::compute(1, 4));
}

TEST_CASE("CGLMP weights are 1 - 2k/(d-1)") {
  auto f4 = cglmp_expression(4);
  // weights {1, 1/3}: read them back from two representative coefficients
  // P(A_1 = B_1 + 0) contributes weight at (a,b)=(0,0),(x,y)=(0,0)
  CHECK(f4.joint().at({0, 0, 0, 0}) == doctest::Approx(1.0));
  // k=1 term P(A_1 = B_1 + 1) puts 1/3 at (a,b)=(1,0)
  CHECK(f4.joint().at({1, 0, 0, 0}) == doctest::Approx(1.0 / 3));
}

TEST_CASE("CGLMP(4) equals the chain builder with its weights, coefficient for coefficient") {
  auto direct = facet_functional(FacetFamily::Cglmp, 4);
  auto rebuilt = chain_functional(2, 4, {1.0, 1.0 / 3}, {1.0, 1.0 / 3});
  REQUIRE(direct.joint().size() == rebuilt.joint().size());
  for (const auto& [k, v] : direct.joint())
    CHECK(rebuilt.joint().at(k) == doctest::Approx(v).epsilon(1e-14));
  CHECK(direct.marginal_a().empty());
  CHECK(direct.marginal_b().empty());
}

TEST_CASE("I4422 marginal structure") {
  auto f = facet_functional(FacetFamily::I4422);
  // after cancellation: Alice inputs 0 and 2, Bob inputs 0 and 2, each -1
  REQUIRE(f.marginal_a().size() == 2);
  REQUIRE(f.marginal_b().size() == 2);
  CHECK(f.marginal_a().at({0, 0}) == doctest::Approx(-1.0));
  CHECK(f.marginal_a().at({0, 2}) == doctest::Approx(-1.0));
  CHECK(f.marginal_b().at({0, 0}) == doctest::Approx(-1.0));
  CHECK(f.marginal_b().at({0, 2}) == doctest::Approx(-1.0));
}

TEST_CASE("stored classical bounds match fresh enumeration exactly") {
  for (const char* name : {"chsh-ch", "cglmp:4", "i4422", "satwap:2:2", "satwap:3:2",
                           "satwap:2:4", "satwap:3:4"}) {
    auto f = parse_inequality(name);
    REQUIRE(f.classical_bound.has_value());
    CHECK(classical_bound(f).first == doctest::Approx(*f.classical_bound).epsilon(1e-15));
  }
}

TEST_CASE("stored quantum bounds are attained by shipped models") {
  SUBCASE("chsh-ch equals the Tsirelson CH value") {
    auto f = facet_functional(FacetFamily::ChshCh);
    CHECK(*f.quantum_bound == doctest::Approx((std::sqrt(2.0) - 1) / 2).epsilon(1e-9));
  }
  SUBCASE("satwap optimal models evaluate to the cached bound") {
    for (auto [m, n] : {std::pair{2, 2}, {3, 2}, {2, 4}, {3, 4}}) {
      auto f = satwap_functional(m, n);
      double v = evaluate_functional(f, behavior_from_model(satwap_optimal_model(m, n)));
      CHECK(v == doctest::Approx(*f.quantum_bound).epsilon(1e-12));
      CHECK(*f.quantum_bound > *f.classical_bound);
    }
  }
  SUBCASE("normalized satwap scores 1 on its optimal model") {
    for (auto [m, n] : {std::pair{2, 2}, {3, 4}}) {
      auto f = normalized(satwap_functional(m, n));
      double v = evaluate_functional(f, behavior_from_model(satwap_optimal_model(m, n)));
      CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("normalized SATWAP(2,2) and CHSH-CH agree on random no-signaling behaviors") {
  auto s = normalized(satwap_functional(2, 2));
  auto c = normalized(facet_functional(FacetFamily::ChshCh));
  std::mt19937_64 rng(41);
  for (int i = 0; i < 100; ++i) {
    Behavior p = testutil::random_ns_behavior(Scenario::symmetric(2, 2), rng);
    CHECK(evaluate_functional(s, p) == doctest::Approx(evaluate_functional(c, p)).epsilon(1e-9));
  }
}

TEST_CASE("parse_inequality") {
  CHECK(parse_inequality("satwap:3:4").scenario().m_a == 3);
  CHECK(parse_inequality("cglmp:4").scenario().n_b == 4);
  CHECK_THROWS(parse_inequality("satwap:1:4"));  // m >= 2
  CHECK_THROWS(parse_inequality("nonsense"));
  CHECK_THROWS(parse_inequality("satwap:3"));
}
