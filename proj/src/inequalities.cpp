#include "bellcert/inequalities.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "bellcert/quantum.hpp"

namespace bellcert {

namespace {

constexpr double kPi = std::numbers::pi;

double cot(double x) { return std::cos(x) / std::sin(x); }

int imod(int v, int n) {
  int r = v % n;
  return r < 0 ? r + n : r;
}

// P(a = r + sa, b = r + sb) summed over r, i.e. the correlator P(A = B + (sa-sb))
// placed at inputs (x, y) with coefficient c.
void add_correlator(BellFunctional& f, int x, int y, int sa, int sb, double c) {
  const int n = f.scenario().n_a;
  for (int r = 0; r < n; ++r) f.add_joint(imod(r + sa, n), imod(r + sb, n), x, y, c);
}

}  // namespace

SATWAPParams SATWAPParams::compute(int m, int n) {
  if (m < 2 || n < 2) throw std::invalid_argument("SATWAPParams: need m >= 2, n >= 2");
  SATWAPParams p;
  p.m = m;
  p.n = n;
  auto g = [&](double x) { return cot(kPi * (x + 0.5 / m) / n); };
  const double scale = 0.5 / n * std::tan(kPi / (2.0 * m));
  const int half = n / 2;
  for (int k = 0; k < half; ++k) {
    p.alphas.push_back(scale * (g(k) - g(half)));
    p.betas.push_back(scale * (g(k + 1.0 - 1.0 / m) + g(half)));
  }
  return p;
}

BellFunctional chain_functional(int m, int n, const std::vector<double>& alphas,
                                const std::vector<double>& betas) {
  if (alphas.size() != betas.size() || static_cast<int>(alphas.size()) != n / 2)
    throw std::invalid_argument("chain_functional: need floor(n/2) weight pairs");
  BellFunctional f(Scenario::symmetric(m, n));
  for (int k = 0; k < n / 2; ++k) {
    for (int i = 0; i < m; ++i) {
      // P(A_i = B_i + k) and its Q partner P(A_i = B_i - k - 1)
      add_correlator(f, i, i, k, 0, alphas[k]);
      add_correlator(f, i, i, -k - 1, 0, -betas[k]);
      // P(B_i = A_{i+1} + k); the chain wraps with A_{m+1} = A_1 + 1
      if (i + 1 < m) {
        add_correlator(f, i + 1, i, 0, k, alphas[k]);
        add_correlator(f, i + 1, i, 0, -k - 1, -betas[k]);
      } else {
        add_correlator(f, 0, m - 1, 0, k + 1, alphas[k]);
        add_correlator(f, 0, m - 1, 0, -k, -betas[k]);
      }
    }
  }
  return f;
}

BellFunctional satwap_functional(int m, int n) {
  SATWAPParams p = SATWAPParams::compute(m, n);
  BellFunctional f = chain_functional(m, n, p.alphas, p.betas);
  std::ostringstream name;
  name << "satwap:" << m << ":" << n;
  f.name = name.str();
  f.classical_bound = classical_bound(f).first;
  f.quantum_bound = evaluate_functional(f, behavior_from_model(satwap_optimal_model(m, n)));
  return f;
}

BellFunctional cglmp_expression(int d) {
  if (d < 2) throw std::invalid_argument("cglmp_expression: need d >= 2");
  std::vector<double> w;
  for (int k = 0; k < d / 2; ++k) w.push_back(1.0 - 2.0 * k / (d - 1.0));
  return chain_functional(2, d, w, w);
}

namespace {

// CH block P(A_i=B_p=0)+P(A_j=B_p=0)+P(A_i=B_q=0)-P(A_j=B_q=0)-P(A_i=0)-P(B_p=0)
// with 0-based inputs ("outcome 1" of the tables is outcome 0 here).
void add_ch_block(BellFunctional& f, int i, int j, int p, int q, double c) {
  f.add_joint(0, 0, i, p, c);
  f.add_joint(0, 0, j, p, c);
  f.add_joint(0, 0, i, q, c);
  f.add_joint(0, 0, j, q, -c);
  f.add_marginal_a(0, i, -c);
  f.add_marginal_b(0, p, -c);
}

double verified_zero_classical_bound(const BellFunctional& f) {
  double c = classical_bound(f).first;
  if (std::abs(c) > 1e-12)
    throw std::logic_error("facet functional: enumerated classical bound is not 0");
  return 0.0;
}

}  // namespace

// Calibrated against the level-(1+AB+AAB) relaxation upper bound and the value
// attained by the shipped optimal model (the test suite re-derives the bracket).
const double kI4422RawQuantumBound = 0.25062;

BellFunctional facet_functional(FacetFamily family, int d) {
  switch (family) {
    case FacetFamily::ChshCh: {
      BellFunctional f(Scenario::symmetric(2, 2));
      f.add_joint(0, 0, 0, 0, 1.0);
      f.add_joint(0, 0, 1, 0, 1.0);
      f.add_joint(0, 0, 0, 1, 1.0);
      f.add_joint(0, 0, 1, 1, -1.0);
      f.add_marginal_a(0, 0, -1.0);
      f.add_marginal_b(0, 0, -1.0);
      f.name = "chsh-ch";
      f.classical_bound = verified_zero_classical_bound(f);
      f.quantum_bound = evaluate_functional(f, behavior_from_model(chsh_optimal_model()));
      return f;
    }
    case FacetFamily::Cglmp: {
      BellFunctional f = cglmp_expression(d);
      f.name = "cglmp:" + std::to_string(d);
      f.classical_bound = verified_zero_classical_bound(f);
      f.quantum_bound = evaluate_functional(f, behavior_from_model(cglmp_optimal_model(d)));
      return f;
    }
    case FacetFamily::I4422: {
      BellFunctional f(Scenario::symmetric(4, 2));
      add_ch_block(f, 0, 1, 0, 1, 1.0);
      add_ch_block(f, 2, 3, 2, 3, 1.0);
      add_ch_block(f, 1, 0, 3, 2, -1.0);
      add_ch_block(f, 3, 2, 1, 0, -1.0);
      f.add_marginal_a(0, 1, -1.0);
      f.add_marginal_a(0, 3, -1.0);
      f.add_marginal_b(0, 1, -1.0);
      f.add_marginal_b(0, 3, -1.0);
      f.name = "i4422";
      f.classical_bound = verified_zero_classical_bound(f);
      f.quantum_bound = kI4422RawQuantumBound;
      return f;
    }
  }
  throw std::invalid_argument("facet_functional: unknown family");
}

BellFunctional normalized(const BellFunctional& f) {
  if (!f.classical_bound || !f.quantum_bound)
    throw std::invalid_argument("normalized: functional has no cached bounds");
  return normalize_functional(f, *f.classical_bound, *f.quantum_bound);
}

BellFunctional parse_inequality(const std::string& name) {
  auto split = [](const std::string& s) {
    std::vector<std::string> parts;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ':')) parts.push_back(tok);
    return parts;
  };
  auto parts = split(name);
  auto as_int = [&](const std::string& s) {
    size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("parse_inequality: bad integer in " + s);
    return v;
  };
  if (parts.empty()) throw std::invalid_argument("parse_inequality: empty name");
  if (parts[0] == "chsh-ch" && parts.size() == 1) return facet_functional(FacetFamily::ChshCh);
  if (parts[0] == "i4422" && parts.size() == 1) return facet_functional(FacetFamily::I4422);
  if (parts[0] == "cglmp" && parts.size() == 2)
    return facet_functional(FacetFamily::Cglmp, as_int(parts[1]));
  if (parts[0] == "satwap" && parts.size() == 3)
    return satwap_functional(as_int(parts[1]), as_int(parts[2]));
  throw std::invalid_argument("parse_inequality: unknown inequality '" + name + "'");
}

}  // namespace bellcert
