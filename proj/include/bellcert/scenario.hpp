#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bellcert {

constexpr double kProbTol = 1e-9;   // behavior normalization / range tolerance
constexpr double kLpTol = 1e-8;     // local-polytope feasibility tolerance

/// Two-party measurement scenario: input and outcome counts per side.
struct Scenario {
  int m_a = 0;  // Alice inputs
  int m_b = 0;  // Bob inputs
  int n_a = 0;  // Alice outcomes per input
  int n_b = 0;  // Bob outcomes per input

  Scenario() = default;
  Scenario(int ma, int mb, int na, int nb);
  static Scenario symmetric(int m, int n) { return Scenario(m, m, n, n); }

  bool operator==(const Scenario&) const = default;
  int joint_cells() const { return m_a * m_b * n_a * n_b; }
};

/// Joint conditional probability table P(ab|xy), stored dense.
class Behavior {
 public:
  Behavior(Scenario sc, std::vector<double> table);

  const Scenario& scenario() const { return sc_; }
  double at(int a, int b, int x, int y) const { return table_[index(a, b, x, y)]; }
  const std::vector<double>& table() const { return table_; }

  /// P(a|x), summing over Bob's outcomes at partner input `y` (first input by default;
  /// the shipped behaviors are no-signaling, so any partner input gives the same value).
  double marginal_a(int a, int x, int y = 0) const;
  double marginal_b(int b, int y, int x = 0) const;

  bool is_no_signaling(double tol = kProbTol) const;
  /// Largest deviation from the no-signaling marginal conditions.
  double signaling_gap() const;

  int index(int a, int b, int x, int y) const {
    return ((x * sc_.m_b + y) * sc_.n_a + a) * sc_.n_b + b;
  }

  /// Convex mixture p*lhs + (1-p)*rhs.
  static Behavior mix(const Behavior& lhs, const Behavior& rhs, double p);

 private:
  Scenario sc_;
  std::vector<double> table_;
};

/// Local deterministic strategy: a fixed outcome for every input on each side.
struct DeterministicStrategy {
  std::vector<int> a_assign;  // length m_a, entries in [0, n_a)
  std::vector<int> b_assign;  // length m_b, entries in [0, n_b)

  bool operator==(const DeterministicStrategy&) const = default;
  bool operator<(const DeterministicStrategy& o) const {
    return std::tie(a_assign, b_assign) < std::tie(o.a_assign, o.b_assign);
  }
};

/// Affine functional over behaviors:
///   I(P) = constant + sum joint[(a,b,x,y)]*P(ab|xy)
///        + sum marg_a[(a,x)]*P(a|x) + sum marg_b[(b,y)]*P(b|y).
class BellFunctional {
 public:
  explicit BellFunctional(Scenario sc) : sc_(sc) {}

  const Scenario& scenario() const { return sc_; }

  void add_joint(int a, int b, int x, int y, double c);
  void add_marginal_a(int a, int x, double c);
  void add_marginal_b(int b, int y, double c);
  void add_constant(double c) { constant_ += c; }

  const std::map<std::array<int, 4>, double>& joint() const { return joint_; }
  const std::map<std::array<int, 2>, double>& marginal_a() const { return marg_a_; }
  const std::map<std::array<int, 2>, double>& marginal_b() const { return marg_b_; }
  double constant() const { return constant_; }

  std::optional<double> classical_bound;
  std::optional<double> quantum_bound;
  bool normalized = false;
  std::string name;

 private:
  Scenario sc_;
  std::map<std::array<int, 4>, double> joint_;
  std::map<std::array<int, 2>, double> marg_a_;
  std::map<std::array<int, 2>, double> marg_b_;
  double constant_ = 0.0;
};

double evaluate_functional(const BellFunctional& f, const Behavior& p);

Behavior deterministic_behavior(const DeterministicStrategy& s, const Scenario& sc);

/// Maximum over all local deterministic strategies, with a lexicographically
/// smallest witness. Enumerates Alice assignments and optimizes Bob per input.
std::pair<double, DeterministicStrategy> classical_bound(const BellFunctional& f);

struct LocalMembership {
  bool local = false;
  double distance = 0.0;  // L-infinity distance to the local polytope found by the LP
  std::map<DeterministicStrategy, double> weights;  // present when local
};

/// Decides membership in the local polytope by linear programming.
LocalMembership local_membership(const Behavior& p);

/// Rescales f so the classical bound c maps to 0 and the quantum bound q to 1.
BellFunctional normalize_functional(const BellFunctional& f, double c, double q);

/// Enumerates all deterministic strategies of a scenario in lexicographic order.
std::vector<DeterministicStrategy> all_deterministic_strategies(const Scenario& sc);

}  // namespace bellcert
