#include "bellcert/scenario.hpp"

#include <algorithm>
#include <cmath>

#include "bellcert/sdp.hpp"

namespace bellcert {

Scenario::Scenario(int ma, int mb, int na, int nb) : m_a(ma), m_b(mb), n_a(na), n_b(nb) {
  if (ma < 1 || mb < 1 || na < 1 || nb < 1)
    throw std::invalid_argument("Scenario: all input/outcome counts must be >= 1");
}

Behavior::Behavior(Scenario sc, std::vector<double> table) : sc_(sc), table_(std::move(table)) {
  if (static_cast<int>(table_.size()) != sc_.joint_cells())
    throw std::invalid_argument("Behavior: table size does not match scenario");
  for (double v : table_) {
    if (!(v >= -kProbTol && v <= 1.0 + kProbTol))
      throw std::invalid_argument("Behavior: entry outside [0,1]");
  }
  for (int x = 0; x < sc_.m_a; ++x) {
    for (int y = 0; y < sc_.m_b; ++y) {
      double s = 0.0;
      for (int a = 0; a < sc_.n_a; ++a)
        for (int b = 0; b < sc_.n_b; ++b) s += at(a, b, x, y);
      if (std::abs(s - 1.0) > kProbTol)
        throw std::invalid_argument("Behavior: setting (" + std::to_string(x) + "," +
                                    std::to_string(y) + ") sums to " + std::to_string(s));
    }
  }
}

double Behavior::marginal_a(int a, int x, int y) const {
  double s = 0.0;
  for (int b = 0; b < sc_.n_b; ++b) s += at(a, b, x, y);
  return s;
}

double Behavior::marginal_b(int b, int y, int x) const {
  double s = 0.0;
  for (int a = 0; a < sc_.n_a; ++a) s += at(a, b, x, y);
  return s;
}

double Behavior::signaling_gap() const {
  double worst = 0.0;
  for (int x = 0; x < sc_.m_a; ++x)
    for (int a = 0; a < sc_.n_a; ++a) {
      double ref = marginal_a(a, x, 0);
      for (int y = 1; y < sc_.m_b; ++y) worst = std::max(worst, std::abs(marginal_a(a, x, y) - ref));
    }
  for (int y = 0; y < sc_.m_b; ++y)
    for (int b = 0; b < sc_.n_b; ++b) {
      double ref = marginal_b(b, y, 0);
      for (int x = 1; x < sc_.m_a; ++x) worst = std::max(worst, std::abs(marginal_b(b, y, x) - ref));
    }
  return worst;
}

bool Behavior::is_no_signaling(double tol) const { return signaling_gap() <= tol; }

Behavior Behavior::mix(const Behavior& lhs, const Behavior& rhs, double p) {
  if (!(lhs.scenario() == rhs.scenario()))
    throw std::invalid_argument("Behavior::mix: scenario mismatch");
  std::vector<double> t(lhs.table_.size());
  for (size_t i = 0; i < t.size(); ++i) t[i] = p * lhs.table_[i] + (1.0 - p) * rhs.table_[i];
  return Behavior(lhs.scenario(), std::move(t));
}

void BellFunctional::add_joint(int a, int b, int x, int y, double c) {
  if (a < 0 || a >= sc_.n_a || b < 0 || b >= sc_.n_b || x < 0 || x >= sc_.m_a || y < 0 ||
      y >= sc_.m_b)
    throw std::invalid_argument("BellFunctional: joint index out of range");
  if (c == 0.0) return;
  auto key = std::array<int, 4>{a, b, x, y};
  if ((joint_[key] += c) == 0.0) joint_.erase(key);
}

void BellFunctional::add_marginal_a(int a, int x, double c) {
  if (a < 0 || a >= sc_.n_a || x < 0 || x >= sc_.m_a)
    throw std::invalid_argument("BellFunctional: Alice marginal index out of range");
  if (c == 0.0) return;
  auto key = std::array<int, 2>{a, x};
  if ((marg_a_[key] += c) == 0.0) marg_a_.erase(key);
}

void BellFunctional::add_marginal_b(int b, int y, double c) {
  if (b < 0 || b >= sc_.n_b || y < 0 || y >= sc_.m_b)
    throw std::invalid_argument("BellFunctional: Bob marginal index out of range");
  if (c == 0.0) return;
  auto key = std::array<int, 2>{b, y};
  if ((marg_b_[key] += c) == 0.0) marg_b_.erase(key);
}

double evaluate_functional(const BellFunctional& f, const Behavior& p) {
  if (!(f.scenario() == p.scenario()))
    throw std::invalid_argument("evaluate_functional: scenario mismatch");
  double v = f.constant();
  for (const auto& [k, c] : f.joint()) v += c * p.at(k[0], k[1], k[2], k[3]);
  for (const auto& [k, c] : f.marginal_a()) v += c * p.marginal_a(k[0], k[1]);
  for (const auto& [k, c] : f.marginal_b()) v += c * p.marginal_b(k[0], k[1]);
  return v;
}

Behavior deterministic_behavior(const DeterministicStrategy& s, const Scenario& sc) {
  if (static_cast<int>(s.a_assign.size()) != sc.m_a ||
      static_cast<int>(s.b_assign.size()) != sc.m_b)
    throw std::invalid_argument("deterministic_behavior: assignment length mismatch");
  for (int a : s.a_assign)
    if (a < 0 || a >= sc.n_a) throw std::invalid_argument("deterministic_behavior: outcome out of range");
  for (int b : s.b_assign)
    if (b < 0 || b >= sc.n_b) throw std::invalid_argument("deterministic_behavior: outcome out of range");
  std::vector<double> t(sc.joint_cells(), 0.0);
  for (int x = 0; x < sc.m_a; ++x)
    for (int y = 0; y < sc.m_b; ++y)
      t[((x * sc.m_b + y) * sc.n_a + s.a_assign[x]) * sc.n_b + s.b_assign[y]] = 1.0;
  return Behavior(sc, std::move(t));
}

namespace {

// Dense view of a functional used by the enumeration paths.
struct DenseFunctional {
  int ma, mb, na, nb;
  std::vector<double> joint;   // [x][y][a][b]
  std::vector<double> amarg;   // [x][a]
  std::vector<double> bmarg;   // [y][b]
  double constant;

  explicit DenseFunctional(const BellFunctional& f)
      : ma(f.scenario().m_a),
        mb(f.scenario().m_b),
        na(f.scenario().n_a),
        nb(f.scenario().n_b),
        joint(static_cast<size_t>(ma) * mb * na * nb, 0.0),
        amarg(static_cast<size_t>(ma) * na, 0.0),
        bmarg(static_cast<size_t>(mb) * nb, 0.0),
        constant(f.constant()) {
    for (const auto& [k, c] : f.joint()) joint[jidx(k[0], k[1], k[2], k[3])] += c;
    for (const auto& [k, c] : f.marginal_a()) amarg[k[1] * na + k[0]] += c;
    for (const auto& [k, c] : f.marginal_b()) bmarg[k[1] * nb + k[0]] += c;
  }
  size_t jidx(int a, int b, int x, int y) const {
    return ((static_cast<size_t>(x) * mb + y) * na + a) * nb + b;
  }
};

bool next_assignment(std::vector<int>& v, int radix) {
  for (int i = static_cast<int>(v.size()) - 1; i >= 0; --i) {
    if (++v[i] < radix) return true;
    v[i] = 0;
  }
  return false;
}

}  // namespace

std::pair<double, DeterministicStrategy> classical_bound(const BellFunctional& f) {
  const Scenario& sc = f.scenario();
  double count = std::pow(static_cast<double>(sc.n_a), sc.m_a);
  if (count > 1e7) throw std::runtime_error("classical_bound: enumeration guard exceeded");

  DenseFunctional d(f);
  std::vector<int> a(sc.m_a, 0);
  double best = -std::numeric_limits<double>::infinity();
  DeterministicStrategy witness;
  std::vector<int> bbest(sc.m_b);
  do {
    double margsum = 0.0;
    for (int x = 0; x < sc.m_a; ++x) margsum += d.amarg[x * sc.n_a + a[x]];
    double total = d.constant + margsum;
    for (int y = 0; y < sc.m_b; ++y) {
      double sbest = -std::numeric_limits<double>::infinity();
      int barg = 0;
      for (int b = 0; b < sc.n_b; ++b) {
        double s = d.bmarg[y * sc.n_b + b];
        for (int x = 0; x < sc.m_a; ++x) s += d.joint[d.jidx(a[x], b, x, y)];
        if (s > sbest) {
          sbest = s;
          barg = b;
        }
      }
      total += sbest;
      bbest[y] = barg;
    }
    if (total > best) {
      best = total;
      witness = DeterministicStrategy{a, bbest};
    }
  } while (next_assignment(a, sc.n_a));
  return {best, witness};
}

std::vector<DeterministicStrategy> all_deterministic_strategies(const Scenario& sc) {
  std::vector<DeterministicStrategy> out;
  std::vector<int> a(sc.m_a, 0);
  do {
    std::vector<int> b(sc.m_b, 0);
    do {
      out.push_back(DeterministicStrategy{a, b});
    } while (next_assignment(b, sc.n_b));
  } while (next_assignment(a, sc.n_a));
  return out;
}

LocalMembership local_membership(const Behavior& p) {
  const Scenario& sc = p.scenario();
  double vertices = std::pow(static_cast<double>(sc.n_a), sc.m_a) *
                    std::pow(static_cast<double>(sc.n_b), sc.m_b);
  if (vertices > 1e5) throw std::runtime_error("local_membership: vertex guard exceeded");

  auto strategies = all_deterministic_strategies(sc);
  const int nv = static_cast<int>(strategies.size());

  // LP: minimize t  s.t.  |sum_l w_l D_l(ab|xy) - p(ab|xy)| <= t,  sum_l w_l = 1,
  // w >= 0, t >= 0. The behavior is local iff the optimum is <= kLpTol.
  SDPProblem lp;
  lp.sense = Sense::Minimize;
  std::vector<int> wblock(nv);
  for (int l = 0; l < nv; ++l) wblock[l] = lp.add_block(1);
  int tblock = lp.add_block(1);
  lp.add_objective(tblock, 0, 0, 1.0);

  LinearConstraint norm;
  norm.rel = Relation::Eq;
  norm.rhs = 1.0;
  for (int l = 0; l < nv; ++l) norm.coeffs.push_back({wblock[l], 0, 0, 1.0});
  lp.constraints.push_back(norm);

  for (int x = 0; x < sc.m_a; ++x)
    for (int y = 0; y < sc.m_b; ++y)
      for (int a = 0; a < sc.n_a; ++a)
        for (int b = 0; b < sc.n_b; ++b) {
          LinearConstraint up, down;
          for (int l = 0; l < nv; ++l) {
            if (strategies[l].a_assign[x] == a && strategies[l].b_assign[y] == b) {
              up.coeffs.push_back({wblock[l], 0, 0, 1.0});
              down.coeffs.push_back({wblock[l], 0, 0, 1.0});
            }
          }
          up.coeffs.push_back({tblock, 0, 0, -1.0});
          up.rel = Relation::Le;
          up.rhs = p.at(a, b, x, y);
          down.coeffs.push_back({tblock, 0, 0, 1.0});
          down.rel = Relation::Ge;
          down.rhs = p.at(a, b, x, y);
          lp.constraints.push_back(std::move(up));
          lp.constraints.push_back(std::move(down));
        }

  SolveOptions opt;
  opt.tol_gap = 1e-10;
  opt.tol_feas = 1e-10;
  auto sol = solve_sdp(lp, opt);
  if (sol.status == SolveStatus::Failed)
    throw std::runtime_error("local_membership: LP solve failed");

  LocalMembership result;
  result.distance = std::max(0.0, sol.objective_value);
  result.local = sol.status != SolveStatus::Infeasible && result.distance <= kLpTol;
  if (result.local) {
    for (int l = 0; l < nv; ++l) {
      double w = sol.block_values[wblock[l]](0, 0);
      if (w > 1e-10) result.weights[strategies[l]] = w;
    }
  }
  return result;
}

BellFunctional normalize_functional(const BellFunctional& f, double c, double q) {
  if (!(q > c)) throw std::invalid_argument("normalize_functional: requires q > c");
  const double scale = 1.0 / (q - c);
  BellFunctional out(f.scenario());
  for (const auto& [k, v] : f.joint()) out.add_joint(k[0], k[1], k[2], k[3], v * scale);
  for (const auto& [k, v] : f.marginal_a()) out.add_marginal_a(k[0], k[1], v * scale);
  for (const auto& [k, v] : f.marginal_b()) out.add_marginal_b(k[0], k[1], v * scale);
  out.add_constant((f.constant() - c) * scale);
  out.classical_bound = 0.0;
  out.quantum_bound = 1.0;
  out.normalized = true;
  out.name = f.name.empty() ? f.name : f.name + ":normalized";
  return out;
}

}  // namespace bellcert
