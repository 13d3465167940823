#include "bellcert/sdp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>

#ifdef _OPENMP
#include <omp.h>
#endif

extern "C" void openblas_set_num_threads(int);

namespace bellcert {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::Inaccurate: return "inaccurate";
    case SolveStatus::Failed: return "failed";
  }
  return "unknown";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kCoefEps = 1e-13;

struct SlotRef {
  int var = -1;      // -1: fixed
  double alpha = 1.0;
  double beta = 0.0;  // slot = alpha * y[var] + beta  (or beta when fixed)
};

// Weighted union-find over scalar slots: every slot is an affine function of
// its set representative. Fixing a representative freezes the whole class.
class AffineUnionFind {
 public:
  explicit AffineUnionFind(int n) : parent_(n), a_(n, 1.0), b_(n, 0.0), fixed_(n, false), value_(n, 0.0) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  // returns (root, alpha, beta): slot = alpha*root + beta
  std::tuple<int, double, double> find(int s) {
    if (parent_[s] == s) return {s, 1.0, 0.0};
    auto [r, pa, pb] = find(parent_[s]);
    // slot = a_s*parent + b_s and parent = pa*r + pb
    double a_old = a_[s];
    a_[s] = a_old * pa;
    b_[s] = a_old * pb + b_[s];
    parent_[s] = r;
    return {r, a_[s], b_[s]};
  }

  bool is_fixed(int root) const { return fixed_[root]; }
  double fixed_value(int root) const { return value_[root]; }

  // Impose a*s1 + b*s2 = rhs with both coefficients nonzero. Returns false on contradiction.
  bool relate(int s1, int s2, double a, double b, double rhs, double tol) {
    auto [r1, a1, b1] = find(s1);
    auto [r2, a2, b2] = find(s2);
    // a*(a1 r1 + b1) + b*(a2 r2 + b2) = rhs
    double c1 = a * a1, c2 = b * a2, r = rhs - a * b1 - b * b2;
    if (r1 == r2) {
      double coef = c1 + c2;
      if (fixed_[r1]) return std::abs(coef * value_[r1] - r) <= tol;
      if (std::abs(coef) <= kCoefEps) return std::abs(r) <= tol;
      return fix_root(r1, r / coef, tol);
    }
    if (fixed_[r1] && fixed_[r2]) return std::abs(c1 * value_[r1] + c2 * value_[r2] - r) <= tol;
    if (fixed_[r1]) return fix_root(r2, (r - c1 * value_[r1]) / c2, tol);
    if (fixed_[r2]) return fix_root(r1, (r - c2 * value_[r2]) / c1, tol);
    // r1 = (-c2 r2 + r)/c1
    parent_[r1] = r2;
    a_[r1] = -c2 / c1;
    b_[r1] = r / c1;
    return true;
  }

  // Impose a*s = rhs.
  bool fix(int s, double a, double rhs, double tol) {
    auto [root, as, bs] = find(s);
    double coef = a * as, r = rhs - a * bs;
    if (std::abs(coef) <= kCoefEps) return std::abs(r) <= tol;
    return fix_root(root, r / coef, tol);
  }

 private:
  bool fix_root(int root, double v, double tol) {
    if (fixed_[root]) return std::abs(value_[root] - v) <= tol * (1.0 + std::abs(v));
    fixed_[root] = true;
    value_[root] = v;
    return true;
  }

  std::vector<int> parent_;
  std::vector<double> a_, b_;
  std::vector<bool> fixed_;
  std::vector<double> value_;
};

struct VarEntry {
  int row, col;      // upper triangle (row <= col)
  double alpha;
};

struct BlockData {
  int dim = 0;
  int orig_block = -1;
  std::vector<int> vars;                        // global variable ids, sorted
  std::vector<std::vector<VarEntry>> entries;   // parallel to vars
  MatrixXd G;
};

struct RowData {
  std::vector<int> vars;
  std::vector<double> coefs;
  double rhs = 0.0;
};

struct InternalProblem {
  int nvar = 0;
  std::vector<BlockData> blocks;          // active LMI blocks only
  std::vector<RowData> rows;              // equality rows E y = d (row-scaled)
  VectorXd c;                             // internal objective (minimize)
  double obj_const = 0.0;                 // constant folded out of the objective
  double ext_sign = 1.0;                  // external value = ext_sign * (c.y) ... see below
  // slot reconstruction for reporting
  struct SlotRecon { int block, row, col; SlotRef ref; };
  std::vector<SlotRecon> recon;
  // variable -> list of (block index in blocks) touched
  std::vector<std::vector<int>> var_blocks;
  // connected components of variables
  std::vector<std::vector<int>> components;   // variable ids per component
  std::vector<int> var_component;
  std::vector<std::vector<int>> comp_blocks;  // block indices per component
};

int tri_index(int dim, int r, int c) {  // r <= c, column-packed upper triangle
  return c * (c + 1) / 2 + r;
}

struct PresolveResult {
  bool infeasible = false;
  bool trivially_done = false;
  InternalProblem ip;
};

// Union-find over variables used to group blocks into independent components.
struct PlainUF {
  std::vector<int> p;
  explicit PlainUF(int n) : p(n) { std::iota(p.begin(), p.end(), 0); }
  int find(int x) { return p[x] == x ? x : p[x] = find(p[x]); }
  void unite(int a, int b) { p[find(a)] = find(b); }
};

PresolveResult presolve(const SDPProblem& p, double feas_tol) {
  PresolveResult out;
  const int nb = static_cast<int>(p.block_dims.size());
  std::vector<int> slot_base(nb + 1, 0);
  for (int b = 0; b < nb; ++b) {
    if (p.block_dims[b] < 1) throw std::invalid_argument("solve_sdp: block dimension must be >= 1");
    slot_base[b + 1] = slot_base[b] + p.block_dims[b] * (p.block_dims[b] + 1) / 2;
  }
  const int nslots = slot_base[nb];

  auto slot_of = [&](const MatEntry& e) {
    if (e.block < 0 || e.block >= nb) throw std::invalid_argument("solve_sdp: bad block index");
    int d = p.block_dims[e.block];
    if (e.row < 0 || e.row >= d || e.col < 0 || e.col >= d)
      throw std::invalid_argument("solve_sdp: entry index out of range");
    int r = std::min(e.row, e.col), c = std::max(e.row, e.col);
    return slot_base[e.block] + tri_index(d, r, c);
  };

  // Canonicalized sparse rows over slots.
  struct Raw { std::vector<std::pair<int,double>> terms; Relation rel; double rhs; };
  std::vector<Raw> raws;
  raws.reserve(p.constraints.size());
  for (const auto& con : p.constraints) {
    std::map<int, double> acc;
    for (const auto& e : con.coeffs) acc[slot_of(e)] += e.value;
    Raw r;
    for (auto& [s, v] : acc)
      if (std::abs(v) > kCoefEps) r.terms.push_back({s, v});
    r.rel = con.rel;
    r.rhs = con.rhs;
    raws.push_back(std::move(r));
  }

  AffineUnionFind uf(nslots);
  std::vector<char> consumed(raws.size(), 0);
  bool progress = true;
  while (progress) {
    progress = false;
    for (size_t i = 0; i < raws.size(); ++i) {
      if (consumed[i] || raws[i].rel != Relation::Eq) continue;
      // re-express in terms of roots
      std::map<int, double> acc;
      double rhs = raws[i].rhs;
      for (auto [s, v] : raws[i].terms) {
        auto [root, a, b] = uf.find(s);
        rhs -= v * b;
        if (uf.is_fixed(root)) rhs -= v * a * uf.fixed_value(root);
        else acc[root] += v * a;
      }
      std::vector<std::pair<int,double>> t;
      for (auto& [s, v] : acc)
        if (std::abs(v) > kCoefEps) t.push_back({s, v});
      if (t.size() == 0) {
        if (std::abs(rhs) > feas_tol * 100) { out.infeasible = true; return out; }
        consumed[i] = 1;
        progress = true;
      } else if (t.size() == 1) {
        if (!uf.fix(t[0].first, t[0].second, rhs, feas_tol)) { out.infeasible = true; return out; }
        consumed[i] = 1;
        progress = true;
      } else if (t.size() == 2) {
        if (!uf.relate(t[0].first, t[1].first, t[0].second, t[1].second, rhs, feas_tol)) {
          out.infeasible = true;
          return out;
        }
        consumed[i] = 1;
        progress = true;
      }
    }
  }

  // Assign variable ids to unfixed roots that actually appear in some block.
  std::vector<int> var_of_root(nslots, -2);
  InternalProblem& ip = out.ip;
  auto var_id = [&](int root) {
    if (var_of_root[root] == -2) var_of_root[root] = ip.nvar++;
    return var_of_root[root];
  };

  // Slot -> SlotRef map and block construction.
  std::vector<SlotRef> refs(nslots);
  for (int b = 0; b < nb; ++b) {
    int d = p.block_dims[b];
    for (int c = 0; c < d; ++c)
      for (int r = 0; r <= c; ++r) {
        int s = slot_base[b] + tri_index(d, r, c);
        auto [root, a, bb] = uf.find(s);
        if (uf.is_fixed(root)) refs[s] = SlotRef{-1, 0.0, bb + a * uf.fixed_value(root)};
        else refs[s] = SlotRef{var_id(root), a, bb};
        ip.recon.push_back({b, r, c, refs[s]});
      }
  }

  // Build per-block variable entry lists.
  std::vector<std::map<int, std::vector<VarEntry>>> bvars(nb);
  std::vector<MatrixXd> G(nb);
  for (int b = 0; b < nb; ++b) {
    int d = p.block_dims[b];
    G[b] = MatrixXd::Zero(d, d);
    for (int c = 0; c < d; ++c)
      for (int r = 0; r <= c; ++r) {
        const SlotRef& ref = refs[slot_base[b] + tri_index(d, r, c)];
        if (ref.var < 0) {
          G[b](r, c) = ref.beta;
          G[b](c, r) = ref.beta;
        } else {
          bvars[b][ref.var].push_back({r, c, ref.alpha});
          G[b](r, c) = ref.beta;
          G[b](c, r) = ref.beta;
        }
      }
  }

  // Objective over variables.
  VectorXd cobj = VectorXd::Zero(ip.nvar);
  double objk = p.objective_constant;
  {
    std::map<int, double> acc;
    for (const auto& e : p.objective) acc[slot_of(e)] += e.value;
    for (auto& [s, v] : acc) {
      const SlotRef& ref = refs[s];
      if (ref.var < 0) objk += v * ref.beta;
      else {
        cobj[ref.var] += v * ref.alpha;
        objk += v * ref.beta;
      }
    }
  }

  // Remaining rows: unconsumed equalities and all inequalities, over variables.
  struct PendingRow { std::map<int,double> terms; double rhs; Relation rel; };
  std::vector<PendingRow> pend;
  for (size_t i = 0; i < raws.size(); ++i) {
    if (consumed[i]) continue;
    PendingRow row;
    row.rel = raws[i].rel;
    row.rhs = raws[i].rhs;
    for (auto [s, v] : raws[i].terms) {
      const SlotRef& ref = refs[s];
      if (ref.var < 0) row.rhs -= v * ref.beta;
      else {
        row.terms[ref.var] += v * ref.alpha;
        row.rhs -= v * ref.beta;
      }
    }
    for (auto it = row.terms.begin(); it != row.terms.end();)
      it = std::abs(it->second) <= kCoefEps ? row.terms.erase(it) : std::next(it);
    if (row.terms.empty()) {
      bool sat = (row.rel == Relation::Eq)    ? std::abs(row.rhs) <= feas_tol * 100
                 : (row.rel == Relation::Le) ? row.rhs >= -feas_tol * 100
                                             : row.rhs <= feas_tol * 100;
      if (!sat) { out.infeasible = true; return out; }
      continue;
    }
    pend.push_back(std::move(row));
  }

  // Slack blocks for inequalities.
  std::vector<std::pair<int,int>> slack_blocks;  // (slack var id, internal block idx added later)
  std::vector<RowData> rows;
  std::vector<int> slack_vars;
  for (auto& row : pend) {
    RowData rd;
    for (auto& [v, cv] : row.terms) {
      rd.vars.push_back(v);
      rd.coefs.push_back(cv);
    }
    rd.rhs = row.rhs;
    if (row.rel != Relation::Eq) {
      int sv = ip.nvar++;
      slack_vars.push_back(sv);
      rd.vars.push_back(sv);
      rd.coefs.push_back(row.rel == Relation::Le ? 1.0 : -1.0);
    }
    // scale to unit infinity norm
    double mx = 0.0;
    for (double cv : rd.coefs) mx = std::max(mx, std::abs(cv));
    if (mx > 0) {
      for (double& cv : rd.coefs) cv /= mx;
      rd.rhs /= mx;
    }
    rows.push_back(std::move(rd));
  }

  // Materialize active blocks: original blocks with variables + slack 1x1 blocks.
  for (int b = 0; b < nb; ++b) {
    if (bvars[b].empty()) {
      // fully fixed block: verify PSD
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(G[b]);
      if (es.eigenvalues().minCoeff() < -1e-7) { out.infeasible = true; return out; }
      continue;
    }
    BlockData bd;
    bd.dim = p.block_dims[b];
    bd.orig_block = b;
    bd.G = G[b];
    for (auto& [v, es] : bvars[b]) {
      bd.vars.push_back(v);
      bd.entries.push_back(es);
    }
    ip.blocks.push_back(std::move(bd));
  }
  for (int sv : slack_vars) {
    BlockData bd;
    bd.dim = 1;
    bd.orig_block = -1;
    bd.G = MatrixXd::Zero(1, 1);
    bd.vars = {sv};
    bd.entries = {{VarEntry{0, 0, 1.0}}};
    ip.blocks.push_back(std::move(bd));
  }

  // A variable referenced only by rows/objective but no block is unconstrained in
  // the cone; give it a free 1x1... it cannot happen: vars originate from slots.

  ip.c = VectorXd::Zero(ip.nvar);
  ip.c.head(cobj.size()) = cobj;
  ip.obj_const = objk;
  ip.rows = std::move(rows);

  // Components.
  PlainUF cuf(ip.nvar);
  for (const auto& b : ip.blocks)
    for (size_t i = 1; i < b.vars.size(); ++i) cuf.unite(b.vars[0], b.vars[i]);
  std::map<int, int> comp_of_root;
  ip.var_component.assign(ip.nvar, -1);
  for (int v = 0; v < ip.nvar; ++v) {
    int r = cuf.find(v);
    auto it = comp_of_root.find(r);
    if (it == comp_of_root.end()) {
      it = comp_of_root.emplace(r, static_cast<int>(ip.components.size())).first;
      ip.components.push_back({});
    }
    ip.var_component[v] = it->second;
    ip.components[it->second].push_back(v);
  }
  ip.comp_blocks.assign(ip.components.size(), {});
  for (size_t bi = 0; bi < ip.blocks.size(); ++bi)
    ip.comp_blocks[ip.var_component[ip.blocks[bi].vars[0]]].push_back(static_cast<int>(bi));

  ip.var_blocks.assign(ip.nvar, {});
  for (size_t bi = 0; bi < ip.blocks.size(); ++bi)
    for (int v : ip.blocks[bi].vars) ip.var_blocks[v].push_back(static_cast<int>(bi));

  out.trivially_done = (ip.nvar == 0);
  return out;
}

// ------------------------- interior point machinery -------------------------

struct BlockWork {
  MatrixXd X, S;
  MatrixXd W, Winv;        // NT scaling
  MatrixXd R, Rinv;        // W = R R^T
  MatrixXd Sinv;
  MatrixXd Rp;             // LMI residual  G + sum y F - X
  MatrixXd Z;              // Winv (Rc - Rp) Winv
  MatrixXd dX, dS, dXa, dSa;
};

// F_i applied as full symmetric matrix into dense accumulator.
void add_entries(MatrixXd& M, const std::vector<VarEntry>& es, double scale) {
  for (const auto& e : es) {
    M(e.row, e.col) += scale * e.alpha;
    if (e.row != e.col) M(e.col, e.row) += scale * e.alpha;
  }
}

double dot_entries(const MatrixXd& M, const std::vector<VarEntry>& es) {
  double s = 0.0;
  for (const auto& e : es) s += e.alpha * ((e.row == e.col) ? M(e.row, e.col) : 2.0 * M(e.row, e.col));
  return s;
}

// Largest step alpha <= cap with M + alpha*D remaining PSD (fraction to boundary
// applied by the caller).
double max_step(const MatrixXd& M, const MatrixXd& D) {
  const int n = static_cast<int>(M.rows());
  if (n == 1) {
    if (D(0, 0) >= 0) return std::numeric_limits<double>::infinity();
    return -M(0, 0) / D(0, 0);
  }
  Eigen::LLT<MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
    double shift = std::max(0.0, -es.eigenvalues().minCoeff()) + 1e-14 * (1 + M.trace());
    llt.compute(M + shift * MatrixXd::Identity(n, n));
    if (llt.info() != Eigen::Success) return 0.0;
  }
  MatrixXd T = llt.matrixL().solve(D);
  T = llt.matrixL().solve(T.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (T + T.transpose()), Eigen::EigenvaluesOnly);
  double lmin = es.eigenvalues().minCoeff();
  if (lmin >= -1e-16) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

struct KKTFactor {
  std::vector<Eigen::LLT<MatrixXd>> comp_llt;
  std::vector<MatrixXd> comp_dense;  // kept only on jitter retries
};

class IPMSolver {
 public:
  IPMSolver(InternalProblem& ip, const SolveOptions& opt) : ip_(ip), opt_(opt) {
    nvar_ = ip.nvar;
    nrows_ = static_cast<int>(ip.rows.size());
    nblocks_ = static_cast<int>(ip.blocks.size());
    sumdim_ = 0;
    for (auto& b : ip.blocks) sumdim_ += b.dim;
    // local variable indexing per component
    comp_local_.assign(nvar_, -1);
    for (auto& comp : ip.components)
      for (size_t i = 0; i < comp.size(); ++i) comp_local_[comp[i]] = static_cast<int>(i);
    E_.resize(nrows_, nvar_);
    E_.setZero();
    d_.resize(nrows_);
    for (int r = 0; r < nrows_; ++r) {
      for (size_t k = 0; k < ip.rows[r].vars.size(); ++k) E_(r, ip.rows[r].vars[k]) = ip.rows[r].coefs[k];
      d_[r] = ip.rows[r].rhs;
    }
    work_.resize(nblocks_);
  }

  SolveStatus run(VectorXd& y_out, SolverStats& stats);

 private:
  void compute_residuals();
  void compute_scalings();
  void build_schur();
  bool factor_schur();
  void solve_kkt(const VectorXd& q, const VectorXd& re, VectorXd& dy, VectorXd& dnu);
  VectorXd assemble_q(bool corrector, double sigma_mu);

  InternalProblem& ip_;
  SolveOptions opt_;
  int nvar_ = 0, nrows_ = 0, nblocks_ = 0, sumdim_ = 0;
  std::vector<int> comp_local_;

  MatrixXd E_;
  VectorXd d_;
  VectorXd y_, nu_, rd_, re_;
  std::vector<BlockWork> work_;
  std::vector<MatrixXd> H_;  // per component
  std::vector<Eigen::LLT<MatrixXd>> Hllt_;
  double mu_ = 0.0, pobj_ = 0.0, dobj_ = 0.0;
  double rel_gap_ = 0.0, rel_p_ = 0.0, rel_d_ = 0.0;
  double scale_c_ = 1.0, scale_d_ = 1.0, scale_g_ = 1.0;

 public:
  double final_gap() const { return rel_gap_; }
  double final_p() const { return rel_p_; }
  double final_d() const { return rel_d_; }
  double dual_objective() const { return dobj_; }
  int iterations = 0;
};

void IPMSolver::compute_residuals() {
  // Rp_b = G_b + sum_i y_i F_{b,i} - X_b
  double p_num = 0.0;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(opt_.threads)
#endif
  for (int bi = 0; bi < nblocks_; ++bi) {
    auto& b = ip_.blocks[bi];
    auto& w = work_[bi];
    w.Rp = b.G - w.X;
    for (size_t k = 0; k < b.vars.size(); ++k) add_entries(w.Rp, b.entries[k], y_[b.vars[k]]);
  }
  for (int bi = 0; bi < nblocks_; ++bi) p_num = std::max(p_num, work_[bi].Rp.cwiseAbs().maxCoeff());

  if (nrows_) re_ = d_ - E_ * y_;
  else re_.resize(0);
  double re_num = nrows_ ? re_.cwiseAbs().maxCoeff() : 0.0;

  rd_ = ip_.c;
  if (nrows_) rd_ -= E_.transpose() * nu_;
  std::vector<VectorXd> partial(nblocks_);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(opt_.threads)
#endif
  for (int bi = 0; bi < nblocks_; ++bi) {
    auto& b = ip_.blocks[bi];
    partial[bi] = VectorXd::Zero(static_cast<int>(b.vars.size()));
    for (size_t k = 0; k < b.vars.size(); ++k) partial[bi][k] = dot_entries(work_[bi].S, b.entries[k]);
  }
  for (int bi = 0; bi < nblocks_; ++bi)
    for (size_t k = 0; k < ip_.blocks[bi].vars.size(); ++k) rd_[ip_.blocks[bi].vars[k]] -= partial[bi][k];

  double gap = 0.0;
  for (int bi = 0; bi < nblocks_; ++bi) gap += (work_[bi].X.array() * work_[bi].S.array()).sum();
  mu_ = gap / sumdim_;

  pobj_ = ip_.c.dot(y_);
  dobj_ = nrows_ ? nu_.dot(d_) : 0.0;
  for (int bi = 0; bi < nblocks_; ++bi) dobj_ -= (work_[bi].S.array() * ip_.blocks[bi].G.array()).sum();

  rel_gap_ = std::abs(pobj_ - dobj_) / (1.0 + std::abs(pobj_) + std::abs(dobj_));
  rel_p_ = std::max(p_num / scale_g_, re_num / scale_d_);
  rel_d_ = rd_.size() ? rd_.cwiseAbs().maxCoeff() / scale_c_ : 0.0;
}

void IPMSolver::compute_scalings() {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(opt_.threads)
#endif
  for (int bi = 0; bi < nblocks_; ++bi) {
    auto& w = work_[bi];
    const int n = static_cast<int>(w.X.rows());
    if (n == 1) {
      double x = w.X(0, 0), s = w.S(0, 0);
      double ww = std::sqrt(x / s);
      w.W = MatrixXd::Constant(1, 1, ww);
      w.Winv = MatrixXd::Constant(1, 1, 1.0 / ww);
      w.R = MatrixXd::Constant(1, 1, std::sqrt(ww));
      w.Rinv = MatrixXd::Constant(1, 1, 1.0 / std::sqrt(ww));
      w.Sinv = MatrixXd::Constant(1, 1, 1.0 / s);
      continue;
    }
    Eigen::LLT<MatrixXd> lltx(w.X);
    MatrixXd L = lltx.matrixL();
    MatrixXd M = L.transpose() * w.S * L;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (M + M.transpose()));
    VectorXd lam = es.eigenvalues().cwiseMax(1e-300);
    MatrixXd Q = es.eigenvectors();
    VectorXd lq = lam.array().pow(-0.25);
    w.R = L * Q * lq.asDiagonal();                  // W = R R^T
    MatrixXd Li = L.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(n, n));
    w.Rinv = lq.cwiseInverse().asDiagonal() * Q.transpose() * Li;
    w.W = w.R * w.R.transpose();
    w.Winv = w.Rinv.transpose() * w.Rinv;
    Eigen::LLT<MatrixXd> llts(w.S);
    w.Sinv = llts.solve(MatrixXd::Identity(n, n));
  }
}

void IPMSolver::build_schur() {
  const int ncomp = static_cast<int>(ip_.components.size());
  H_.assign(ncomp, MatrixXd());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(opt_.threads)
#endif
  for (int ci = 0; ci < ncomp; ++ci) {
    const int m = static_cast<int>(ip_.components[ci].size());
    MatrixXd& H = H_[ci];
    H = MatrixXd::Zero(m, m);
    MatrixXd P;
    for (int bi : ip_.comp_blocks[ci]) {
      auto& b = ip_.blocks[bi];
      auto& w = work_[bi];
      const int nb = static_cast<int>(b.vars.size());
      const int n = b.dim;
      if (n == 1) {
        double wi = w.Winv(0, 0);
        for (int i = 0; i < nb; ++i) {
          double ai = b.entries[i][0].alpha;
          int li = comp_local_[b.vars[i]];
          H(li, li) += ai * ai * wi * wi;
        }
        continue;
      }
      P.resize(n, n);
      for (int i = 0; i < nb; ++i) {
        P.setZero();
        for (const auto& e : b.entries[i]) {
          P.noalias() += (e.alpha) * (w.Winv.col(e.row) * w.Winv.col(e.col).transpose());
          if (e.row != e.col)
            P.noalias() += (e.alpha) * (w.Winv.col(e.col) * w.Winv.col(e.row).transpose());
        }
        int li = comp_local_[b.vars[i]];
        for (int j = i; j < nb; ++j) {
          int lj = comp_local_[b.vars[j]];
          double v = dot_entries(P, b.entries[j]);
          H(std::min(li, lj), std::max(li, lj)) += v;
        }
      }
    }
    H = H.selfadjointView<Eigen::Upper>();
  }
}

bool IPMSolver::factor_schur() {
  const int ncomp = static_cast<int>(ip_.components.size());
  Hllt_.assign(ncomp, Eigen::LLT<MatrixXd>());
  std::vector<char> ok(ncomp, 1);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(opt_.threads)
#endif
  for (int ci = 0; ci < ncomp; ++ci) {
    double jitter = 0.0;
    const int m = static_cast<int>(H_[ci].rows());
    double scale = H_[ci].trace() / m + 1e-300;
    for (int attempt = 0; attempt < 6; ++attempt) {
      MatrixXd Hj = H_[ci];
      if (jitter > 0) Hj.diagonal().array() += jitter;
      Hllt_[ci].compute(Hj);
      if (Hllt_[ci].info() == Eigen::Success) { ok[ci] = 1; break; }
      ok[ci] = 0;
      jitter = (jitter == 0.0) ? 1e-13 * scale : jitter * 100;
    }
  }
  for (int ci = 0; ci < ncomp; ++ci)
    if (!ok[ci]) return false;
  return true;
}

void IPMSolver::solve_kkt(const VectorXd& q, const VectorXd& re, VectorXd& dy, VectorXd& dnu) {
  auto hsolve = [&](const VectorXd& v) {
    VectorXd out(nvar_);
    for (size_t ci = 0; ci < ip_.components.size(); ++ci) {
      const auto& comp = ip_.components[ci];
      VectorXd loc(static_cast<int>(comp.size()));
      for (size_t i = 0; i < comp.size(); ++i) loc[i] = v[comp[i]];
      VectorXd sol = Hllt_[ci].solve(loc);
      for (size_t i = 0; i < comp.size(); ++i) out[comp[i]] = sol[i];
    }
    return out;
  };
  if (nrows_ == 0) {
    dy = hsolve(q);
    dnu.resize(0);
    return;
  }
  MatrixXd HiEt(nvar_, nrows_);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(opt_.threads)
#endif
  for (int r = 0; r < nrows_; ++r) {
    VectorXd col = E_.row(r).transpose();
    VectorXd out(nvar_);
    for (size_t ci = 0; ci < ip_.components.size(); ++ci) {
      const auto& comp = ip_.components[ci];
      VectorXd loc(static_cast<int>(comp.size()));
      for (size_t i = 0; i < comp.size(); ++i) loc[i] = col[comp[i]];
      VectorXd sol = Hllt_[ci].solve(loc);
      for (size_t i = 0; i < comp.size(); ++i) out[comp[i]] = sol[i];
    }
    HiEt.col(r) = out;
  }
  VectorXd Hq = hsolve(q);
  MatrixXd schur = E_ * HiEt;
  VectorXd rhs = re - E_ * Hq;
  // Border rows may be numerically dependent; pivoted QR tolerates that.
  dnu = schur.colPivHouseholderQr().solve(rhs);
  dy = Hq + HiEt * dnu;
}

VectorXd IPMSolver::assemble_q(bool corrector, double sigma_mu) {
  // Rc assembled inside work_[bi].Z = Winv (Rc - Rp) Winv
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(opt_.threads)
#endif
  for (int bi = 0; bi < nblocks_; ++bi) {
    auto& w = work_[bi];
    MatrixXd Rc = -w.X;
    if (corrector) {
      Rc += sigma_mu * w.Sinv;
      // second-order term in the NT scaled space
      MatrixXd dVX = w.Rinv * w.dXa * w.Rinv.transpose();
      MatrixXd dVS = w.R.transpose() * w.dSa * w.R;
      MatrixXd V = w.R.transpose() * w.S * w.R;
      MatrixXd prod = 0.5 * (dVX * dVS + dVS * dVX);
      Eigen::LLT<MatrixXd> lltv(V);
      MatrixXd corr = w.R * lltv.solve(prod) * w.R.transpose();
      Rc -= 0.5 * (corr + corr.transpose());
    }
    w.Z = w.Winv * (Rc - w.Rp) * w.Winv;
  }
  VectorXd q = -rd_;
  std::vector<VectorXd> partial(nblocks_);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(opt_.threads)
#endif
  for (int bi = 0; bi < nblocks_; ++bi) {
    auto& b = ip_.blocks[bi];
    partial[bi] = VectorXd::Zero(static_cast<int>(b.vars.size()));
    for (size_t k = 0; k < b.vars.size(); ++k) partial[bi][k] = dot_entries(work_[bi].Z, b.entries[k]);
  }
  for (int bi = 0; bi < nblocks_; ++bi)
    for (size_t k = 0; k < ip_.blocks[bi].vars.size(); ++k) q[ip_.blocks[bi].vars[k]] += partial[bi][k];
  return q;
}

SolveStatus IPMSolver::run(VectorXd& y_out, SolverStats& stats) {
  scale_c_ = 1.0 + ip_.c.cwiseAbs().maxCoeff();
  scale_d_ = 1.0 + (nrows_ ? d_.cwiseAbs().maxCoeff() : 0.0);
  scale_g_ = 1.0;
  for (auto& b : ip_.blocks) scale_g_ = std::max(scale_g_, b.G.cwiseAbs().maxCoeff());

  y_ = VectorXd::Zero(nvar_);
  nu_ = VectorXd::Zero(nrows_);
  for (int bi = 0; bi < nblocks_; ++bi) {
    auto& b = ip_.blocks[bi];
    auto& w = work_[bi];
    double fscale = 0.0;
    for (auto& es : b.entries)
      for (auto& e : es) fscale = std::max(fscale, std::abs(e.alpha));
    double xs = std::max({10.0, std::sqrt(static_cast<double>(b.dim)),
                          2.0 * b.G.cwiseAbs().maxCoeff()});
    double ss = std::max({10.0, std::sqrt(static_cast<double>(b.dim)), scale_c_ / (1.0 + fscale)});
    w.X = xs * MatrixXd::Identity(b.dim, b.dim);
    w.S = ss * MatrixXd::Identity(b.dim, b.dim);
  }

  double best_err = std::numeric_limits<double>::infinity();
  int stall = 0;

  for (int it = 0; it < opt_.max_iterations; ++it) {
    iterations = it + 1;
    compute_residuals();
    double err = std::max({rel_gap_, rel_p_, rel_d_});
    if (opt_.verbose) {
      std::printf("it %3d  mu %.3e  gap %.3e  p %.3e  d %.3e  pobj %.9e\n", it, mu_, rel_gap_,
                  rel_p_, rel_d_, pobj_);
    }
    if (rel_gap_ <= opt_.tol_gap && rel_p_ <= opt_.tol_feas && rel_d_ <= opt_.tol_feas) {
      y_out = y_;
      return SolveStatus::Optimal;
    }

    // Primal infeasibility certificate: A*(S) + E^T nu = 0 with nu.d - <S,G> > 0.
    {
      double theta = nrows_ ? nu_.dot(d_) : 0.0;
      for (int bi = 0; bi < nblocks_; ++bi)
        theta -= (work_[bi].S.array() * ip_.blocks[bi].G.array()).sum();
      double snorm = 1.0;
      for (int bi = 0; bi < nblocks_; ++bi) snorm = std::max(snorm, work_[bi].S.cwiseAbs().maxCoeff());
      snorm = std::max(snorm, nrows_ ? nu_.cwiseAbs().maxCoeff() : 0.0);
      VectorXd ray = rd_ - ip_.c;  // = -(A*(S) + E^T nu)
      double rayres = ray.size() ? ray.cwiseAbs().maxCoeff() : 0.0;
      if (theta > 1e-8 * snorm && rayres <= 1e-9 * theta) {
        y_out = y_;
        return SolveStatus::Infeasible;
      }
      // Dual infeasibility (primal unbounded ray): feasible-ish and diverging objective.
      if (rel_p_ <= 1e-9 && pobj_ < -1e13 * scale_c_) {
        y_out = y_;
        return SolveStatus::Unbounded;
      }
    }

    if (err < best_err * 0.999) {
      best_err = err;
      stall = 0;
    } else if (++stall > 25) {
      break;
    }

    compute_scalings();
    build_schur();
    if (!factor_schur()) break;

    // Predictor.
    VectorXd q = assemble_q(false, 0.0);
    VectorXd dy, dnu;
    solve_kkt(q, re_, dy, dnu);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(opt_.threads)
#endif
    for (int bi = 0; bi < nblocks_; ++bi) {
      auto& b = ip_.blocks[bi];
      auto& w = work_[bi];
      MatrixXd D = w.Rp;
      for (size_t k = 0; k < b.vars.size(); ++k) add_entries(D, b.entries[k], dy[b.vars[k]]);
      w.dXa = D;
      w.dSa = w.Z - w.Winv * D * w.Winv + w.Winv * w.Rp * w.Winv;
      // dS = Winv(Rc - Rp)Winv - Winv (sum dy F) Winv ; D = sum dy F + Rp
      // so dS = Z - Winv*D*Winv + Winv*Rp*Winv
      w.dSa = 0.5 * (w.dSa + w.dSa.transpose());
    }
    double ap = 1.0, ad = 1.0;
    for (int bi = 0; bi < nblocks_; ++bi) {
      ap = std::min(ap, max_step(work_[bi].X, work_[bi].dXa));
      ad = std::min(ad, max_step(work_[bi].S, work_[bi].dSa));
    }
    double gap_aff = 0.0;
    for (int bi = 0; bi < nblocks_; ++bi) {
      auto& w = work_[bi];
      gap_aff += ((w.X + std::min(1.0, ap) * w.dXa).array() * (w.S + std::min(1.0, ad) * w.dSa).array())
                     .sum();
    }
    double mu_aff = std::max(gap_aff / sumdim_, 0.0);
    double sigma = std::pow(mu_aff / mu_, 3.0);
    sigma = std::clamp(sigma, 1e-6, 0.999);

    // Corrector.
    q = assemble_q(true, sigma * mu_);
    solve_kkt(q, re_, dy, dnu);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(opt_.threads)
#endif
    for (int bi = 0; bi < nblocks_; ++bi) {
      auto& b = ip_.blocks[bi];
      auto& w = work_[bi];
      MatrixXd D = w.Rp;
      for (size_t k = 0; k < b.vars.size(); ++k) add_entries(D, b.entries[k], dy[b.vars[k]]);
      w.dX = D;
      w.dS = w.Z - w.Winv * D * w.Winv + w.Winv * w.Rp * w.Winv;
      w.dS = 0.5 * (w.dS + w.dS.transpose());
    }
    ap = 1.0;
    ad = 1.0;
    for (int bi = 0; bi < nblocks_; ++bi) {
      ap = std::min(ap, max_step(work_[bi].X, work_[bi].dX));
      ad = std::min(ad, max_step(work_[bi].S, work_[bi].dS));
    }
    double tau = it < 5 ? 0.95 : 0.99;
    ap = std::min(1.0, tau * ap);
    ad = std::min(1.0, tau * ad);

    y_ += ap * dy;
    if (nrows_) nu_ += ad * dnu;
    for (int bi = 0; bi < nblocks_; ++bi) {
      work_[bi].X += ap * work_[bi].dX;
      work_[bi].S += ad * work_[bi].dS;
    }
  }

  compute_residuals();
  y_out = y_;
  double acc = opt_.accept_tol;
  if (rel_gap_ <= acc && rel_p_ <= acc && rel_d_ <= acc) return SolveStatus::Optimal;
  if (rel_gap_ <= 1e-4 && rel_p_ <= 1e-5 && rel_d_ <= 1e-5) return SolveStatus::Inaccurate;
  return SolveStatus::Failed;
}

}  // namespace

SDPSolution solve_sdp(const SDPProblem& p, const SolveOptions& options) {
  auto t0 = std::chrono::steady_clock::now();
  SDPSolution sol;
  SolveOptions opt = options;
  if (opt.threads < 1) opt.threads = 1;
  openblas_set_num_threads(1);

  PresolveResult pre = presolve(p, std::max(opt.tol_feas, 1e-9));
  auto finish = [&](SolveStatus st) {
    sol.status = st;
    sol.stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
  };
  if (pre.infeasible) return finish(SolveStatus::Infeasible);

  InternalProblem& ip = pre.ip;
  const double sense_sign = (p.sense == Sense::Maximize) ? -1.0 : 1.0;
  VectorXd cext = ip.c;
  ip.c = sense_sign * ip.c;  // internal: minimize

  VectorXd y = VectorXd::Zero(ip.nvar);
  SolveStatus st = SolveStatus::Optimal;
  if (!pre.trivially_done) {
    IPMSolver ipm(ip, opt);
    SolverStats stats;
    st = ipm.run(y, stats);
    sol.stats.iterations = ipm.iterations;
    sol.stats.rel_gap = ipm.final_gap();
    sol.stats.primal_residual = ipm.final_p();
    sol.stats.dual_residual = ipm.final_d();
    sol.stats.dual_objective = sense_sign * ipm.dual_objective() + ip.obj_const;
  }

  sol.objective_value = cext.dot(y) + ip.obj_const;

  // Reconstruct block values from the variable vector (exactly consistent with
  // the substituted equality constraints).
  sol.block_values.resize(p.block_dims.size());
  for (size_t b = 0; b < p.block_dims.size(); ++b)
    sol.block_values[b] = MatrixXd::Zero(p.block_dims[b], p.block_dims[b]);
  for (const auto& rc : ip.recon) {
    double v = rc.ref.var < 0 ? rc.ref.beta : rc.ref.alpha * y[rc.ref.var] + rc.ref.beta;
    sol.block_values[rc.block](rc.row, rc.col) = v;
    sol.block_values[rc.block](rc.col, rc.row) = v;
  }
  return finish(st);
}

}  // namespace bellcert
