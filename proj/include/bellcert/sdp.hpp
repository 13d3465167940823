#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace bellcert {

enum class Relation { Eq, Le, Ge };
enum class Sense { Maximize, Minimize };
enum class SolveStatus { Optimal, Infeasible, Unbounded, Inaccurate, Failed };

std::string to_string(SolveStatus s);

/// One coefficient on a symmetric block entry. (row,col) and (col,row) address
/// the same entry of the symmetric block variable; listing both sums.
struct MatEntry {
  int block = 0;
  int row = 0;
  int col = 0;
  double value = 0.0;
};

struct LinearConstraint {
  std::vector<MatEntry> coeffs;
  Relation rel = Relation::Eq;
  double rhs = 0.0;
};

/// Block-diagonal semidefinite program over symmetric PSD block variables:
///   optimize  sum objective[e] * X_e   subject to the linear constraints,
///   X_b symmetric positive semidefinite for every block b.
/// Linear programs are the special case where every block has dimension 1.
struct SDPProblem {
  std::vector<int> block_dims;
  std::vector<MatEntry> objective;
  double objective_constant = 0.0;
  std::vector<LinearConstraint> constraints;
  Sense sense = Sense::Maximize;

  int add_block(int dim) {
    block_dims.push_back(dim);
    return static_cast<int>(block_dims.size()) - 1;
  }
  void add_objective(int block, int r, int c, double v) {
    if (v != 0.0) objective.push_back({block, r, c, v});
  }
};

struct SolverStats {
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double rel_gap = 0.0;
  double dual_objective = 0.0;
  double seconds = 0.0;
};

struct SDPSolution {
  SolveStatus status = SolveStatus::Failed;
  double objective_value = 0.0;
  std::vector<Eigen::MatrixXd> block_values;
  SolverStats stats;

  bool ok() const { return status == SolveStatus::Optimal; }
};

struct SolveOptions {
  double tol_gap = 1e-8;       // requested relative duality gap
  double tol_feas = 1e-8;      // requested relative feasibility
  double accept_tol = 1e-7;    // residual level still reported as optimal
  int max_iterations = 150;
  int threads = 1;             // OpenMP threads for block/component loops
  bool verbose = false;
};

/// Interior-point solve. "Optimal" guarantees primal/dual residuals and the
/// relative duality gap at or below accept_tol. "Failed" carries no bound
/// information whatsoever.
SDPSolution solve_sdp(const SDPProblem& p, const SolveOptions& options = {});

}  // namespace bellcert
