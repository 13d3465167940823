#pragma once

#include <string>
#include <vector>

#include "bellcert/scenario.hpp"

namespace bellcert {

/// Cotangent-derived weights of the m-input n-outcome chain inequality family.
struct SATWAPParams {
  int m = 0;
  int n = 0;
  std::vector<double> alphas;  // floor(n/2) entries
  std::vector<double> betas;

  static SATWAPParams compute(int m, int n);
};

/// The shared correlator chain sum_k alpha_k P_k - beta_k Q_k with
///   P_k = sum_i [P(A_i = B_i + k) + P(B_i = A_{i+1} + k)]
///   Q_k = sum_i [P(A_i = B_i - k - 1) + P(B_i = A_{i+1} - k - 1)]
/// and the wrap A_{m+1} = A_1 + 1 (outcome shift on the first input). No bounds
/// are attached; callers fill them.
BellFunctional chain_functional(int m, int n, const std::vector<double>& alphas,
                                const std::vector<double>& betas);

/// Chain functional with SATWAP weights; classical bound from enumeration,
/// quantum bound from the optimal Fourier-measurement model.
BellFunctional satwap_functional(int m, int n);

enum class FacetFamily { ChshCh, Cglmp, I4422 };

/// The three facet inequalities studied alongside the SATWAP family. `d` is the
/// outcome count for the CGLMP family and ignored otherwise.
BellFunctional facet_functional(FacetFamily family, int d = 0);

/// CGLMP chain expression with weights 1 - 2k/(d-1), no bounds attached.
BellFunctional cglmp_expression(int d);

/// Normalized copy: classical bound -> 0, quantum bound -> 1.
BellFunctional normalized(const BellFunctional& f);

/// Resolves CLI names: "chsh-ch", "cglmp:d", "i4422", "satwap:m:n".
BellFunctional parse_inequality(const std::string& name);

/// Best known value of the I4422 quantum bound (frozen from the level-(1+AB+AAB)
/// relaxation and the matching explicit model; the toolkit's tests re-derive the
/// bracket).
extern const double kI4422RawQuantumBound;

}  // namespace bellcert
