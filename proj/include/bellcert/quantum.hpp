#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

#include "bellcert/scenario.hpp"

namespace bellcert {

using Cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

/// Pure bipartite state; amplitude for |i>|j> sits at index i*d_b + j.
struct PureState {
  int d_a = 0;
  int d_b = 0;
  CVec amplitudes;

  PureState() = default;
  PureState(int da, int db, CVec amps);

  static PureState maximally_entangled(int d);
  /// Schmidt-diagonal state sum_i c_i |ii> from real coefficients (normalized on entry).
  static PureState schmidt_diagonal(const Eigen::VectorXd& coeffs);
};

/// A projective n-outcome measurement given by orthogonal projectors summing to 1.
class ProjectiveMeasurement {
 public:
  ProjectiveMeasurement(std::vector<CMat> projectors, double tol = kProbTol);

  /// Rank-1 measurement from one unit vector per outcome. Vectors are snapped to
  /// the nearest orthonormal frame first (table data is printed rounded); if they
  /// deviate by more than `max_deviation` the data is considered corrupt.
  static ProjectiveMeasurement from_vectors(const std::vector<CVec>& vectors,
                                            double max_deviation = 1e-2);

  /// Two-outcome measurement from the single "outcome 1" vector of the facet
  /// tables: the second projector is the orthogonal complement.
  static ProjectiveMeasurement from_click_vector(const CVec& v);

  int outcomes() const { return static_cast<int>(projectors_.size()); }
  int dim() const { return static_cast<int>(projectors_.front().rows()); }
  const CMat& projector(int a) const { return projectors_[a]; }

 private:
  std::vector<CMat> projectors_;
};

struct QuantumModel {
  PureState state;
  std::vector<ProjectiveMeasurement> alice;
  std::vector<ProjectiveMeasurement> bob;

  Scenario scenario() const;
};

/// Born-rule behavior P(ab|xy) = <psi| Pi_a|x (x) Pi_b|y |psi>.
Behavior behavior_from_model(const QuantumModel& model);

/// Maximally entangled state with Fourier-phase measurements attaining the
/// SATWAP quantum bound (phases theta_x = (x+1/2)/m, zeta_y = (y+1)/m, 0-based).
QuantumModel satwap_optimal_model(int m, int d);

/// Optimal qubit model for the CH form (Tsirelson value (sqrt(2)-1)/2).
QuantumModel chsh_optimal_model();

/// Fourier measurements of satwap_optimal_model(2, d) with the Schmidt-diagonal
/// state maximizing the CGLMP functional (top eigenvector of the induced form).
QuantumModel cglmp_optimal_model(int d);

/// Binning transform for detection efficiency eta: non-detections are relabeled
/// as the last outcome on each side.
Behavior apply_detection_efficiency(const Behavior& p, double eta);

struct BootstrapResult {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Draws Poisson counts with mean events_per_setting*P(ab|xy) per cell,
/// renormalizes per setting, and evaluates f; repeated `reps` times.
BootstrapResult poisson_bootstrap(const BellFunctional& f, const Behavior& ideal,
                                  std::int64_t events_per_setting, int reps,
                                  std::uint64_t seed);

/// Deterministic stream splitting for seeded reproducibility.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace bellcert
