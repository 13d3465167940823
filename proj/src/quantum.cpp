#include "bellcert/quantum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "bellcert/inequalities.hpp"

namespace bellcert {

namespace {
constexpr double kPi = std::numbers::pi;
}

PureState::PureState(int da, int db, CVec amps) : d_a(da), d_b(db), amplitudes(std::move(amps)) {
  if (d_a < 1 || d_b < 1 || amplitudes.size() != static_cast<Eigen::Index>(d_a) * d_b)
    throw std::invalid_argument("PureState: dimension mismatch");
  if (std::abs(amplitudes.norm() - 1.0) > kProbTol)
    throw std::invalid_argument("PureState: not normalized");
}

PureState PureState::maximally_entangled(int d) {
  CVec amps = CVec::Zero(d * d);
  for (int q = 0; q < d; ++q) amps[q * d + q] = 1.0 / std::sqrt(static_cast<double>(d));
  return PureState(d, d, std::move(amps));
}

PureState PureState::schmidt_diagonal(const Eigen::VectorXd& coeffs) {
  const int d = static_cast<int>(coeffs.size());
  Eigen::VectorXd c = coeffs / coeffs.norm();
  CVec amps = CVec::Zero(d * d);
  for (int q = 0; q < d; ++q) amps[q * d + q] = c[q];
  return PureState(d, d, std::move(amps));
}

ProjectiveMeasurement::ProjectiveMeasurement(std::vector<CMat> projectors, double tol)
    : projectors_(std::move(projectors)) {
  if (projectors_.empty()) throw std::invalid_argument("ProjectiveMeasurement: no outcomes");
  const int d = static_cast<int>(projectors_.front().rows());
  CMat sum = CMat::Zero(d, d);
  for (const auto& p : projectors_) {
    if (p.rows() != d || p.cols() != d)
      throw std::invalid_argument("ProjectiveMeasurement: projector dimension mismatch");
    if ((p - p.adjoint()).cwiseAbs().maxCoeff() > tol)
      throw std::invalid_argument("ProjectiveMeasurement: projector not Hermitian");
    sum += p;
  }
  if ((sum - CMat::Identity(d, d)).cwiseAbs().maxCoeff() > tol)
    throw std::invalid_argument("ProjectiveMeasurement: projectors do not sum to identity");
  for (size_t i = 0; i < projectors_.size(); ++i)
    for (size_t j = i; j < projectors_.size(); ++j) {
      CMat prod = projectors_[i] * projectors_[j];
      if (i == j) prod -= projectors_[i];
      if (prod.cwiseAbs().maxCoeff() > tol)
        throw std::invalid_argument("ProjectiveMeasurement: projectors not orthogonal/idempotent");
    }
}

ProjectiveMeasurement ProjectiveMeasurement::from_vectors(const std::vector<CVec>& vectors,
                                                          double max_deviation) {
  const int n = static_cast<int>(vectors.size());
  const int d = static_cast<int>(vectors.front().size());
  if (n != d)
    throw std::invalid_argument("from_vectors: need a full basis (one vector per dimension)");
  CMat V(d, n);
  for (int k = 0; k < n; ++k) V.col(k) = vectors[k];
  // Snap to the nearest orthonormal frame (polar decomposition); the shipped
  // tables print vectors rounded to four decimals.
  Eigen::JacobiSVD<CMat> svd(V, Eigen::ComputeThinU | Eigen::ComputeThinV);
  CMat frame = svd.matrixU() * svd.matrixV().adjoint();
  if ((frame - V).cwiseAbs().maxCoeff() > max_deviation)
    throw std::invalid_argument("from_vectors: vectors too far from an orthonormal basis");
  std::vector<CMat> projs;
  projs.reserve(n);
  for (int k = 0; k < n; ++k) projs.push_back(frame.col(k) * frame.col(k).adjoint());
  return ProjectiveMeasurement(std::move(projs));
}

ProjectiveMeasurement ProjectiveMeasurement::from_click_vector(const CVec& v) {
  CVec u = v / v.norm();
  const int d = static_cast<int>(u.size());
  CMat p0 = u * u.adjoint();
  return ProjectiveMeasurement({p0, CMat::Identity(d, d) - p0});
}

Scenario QuantumModel::scenario() const {
  return Scenario(static_cast<int>(alice.size()), static_cast<int>(bob.size()),
                  alice.front().outcomes(), bob.front().outcomes());
}

Behavior behavior_from_model(const QuantumModel& model) {
  const Scenario sc = model.scenario();
  const int da = model.state.d_a, db = model.state.d_b;
  for (const auto& m : model.alice)
    if (m.dim() != da) throw std::invalid_argument("behavior_from_model: Alice dimension mismatch");
  for (const auto& m : model.bob)
    if (m.dim() != db) throw std::invalid_argument("behavior_from_model: Bob dimension mismatch");

  CMat psi(da, db);
  for (int i = 0; i < da; ++i)
    for (int j = 0; j < db; ++j) psi(i, j) = model.state.amplitudes[i * db + j];

  // <psi| A (x) B |psi> = tr(Psi^dag A Psi B^T) for the amplitude matrix Psi.
  std::vector<double> table(sc.joint_cells());
  for (int x = 0; x < sc.m_a; ++x)
    for (int a = 0; a < sc.n_a; ++a) {
      CMat left = psi.adjoint() * model.alice[x].projector(a) * psi;
      for (int y = 0; y < sc.m_b; ++y)
        for (int b = 0; b < sc.n_b; ++b) {
          double p = (left * model.bob[y].projector(b).transpose()).trace().real();
          table[((x * sc.m_b + y) * sc.n_a + a) * sc.n_b + b] = std::clamp(p, 0.0, 1.0);
        }
    }
  return Behavior(sc, std::move(table));
}

namespace {

CVec fourier_phase_vector(int d, double shift) {
  // component q: exp(2 pi i q shift / d) / sqrt(d)
  CVec v(d);
  const double invsqrt = 1.0 / std::sqrt(static_cast<double>(d));
  for (int q = 0; q < d; ++q) v[q] = std::polar(invsqrt, 2.0 * kPi * q * shift / d);
  return v;
}

}  // namespace

QuantumModel satwap_optimal_model(int m, int d) {
  if (m < 2 || d < 2) throw std::invalid_argument("satwap_optimal_model: need m >= 2, d >= 2");
  QuantumModel model;
  model.state = PureState::maximally_entangled(d);
  for (int x = 0; x < m; ++x) {
    const double theta = (x + 0.5) / m;
    std::vector<CVec> vecs;
    for (int a = 0; a < d; ++a) vecs.push_back(fourier_phase_vector(d, a - theta));
    model.alice.emplace_back(ProjectiveMeasurement::from_vectors(vecs, 1e-9));
  }
  for (int y = 0; y < m; ++y) {
    const double zeta = (y + 1.0) / m;
    std::vector<CVec> vecs;
    for (int b = 0; b < d; ++b) vecs.push_back(fourier_phase_vector(d, zeta - b));
    model.bob.emplace_back(ProjectiveMeasurement::from_vectors(vecs, 1e-9));
  }
  return model;
}

namespace {

ProjectiveMeasurement qubit_measurement(double nx, double ny, double nz) {
  CMat p0(2, 2);
  p0(0, 0) = 0.5 * (1 + nz);
  p0(1, 1) = 0.5 * (1 - nz);
  p0(0, 1) = 0.5 * Cplx(nx, -ny);
  p0(1, 0) = 0.5 * Cplx(nx, ny);
  return ProjectiveMeasurement({p0, CMat::Identity(2, 2) - p0});
}

}  // namespace

QuantumModel chsh_optimal_model() {
  const double r = 1.0 / std::sqrt(2.0);
  QuantumModel model;
  model.state = PureState::maximally_entangled(2);
  model.alice.push_back(qubit_measurement(r, 0, r));
  model.alice.push_back(qubit_measurement(-r, 0, r));
  model.bob.push_back(qubit_measurement(0, 0, 1));
  model.bob.push_back(qubit_measurement(1, 0, 0));
  return model;
}

QuantumModel cglmp_optimal_model(int d) {
  if (d < 2) throw std::invalid_argument("cglmp_optimal_model: need d >= 2");
  BellFunctional f = facet_cglmp_raw(d);

  // For a Schmidt-diagonal state sum_q c_q |qq> with the Fourier measurements,
  // P(ab|xy) = c^dag (z z^dag) c with z_q = u_{a|x}[q] v_{b|y}[q], so the whole
  // functional is a Hermitian form; the optimal state is its top eigenvector.
  CMat K = CMat::Zero(d, d);
  for (const auto& [k, coef] : f.joint()) {
    const int a = k[0], b = k[1], x = k[2], y = k[3];
    const double theta = (x + 0.5) / 2.0, zeta = (y + 1.0) / 2.0;
    CVec u = fourier_phase_vector(d, a - theta);
    CVec v = fourier_phase_vector(d, zeta - b);
    CVec z = u.cwiseProduct(v);
    K += coef * (z * z.adjoint());
  }
  double diag = f.constant();
  for (const auto& [k, coef] : f.marginal_a()) diag += coef / d;  // |u_q|^2 = 1/d
  for (const auto& [k, coef] : f.marginal_b()) diag += coef / d;
  K.diagonal().array() += diag;

  Eigen::SelfAdjointEigenSolver<CMat> es(K);
  CVec c = es.eigenvectors().col(d - 1);
  int imax = 0;
  for (int q = 1; q < d; ++q)
    if (std::abs(c[q]) > std::abs(c[imax])) imax = q;
  c *= std::polar(1.0, -std::arg(c[imax]));

  QuantumModel model = satwap_optimal_model(2, d);
  CVec amps = CVec::Zero(d * d);
  for (int q = 0; q < d; ++q) amps[q * d + q] = c[q];
  model.state = PureState(d, d, std::move(amps));
  return model;
}

Behavior apply_detection_efficiency(const Behavior& p, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0))
    throw std::invalid_argument("apply_detection_efficiency: eta outside [0,1]");
  const Scenario& sc = p.scenario();
  const int na = sc.n_a, nb = sc.n_b;
  std::vector<double> t(sc.joint_cells(), 0.0);
  const double e2 = eta * eta, e1 = eta * (1.0 - eta), e0 = (1.0 - eta) * (1.0 - eta);
  for (int x = 0; x < sc.m_a; ++x)
    for (int y = 0; y < sc.m_b; ++y)
      for (int a = 0; a < na; ++a)
        for (int b = 0; b < nb; ++b) {
          double v = e2 * p.at(a, b, x, y);
          if (b == nb - 1) v += e1 * p.marginal_a(a, x);
          if (a == na - 1) v += e1 * p.marginal_b(b, y);
          if (a == na - 1 && b == nb - 1) v += e0;
          t[((x * sc.m_b + y) * na + a) * nb + b] = v;
        }
  return Behavior(sc, std::move(t));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

BootstrapResult poisson_bootstrap(const BellFunctional& f, const Behavior& ideal,
                                  std::int64_t events_per_setting, int reps,
                                  std::uint64_t seed) {
  if (reps < 2) throw std::invalid_argument("poisson_bootstrap: reps must be >= 2");
  if (events_per_setting <= 0) throw std::invalid_argument("poisson_bootstrap: zero events");
  if (!(f.scenario() == ideal.scenario()))
    throw std::invalid_argument("poisson_bootstrap: scenario mismatch");
  const Scenario& sc = ideal.scenario();

  std::vector<double> values(reps);
  for (int rep = 0; rep < reps; ++rep) {
    std::mt19937_64 rng(derive_seed(seed, rep));
    std::vector<double> t(sc.joint_cells(), 0.0);
    for (int x = 0; x < sc.m_a; ++x)
      for (int y = 0; y < sc.m_b; ++y) {
        double sum = 0.0;
        const int base = (x * sc.m_b + y) * sc.n_a * sc.n_b;
        for (int a = 0; a < sc.n_a; ++a)
          for (int b = 0; b < sc.n_b; ++b) {
            const double mean = static_cast<double>(events_per_setting) * ideal.at(a, b, x, y);
            double count = 0.0;
            if (mean > 0) {
              std::poisson_distribution<long long> pois(mean);
              count = static_cast<double>(pois(rng));
            }
            t[base + a * sc.n_b + b] = count;
            sum += count;
          }
        if (sum > 0)
          for (int k = 0; k < sc.n_a * sc.n_b; ++k) t[base + k] /= sum;
        else  // no events in this setting: fall back to the uniform table
          for (int k = 0; k < sc.n_a * sc.n_b; ++k) t[base + k] = 1.0 / (sc.n_a * sc.n_b);
      }
    values[rep] = evaluate_functional(f, Behavior(sc, std::move(t)));
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= reps;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= (reps - 1);
  return {mean, std::sqrt(var)};
}

}  // namespace bellcert
