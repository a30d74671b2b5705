#pragma once
// Fluctuation generators around a Hartree trajectory and the quadratic
// (Bogoliubov) dynamics they generate.
//
// Operators on the truncated Fock space are products of truncated ladder
// matrices with annihilators applied first, so every normal-ordered monomial
// is represented exactly as P X P (P = projection on sectors <= n_max).

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Sparse>

#include "mflab/fit.hpp"
#include "mflab/fock.hpp"
#include "mflab/hartree.hpp"
#include "mflab/types.hpp"

namespace mflab::fluctuation {

using SpMat = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

/// Blocks of L(t) at one time.
///   h  = h0 + diag(V * |phi|^2) + K1,  K1(i, j) = V(i - j) phi(i) conj(phi(j))
///   K2(i, j) = V(i - j) phi(i) phi(j)
///   L2 = sum h_ij a*_i a_j + sum K2_ij a*_i a*_j + sum conj(K2_ij) a_i a_j
/// The pairing term carries no factor 1/2.
struct FluctuationGenerator {
  double t = 0.0;
  int particles = 1;
  CVec phi;
  RMat pair;  // V(dist(i, j))
  RMat h0;
  CMat h;
  CMat pairing;  // K2 above

  double cubic_scale() const;    // 1 / sqrt(N)
  double quartic_scale() const;  // 1 / N
};

FluctuationGenerator make_generator(const lattice::LatticeGrid& grid, const lattice::PotentialSpec& potential,
                                    const CVec& phi, double t, int particles);

/// Generators along a Hartree trajectory, phi linearly interpolated between
/// the stored steps.
class GeneratorSeries {
 public:
  GeneratorSeries(std::shared_ptr<const hartree::HartreeTrajectory> traj, int particles);

  FluctuationGenerator at(double t) const;  // std::out_of_range outside the trajectory
  double final_time() const { return traj_->final_time(); }
  double dt() const { return traj_->dt; }
  int particles() const { return particles_; }
  int modes() const { return traj_->grid.sites(); }
  const hartree::HartreeTrajectory& trajectory() const { return *traj_; }
  GeneratorSeries with_particles(int n) const { return GeneratorSeries(traj_, n); }

 private:
  std::shared_ptr<const hartree::HartreeTrajectory> traj_;
  int particles_;
};

GeneratorSeries build_generators(const hartree::HartreeTrajectory& traj, int particles);

// --- Bogoliubov fast path -----------------------------------------------------

/// Heisenberg action of U2(t;0): a(f) -> a(U f) + a*(V conj(f)).
struct QuadraticPropagator {
  std::vector<double> times;
  std::vector<CMat> u;
  std::vector<CMat> v;
  double max_ccr_residual = 0.0;

  const CMat& final_u() const { return u.back(); }
  const CMat& final_v() const { return v.back(); }
};

/// Entrywise residual of [A(f), A*(g)] = <f, g> and [A(f), A(g)] = 0 for the
/// transformed fields A(f) = a(U f) + a*(V conj(f)).
double ccr_residual(const CMat& u, const CMat& v);

/// RK4 on the coefficient ODE, output on the series' time grid with
/// substeps of phase <= 0.005.  Aborts with mflab::Error
/// when the CCR residual exceeds 1e-6.
QuadraticPropagator propagate_quadratic(const GeneratorSeries& gens, double t);

// --- truncated Fock space -----------------------------------------------------

class FockOperators {
 public:
  explicit FockOperators(fock::BasisPtr basis);

  const fock::FockBasis& basis() const { return *basis_; }
  const fock::BasisPtr& basis_ptr() const { return basis_; }
  std::size_t size() const { return basis_->size(); }

  const SpMat& annihilator(int k) const { return a_[std::size_t(k)]; }
  const SpMat& creator(int k) const { return ad_[std::size_t(k)]; }

  SpMat number() const;
  /// sum J_xy a*_x a_y
  SpMat second_quantized(const CMat& j) const;
  /// sum K_xy a*_x a*_y + conj(K_xy) a_x a_y
  SpMat pairing(const CMat& k) const;
  SpMat quadratic(const FluctuationGenerator& g) const;
  SpMat kinetic(const FluctuationGenerator& g) const;
  /// 1/sqrt(N) sum V(x - y) a*_x (phi(y) a*_y + conj(phi(y)) a_y) a_x
  SpMat cubic(const FluctuationGenerator& g) const;
  /// 1/N sum V(x - y) a*_x a*_y a_y a_x
  SpMat quartic(const FluctuationGenerator& g) const;

  /// out = L2(g) in, from precomputed hopping and pair matrices.
  void apply_quadratic(const FluctuationGenerator& g, const CVec& in, CVec& out) const;
  /// Rough bound on ||L2(g)|| over the truncated space (for step control).
  double quadratic_norm_bound(const FluctuationGenerator& g) const;

 private:
  fock::BasisPtr basis_;
  int m_;
  std::vector<SpMat> a_, ad_;
  std::vector<SpMat> hop_;     // a*_x a_y at x * M + y
  std::vector<SpMat> pair_c_;  // a*_x a*_y, x <= y
  std::vector<SpMat> pair_a_;  // a_x a_y, x <= y
};

/// L(t) assembled term by term from occupation arithmetic, without the
/// ladder-matrix products.  Dense; small bases only.
CMat full_generator_direct(const fock::FockBasis& basis, const FluctuationGenerator& g);

struct FlowOptions {
  double leak_threshold = 1e-6;  // truncation_leak() above this throws HeadroomError
  double max_substep_phase = 0.1;
};

using FlowObserver = std::function<void(double t, const fock::FockState&)>;

/// i d/dt psi = L2(t) psi from t_from to t_to (either direction) on the series'
/// time grid, RK4 with substeps.  The observer sees every grid point.
fock::FockState propagate_quadratic_fock(const GeneratorSeries& gens, const FockOperators& ops,
                                         const fock::FockState& psi0, double t_from, double t_to,
                                         const FlowOptions& opts = {}, const FlowObserver& observer = {});

/// (U, V) read off from the Fock flow:
///   P_km = <U2 Omega, a_k U2 a*_m Omega>,  Q_km = <U2 a*_m Omega, a_k U2 Omega>,
///   U = P^*, V = Q^T.
std::pair<CMat, CMat> bogoliubov_from_fock(const GeneratorSeries& gens, const FockOperators& ops, double t,
                                           const FlowOptions& opts = {});

// --- property checks -------------------------------------------------------------

struct ParityReport {
  double odd_mass = 0.0;
  double norm_error = 0.0;
  double leak = 0.0;
};
/// U2(t;0) Omega: mass on odd sectors and |norm - 1|.
ParityReport check_pair_parity(const GeneratorSeries& gens, const FockOperators& ops, double t);

struct SectorLocalityReport {
  double t = 0.0;
  double off_sector_mass = 0.0;  // relative to the total squared norm
  double leak = 0.0;
};
/// U2(t;0)^* phi(f) U2(t;0) Omega, mass outside the one-particle sector.
SectorLocalityReport check_sector_locality(const GeneratorSeries& gens, const FockOperators& ops, const CVec& f,
                                           double t);

struct NumberGrowthReport {
  int power = 1;
  std::vector<double> times;
  std::vector<double> ratio;  // ||(N+1)^j psi_t|| / ||(N+1)^j psi||
  fit::GrowthFit fit;
  double leak = 0.0;
};
NumberGrowthReport check_number_growth(const GeneratorSeries& gens, const FockOperators& ops,
                                       const fock::FockState& psi0, int power, double final_time);

struct SandwichReport {
  std::vector<double> times;
  std::vector<double> c_minus;  // -c (N+1) <= L2 - K
  std::vector<double> c_plus;   //  L2 - K <= c (N+1)
  std::vector<double> c;        // max of the two
  double c_max = 0.0;
  double c_min = 0.0;
};
SandwichReport check_kinetic_sandwich(const GeneratorSeries& gens, const FockOperators& ops,
                                      const std::vector<double>& times);

struct QuadraticExpectationReport {
  std::vector<double> times;
  std::vector<double> expectation;  // <psi_t, L2(t) psi_t>
  double reference = 0.0;           // <psi, (L2(0) + N + 1) psi>
  fit::GrowthFit fit;               // on |expectation| / reference
  double bound_constant = 0.0;      // smallest C with |<L2>| <= C e^{K t} reference
  double leak = 0.0;
};
QuadraticExpectationReport check_quadratic_expectation(const GeneratorSeries& gens, const FockOperators& ops,
                                         const fock::FockState& psi0, double final_time);

struct CubicBoundReport {
  int power = 0;
  std::vector<int> particles;
  std::vector<double> ratio;     // ||(N+1)^j L3 psi|| / ||(N+1)^{j+3/2} psi||
  std::vector<double> rescaled;  // sqrt(N) * ratio
  double spread = 0.0;           // (max - min) / max of rescaled
};
CubicBoundReport check_cubic_bound(const GeneratorSeries& gens, const FockOperators& ops, const fock::FockState& psi,
                             double t, int power, const std::vector<int>& particles);

/// max |L2 + L3 + L4 - L| entrywise, L from full_generator_direct.
double generator_reconstruction_residual(const GeneratorSeries& gens, const FockOperators& ops, double t);

}  // namespace mflab::fluctuation
