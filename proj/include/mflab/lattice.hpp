#pragma once
// Periodic 1D lattice, the two-body potential and its cutoff regularization.

#include <optional>
#include <string>
#include <vector>

#include "mflab/types.hpp"

namespace mflab::lattice {

/// Periodic ring of M sites with spacing dx and its finite-difference Laplacian.
class LatticeGrid {
 public:
  LatticeGrid(int sites, double spacing);

  int sites() const noexcept { return sites_; }
  double spacing() const noexcept { return spacing_; }

  /// Number of lattice steps between i and j going the short way round.
  int ring_steps(int i, int j) const noexcept;
  /// dx * ring_steps(i, j)
  double distance(int i, int j) const noexcept { return spacing_ * ring_steps(i, j); }

  /// Kinetic operator h0 = -Laplacian (diag 2/dx^2, neighbours -1/dx^2, periodic).
  const RMat& laplacian() const noexcept { return h0_; }
  /// Eigenvalues of h0 in ascending order.
  const RVec& laplacian_spectrum() const noexcept { return h0_eigenvalues_; }
  /// Orthonormal eigenvectors of h0 (columns), matching laplacian_spectrum().
  const RMat& laplacian_modes() const noexcept { return h0_modes_; }
  double laplacian_norm() const noexcept { return h0_eigenvalues_(h0_eigenvalues_.size() - 1); }

 private:
  int sites_;
  double spacing_;
  RMat h0_;
  RVec h0_eigenvalues_;
  RMat h0_modes_;
};

/// Throws std::invalid_argument for M < 2 or dx <= 0.
LatticeGrid build_grid(int sites, double spacing);

enum class PotentialFamily { Zero, SoftCoulomb, Gaussian, Constant };

std::string to_string(PotentialFamily family);
PotentialFamily potential_family_from_string(const std::string& name);

/// Two-body potential as a function of ring distance, sampled on a grid.
///
/// values()[k] holds V at k ring steps (k = 0 .. M/2).  The cutoff, if set,
/// has already been applied to values(); raw_values() keeps the unclipped V.
class PotentialSpec {
 public:
  PotentialSpec() = default;

  static PotentialSpec zero(const LatticeGrid& grid);
  static PotentialSpec constant(const LatticeGrid& grid, double c);
  /// v0 / sqrt(d^2 + a^2)
  static PotentialSpec soft_coulomb(const LatticeGrid& grid, double v0, double a);
  /// v0 exp(-d^2 / (2 sigma^2))
  static PotentialSpec gaussian(const LatticeGrid& grid, double v0, double sigma);
  /// Arbitrary profile indexed by ring steps; size must be M/2 + 1.
  static PotentialSpec from_profile(const LatticeGrid& grid, std::vector<double> profile);

  PotentialFamily family() const noexcept { return family_; }
  double v0() const noexcept { return v0_; }
  /// a for soft-coulomb, sigma for gaussian.
  double width() const noexcept { return width_; }
  std::optional<double> alpha() const noexcept { return alpha_; }
  int sites() const noexcept { return sites_; }

  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<double>& raw_values() const noexcept { return raw_; }

  /// V between sites i and j (ring distance only).
  double at(int i, int j) const noexcept;
  /// M x M matrix of V(dist(i, j)).
  RMat pair_matrix() const;
  bool is_zero() const noexcept;
  double max_abs() const noexcept;
  /// Short tag used in report keys, e.g. "soft-coulomb(v0=5,a=0.5)".
  std::string tag() const;

 private:
  friend PotentialSpec regularize(const PotentialSpec& p, double alpha);
  PotentialFamily family_ = PotentialFamily::Zero;
  double v0_ = 0.0;
  double width_ = 0.0;
  std::optional<double> alpha_;
  int sites_ = 0;
  std::vector<double> raw_;
  std::vector<double> values_;
};

/// Pointwise sgn(V) min(|V|, 1/alpha).  Applies to the raw profile, so the
/// operation is idempotent and a later call replaces an earlier cutoff.
PotentialSpec regularize(const PotentialSpec& p, double alpha);

/// Smallest D with diag(V(dist(0, .)))^2 <= D (I + h0), to 1% relative
/// bisection tolerance (the returned value is the upper end of the bracket).
double certify_D(const PotentialSpec& p, const LatticeGrid& grid);

/// Ring convolution (V * rho)(i) = sum_j V(dist(i, j)) rho_j.
RVec ring_convolve(const PotentialSpec& p, const RVec& rho);

}  // namespace mflab::lattice
