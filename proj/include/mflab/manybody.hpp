#pragma once
// Fixed-N sector dynamics: Hamiltonian assembly, exact propagation, reduced
// densities and trace-norm distances.

#include <cstddef>
#include <string>
#include <vector>

#include "mflab/fock.hpp"
#include "mflab/lattice.hpp"
#include "mflab/types.hpp"

namespace mflab::manybody {

using SectorBasis = fock::FockBasis;
using fock::BasisPtr;

inline constexpr std::size_t kDefaultDimensionCap = 20000;

/// Sector dimension C(N+M-1, N) exceeds the configured cap.
class DimensionCapError : public Error {
 public:
  DimensionCapError(const std::string& what, std::uint64_t dimension)
      : Error(what), dimension_(dimension) {}
  std::uint64_t dimension() const noexcept { return dimension_; }

 private:
  std::uint64_t dimension_;
};

BasisPtr sector_basis(int modes, int n);

/// H_N = dGamma(h0) + 1/(2N) sum_{x,y} V(x - y) a*_x a*_y a_y a_x on the N sector.
/// The x = y terms give the on-site V(0) n (n - 1) / (2N).
struct ManyBodyHamiltonian {
  BasisPtr basis;
  int particles = 0;
  double coupling = 0.0;  // 1/N
  RMat matrix;            // real symmetric
};

ManyBodyHamiltonian assemble(int particles, const lattice::LatticeGrid& grid, const lattice::PotentialSpec& potential,
                             std::size_t dimension_cap = kDefaultDimensionCap);

/// e^{-iHt} through a one-time eigendecomposition of H.
class ExactPropagator {
 public:
  explicit ExactPropagator(const ManyBodyHamiltonian& h);

  const RVec& energies() const noexcept { return energies_; }
  std::size_t dimension() const noexcept { return std::size_t(energies_.size()); }

  /// psi_t = V e^{-iEt} V^T psi0
  CVec propagate(const CVec& psi0, double t) const;
  /// <psi, H psi> from the spectral representation.
  double energy(const CVec& psi) const;

 private:
  RVec energies_;
  // Eigenvectors, row-major so both V x and V^T x stream contiguous rows.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> modes_;
};

/// Convenience wrapper: propagate(H, psi0, t) with a fresh eigendecomposition.
CVec propagate(const ManyBodyHamiltonian& h, const CVec& psi0, double t);

/// k-particle reduced density (k = 1 or 2) of a normalized N-sector state.
///   gamma1(i, j)      = <psi, a*_j a_i psi> / N
///   gamma2(ij, kl)    = <psi, a*_k a*_l a_j a_i psi> / (N (N - 1)),  index ij = i*M + j
struct ReducedDensity {
  int order = 1;
  CMat matrix;
  double source_norm = 1.0;
};

ReducedDensity reduce(const fock::FockState& psi, int k);

/// |phi><phi| and |phi><phi|^{(x)2} in the reduce() index convention.
CMat projector(const CVec& phi);
CMat projector_tensor2(const CVec& phi);

/// sum |eig(A - B)| (no factor 1/2).  Throws std::invalid_argument for
/// non-Hermitian input or mismatched shapes.
double trace_distance(const CMat& a, const CMat& b);

struct RegularizationGap {
  double gap2 = 0.0;       // ||psi_t - psi~_t||^2
  double reference = 0.0;  // N alpha |t|
  double ratio = 0.0;      // gap2 / reference (0 when reference is 0)
};

/// Propagates phi^{(x)N} under H_N (raw V) and H~_N (cutoff alpha) and compares.
RegularizationGap regularization_gap(int particles, const lattice::LatticeGrid& grid,
                                     const lattice::PotentialSpec& potential, double alpha, double t,
                                     const CVec& phi, std::size_t dimension_cap = kDefaultDimensionCap);

struct MarginalGap {
  double trace_gap = 0.0;  // Tr |gamma_k - gamma~_k|
  double bound = 0.0;      // 2 ||psi - psi~||
  bool holds = true;
};

MarginalGap marginal_gap(const fock::FockState& psi, const fock::FockState& psi_reg, int k);

}  // namespace mflab::manybody
