#pragma once
// Discrete Hartree equation i d/dt phi = h0 phi + (V * |phi|^2) phi on the ring.

#include <iosfwd>
#include <vector>

#include "mflab/lattice.hpp"
#include "mflab/types.hpp"

namespace mflab::hartree {

/// Strang: half nonlinear phase, exact kinetic step, half nonlinear phase.
/// Yoshida4: the symmetric triple composition of Strang steps (order 4).
enum class Scheme { Strang, Yoshida4 };

const char* to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

struct ConservedLog {
  std::vector<double> norm;
  std::vector<double> energy;
  std::vector<double> h1;  // <phi, (I + h0) phi>
};

struct HartreeTrajectory {
  lattice::LatticeGrid grid{2, 1.0};
  lattice::PotentialSpec potential;
  double dt = 0.0;
  int steps = 0;
  Scheme scheme = Scheme::Strang;
  std::vector<CVec> snapshots;  // phi at t = k dt, k = 0..steps
  ConservedLog log;

  double final_time() const { return dt * steps; }
  const CVec& final_state() const { return snapshots.back(); }
  /// Linear interpolation between neighbouring snapshots.  Throws
  /// std::out_of_range outside [0, T] (or [T, 0] for backward runs).
  CVec at(double t) const;
  /// Largest |E(t) - E(0)| divided by max(T, 1).
  double energy_drift_rate() const;
  double max_norm_error() const;
};

/// E[phi] = <phi, h0 phi> + 1/2 sum_ij V(i - j) |phi_i|^2 |phi_j|^2
double energy(const lattice::LatticeGrid& grid, const lattice::PotentialSpec& potential, const CVec& phi);
/// 1/2 sum_ij V(i - j) |phi_i|^2 |phi_j|^2
double interaction_energy(const lattice::PotentialSpec& potential, const CVec& phi);

/// Largest |dt| allowed by the stability budget |dt| * ||h0|| <= 0.5.
double max_stable_dt(const lattice::LatticeGrid& grid);

/// dt may be negative (backward in time).  Throws std::invalid_argument on a
/// non-normalized phi0 or a dt outside the stability budget.
HartreeTrajectory solve(const CVec& phi0, const lattice::LatticeGrid& grid, const lattice::PotentialSpec& potential,
                        double dt, int steps, Scheme scheme = Scheme::Strang);

struct RegularizedComparison {
  double alpha = 0.0;
  std::vector<double> times;
  std::vector<double> distance;  // ||phi_t - phi~_t||
  double max_distance = 0.0;
  // Tr| |phi><phi|^{(x)k} - |phi~><phi~|^{(x)k} | <= 2k ||phi - phi~||, k = 1, 2
  double max_projector_gap[2] = {0.0, 0.0};
  bool projector_bound_holds = true;
};

RegularizedComparison compare_regularized(const CVec& phi0, const lattice::LatticeGrid& grid,
                                          const lattice::PotentialSpec& potential, double alpha, double final_time,
                                          double dt, Scheme scheme = Scheme::Strang);

/// Rows "t,site,re,im".
void write_trajectory_csv(std::ostream& os, const HartreeTrajectory& traj, int stride = 1);
/// Rows "t,norm,energy,h1".
void write_conserved_csv(std::ostream& os, const HartreeTrajectory& traj, int stride = 1);

/// Initial data helpers.
CVec uniform_state(int sites);
/// Normalized exp(-(x - center)^2 / (2 width^2) + i momentum x) on the ring,
/// x measured in lattice steps with the shortest ring distance to center.
CVec gaussian_packet(int sites, double center, double width, double momentum);

}  // namespace mflab::hartree
