#include "mflab/hartree.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "mflab/kernels.hpp"
#include "mflab/report.hpp"

namespace mflab::hartree {

const char* to_string(Scheme s) { return s == Scheme::Strang ? "strang" : "yoshida4"; }

Scheme scheme_from_string(const std::string& s) {
  if (s == "strang") return Scheme::Strang;
  if (s == "yoshida4") return Scheme::Yoshida4;
  throw std::invalid_argument("unknown Hartree scheme '" + s + "' (expected strang or yoshida4)");
}

double interaction_energy(const lattice::PotentialSpec& potential, const CVec& phi) {
  const RVec rho = phi.cwiseAbs2();
  return 0.5 * rho.dot(lattice::ring_convolve(potential, rho));
}

double energy(const lattice::LatticeGrid& grid, const lattice::PotentialSpec& potential, const CVec& phi) {
  const double kinetic = phi.dot(grid.laplacian() * phi).real();
  return kinetic + interaction_energy(potential, phi);
}

double max_stable_dt(const lattice::LatticeGrid& grid) { return 0.5 / grid.laplacian_norm(); }

namespace {

class Stepper {
 public:
  Stepper(const lattice::LatticeGrid& grid, const lattice::PotentialSpec& potential, double dt, Scheme scheme)
      : grid_(grid), potential_(potential), phase_(CVec(grid.sites())) {
    if (scheme == Scheme::Strang) {
      weights_ = {dt};
    } else {
      const double cbrt2 = std::cbrt(2.0);
      const double w1 = 1.0 / (2.0 - cbrt2);
      const double w0 = -cbrt2 / (2.0 - cbrt2);
      weights_ = {w1 * dt, w0 * dt, w1 * dt};
    }
    for (double h : weights_) kinetic_.push_back(kinetic_propagator(h));
  }

  void step(CVec& phi) {
    for (std::size_t s = 0; s < weights_.size(); ++s) {
      half_phase(phi, 0.5 * weights_[s]);
      phi = kinetic_[s] * phi;
      half_phase(phi, 0.5 * weights_[s]);
    }
  }

 private:
  CMat kinetic_propagator(double h) const {
    const RMat& q = grid_.laplacian_modes();
    const RVec& lam = grid_.laplacian_spectrum();
    CVec d(lam.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i) d(i) = std::exp(cplx(0.0, -lam(i) * h));
    return q.cast<cplx>() * d.asDiagonal() * q.transpose().cast<cplx>();
  }

  // |phi| is invariant under the phase step, so the mean field is exact here.
  void half_phase(CVec& phi, double tau) {
    if (potential_.is_zero()) return;
    const RVec field = lattice::ring_convolve(potential_, phi.cwiseAbs2());
    for (Eigen::Index i = 0; i < phi.size(); ++i) phase_(i) = std::exp(cplx(0.0, -field(i) * tau));
    simd::cmul_inplace({phase_.data(), std::size_t(phase_.size())}, {phi.data(), std::size_t(phi.size())});
  }

  const lattice::LatticeGrid& grid_;
  const lattice::PotentialSpec& potential_;
  std::vector<double> weights_;
  std::vector<CMat> kinetic_;
  CVec phase_;
};

void log_state(HartreeTrajectory& traj, const CVec& phi) {
  traj.log.norm.push_back(phi.norm());
  traj.log.energy.push_back(energy(traj.grid, traj.potential, phi));
  traj.log.h1.push_back(phi.squaredNorm() + phi.dot(traj.grid.laplacian() * phi).real());
}

}  // namespace

HartreeTrajectory solve(const CVec& phi0, const lattice::LatticeGrid& grid, const lattice::PotentialSpec& potential,
                        double dt, int steps, Scheme scheme) {
  if (phi0.size() != grid.sites()) throw std::invalid_argument("hartree::solve: phi0 has the wrong length");
  if (std::abs(phi0.norm() - 1.0) > 1e-10) throw std::invalid_argument("hartree::solve: phi0 must be normalized");
  if (steps < 0) throw std::invalid_argument("hartree::solve: negative step count");
  const double budget = max_stable_dt(grid);
  if (std::abs(dt) * grid.laplacian_norm() > 0.5 * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "hartree::solve: |dt| * ||h0|| = " << std::abs(dt) * grid.laplacian_norm()
       << " exceeds the stability budget 0.5; use |dt| <= " << budget;
    throw std::invalid_argument(os.str());
  }
  if (dt == 0.0 && steps > 0) throw std::invalid_argument("hartree::solve: dt must be nonzero");

  HartreeTrajectory traj;
  traj.grid = grid;
  traj.potential = potential;
  traj.dt = dt;
  traj.steps = steps;
  traj.scheme = scheme;
  traj.snapshots.reserve(std::size_t(steps) + 1);
  traj.snapshots.push_back(phi0);
  log_state(traj, phi0);

  Stepper stepper(traj.grid, traj.potential, dt, scheme);
  CVec phi = phi0;
  for (int k = 0; k < steps; ++k) {
    stepper.step(phi);
    traj.snapshots.push_back(phi);
    log_state(traj, phi);
  }
  return traj;
}

CVec HartreeTrajectory::at(double t) const {
  const double total = final_time();
  const double lo = std::min(0.0, total), hi = std::max(0.0, total);
  const double slack = 1e-9 * std::max(1.0, std::abs(dt));
  if (t < lo - slack || t > hi + slack) {
    std::ostringstream os;
    os << "trajectory covers [" << lo << ", " << hi << "], requested t = " << t;
    throw std::out_of_range(os.str());
  }
  if (steps == 0) return snapshots.front();
  const double x = std::clamp(t / dt, 0.0, double(steps));
  const int k = std::min(int(std::floor(x)), steps - 1);
  const double w = x - k;
  if (w < 1e-12) return snapshots[std::size_t(k)];
  if (w > 1.0 - 1e-12) return snapshots[std::size_t(k) + 1];
  return (1.0 - w) * snapshots[std::size_t(k)] + w * snapshots[std::size_t(k) + 1];
}

double HartreeTrajectory::energy_drift_rate() const {
  double worst = 0.0;
  for (double e : log.energy) worst = std::max(worst, std::abs(e - log.energy.front()));
  return worst / std::max(1.0, std::abs(final_time()));
}

double HartreeTrajectory::max_norm_error() const {
  double worst = 0.0;
  for (double n : log.norm) worst = std::max(worst, std::abs(n - 1.0));
  return worst;
}

RegularizedComparison compare_regularized(const CVec& phi0, const lattice::LatticeGrid& grid,
                                          const lattice::PotentialSpec& potential, double alpha, double final_time,
                                          double dt, Scheme scheme) {
  const int steps = final_time == 0.0 ? 0 : int(std::llround(final_time / dt));
  const auto raw = solve(phi0, grid, potential, dt, steps, scheme);
  const auto reg = solve(phi0, grid, lattice::regularize(potential, alpha), dt, steps, scheme);
  RegularizedComparison out;
  out.alpha = alpha;
  for (int k = 0; k <= steps; ++k) {
    const CVec& a = raw.snapshots[std::size_t(k)];
    const CVec& b = reg.snapshots[std::size_t(k)];
    const double d = (a - b).norm();
    out.times.push_back(k * dt);
    out.distance.push_back(d);
    out.max_distance = std::max(out.max_distance, d);
    // Rank-one projectors |u><u| and |w><w| differ by 2 sqrt(1 - |<u,w>|^2) in trace norm.
    // sqrt(1 - s^2) is the norm of the part of b orthogonal to a, which avoids cancellation.
    const cplx overlap = a.dot(b);
    const double s1 = std::min(1.0, std::abs(overlap));
    // Dividing by <a,a> makes identical trajectories give exactly zero.
    const double perp = (b - (overlap / a.dot(a)) * a).norm();
    const double gap1 = 2.0 * perp;
    const double gap2 = 2.0 * perp * std::sqrt(1.0 + s1 * s1);
    out.max_projector_gap[0] = std::max(out.max_projector_gap[0], gap1);
    out.max_projector_gap[1] = std::max(out.max_projector_gap[1], gap2);
    if (gap1 > 2.0 * d + 1e-12 || gap2 > 4.0 * d + 1e-12) out.projector_bound_holds = false;
  }
  return out;
}

void write_trajectory_csv(std::ostream& os, const HartreeTrajectory& traj, int stride) {
  os << "t,site,re,im\n";
  stride = std::max(1, stride);
  for (int k = 0; k <= traj.steps; k += stride) {
    const CVec& phi = traj.snapshots[std::size_t(k)];
    for (Eigen::Index i = 0; i < phi.size(); ++i) {
      os << report::fmt(k * traj.dt) << ',' << i << ',' << report::fmt(phi(i).real()) << ','
         << report::fmt(phi(i).imag()) << '\n';
    }
  }
}

void write_conserved_csv(std::ostream& os, const HartreeTrajectory& traj, int stride) {
  os << "t,norm,energy,h1\n";
  stride = std::max(1, stride);
  for (int k = 0; k <= traj.steps; k += stride) {
    const auto i = std::size_t(k);
    os << report::fmt(k * traj.dt) << ',' << report::fmt(traj.log.norm[i]) << ','
       << report::fmt(traj.log.energy[i]) << ',' << report::fmt(traj.log.h1[i]) << '\n';
  }
}

CVec uniform_state(int sites) { return CVec::Constant(sites, cplx(1.0 / std::sqrt(double(sites)), 0.0)); }

CVec gaussian_packet(int sites, double center, double width, double momentum) {
  if (width <= 0.0) throw std::invalid_argument("gaussian_packet: width must be positive");
  CVec phi(sites);
  for (int i = 0; i < sites; ++i) {
    double d = std::fmod(i - center, double(sites));
    if (d > 0.5 * sites) d -= sites;
    if (d < -0.5 * sites) d += sites;
    phi(i) = std::exp(-d * d / (2.0 * width * width)) * std::exp(cplx(0.0, momentum * i));
  }
  return phi / phi.norm();
}

}  // namespace mflab::hartree
