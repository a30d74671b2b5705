#include "mflab/fluctuation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mflab::fluctuation {

double FluctuationGenerator::cubic_scale() const { return 1.0 / std::sqrt(double(particles)); }
double FluctuationGenerator::quartic_scale() const { return 1.0 / double(particles); }

FluctuationGenerator make_generator(const lattice::LatticeGrid& grid, const lattice::PotentialSpec& potential,
                                    const CVec& phi, double t, int particles) {
  if (particles < 1) throw std::invalid_argument("make_generator: N must be positive");
  const int m = grid.sites();
  FluctuationGenerator g;
  g.t = t;
  g.particles = particles;
  g.phi = phi;
  g.pair = potential.pair_matrix();
  g.h0 = grid.laplacian();
  const RVec field = lattice::ring_convolve(potential, phi.cwiseAbs2());
  g.h = g.h0.cast<cplx>();
  g.pairing.resize(m, m);
  for (int i = 0; i < m; ++i) {
    g.h(i, i) += field(i);
    for (int j = 0; j < m; ++j) {
      g.h(i, j) += g.pair(i, j) * phi(i) * std::conj(phi(j));
      g.pairing(i, j) = g.pair(i, j) * phi(i) * phi(j);
    }
  }
  return g;
}

GeneratorSeries::GeneratorSeries(std::shared_ptr<const hartree::HartreeTrajectory> traj, int particles)
    : traj_(std::move(traj)), particles_(particles) {
  if (!traj_) throw std::invalid_argument("GeneratorSeries: null trajectory");
  if (particles_ < 1) throw std::invalid_argument("GeneratorSeries: N must be positive");
}

FluctuationGenerator GeneratorSeries::at(double t) const {
  return make_generator(traj_->grid, traj_->potential, traj_->at(t), t, particles_);
}

GeneratorSeries build_generators(const hartree::HartreeTrajectory& traj, int particles) {
  if (traj.dt <= 0.0) throw std::invalid_argument("build_generators: trajectory must run forward in time");
  return GeneratorSeries(std::make_shared<const hartree::HartreeTrajectory>(traj), particles);
}

// --- Bogoliubov fast path -----------------------------------------------------
//
// With a_k(t) = U2^* a_k U2 = sum_j P_kj a_j + Q_kj a*_j, the Heisenberg
// equation d/dt a_k(t) = U2^* i[L2(t), a_k] U2 and
//   [L2, a_k] = -sum_j h_kj a_j - 2 sum_j K2_kj a*_j
// give
//   i dP/dt = h P + 2 K2 conj(Q),   i dQ/dt = h Q + 2 K2 conj(P).
// a(f) = sum_k conj(f_k) a_k(t) = a(P^* f) + a*(Q^T conj(f)), so U = P^*, V = Q^T.

namespace {

struct Coefficients {
  CMat p, q;
};

Coefficients rhs(const FluctuationGenerator& g, const Coefficients& c) {
  return {-kI * (g.h * c.p + 2.0 * g.pairing * c.q.conjugate()), -kI * (g.h * c.q + 2.0 * g.pairing * c.p.conjugate())};
}

Coefficients axpy(const Coefficients& x, double s, const Coefficients& k) { return {x.p + s * k.p, x.q + s * k.q}; }

double ccr_residual_pq(const CMat& p, const CMat& q) {
  const Eigen::Index m = p.rows();
  const double normal = (p * p.adjoint() - q * q.adjoint() - CMat::Identity(m, m)).cwiseAbs().maxCoeff();
  const double anomalous = (p * q.transpose() - q * p.transpose()).cwiseAbs().maxCoeff();
  return std::max(normal, anomalous);
}

constexpr double kMaxCoefficientPhase = 0.005;

int step_count(double span, double dt) { return std::max(1, int(std::ceil(std::abs(span) / dt - 1e-9))); }

}  // namespace

double ccr_residual(const CMat& u, const CMat& v) { return ccr_residual_pq(u.adjoint(), v.transpose()); }

QuadraticPropagator propagate_quadratic(const GeneratorSeries& gens, double t) {
  if (t < 0.0 || t > gens.final_time() * (1.0 + 1e-12)) {
    throw std::out_of_range("propagate_quadratic: t outside the generator range");
  }
  const int m = gens.modes();
  Coefficients c{CMat::Identity(m, m), CMat::Zero(m, m)};
  QuadraticPropagator out;
  out.times.push_back(0.0);
  out.u.push_back(c.p.adjoint());
  out.v.push_back(c.q.transpose());
  if (t == 0.0) return out;

  // Substeps keep |h| * ||generator|| at or below kMaxCoefficientPhase.
  const int steps = step_count(t, gens.dt());
  const auto g_start = gens.at(0.0);
  const double gen_norm = g_start.h.cwiseAbs().rowwise().sum().maxCoeff() +
                          2.0 * g_start.pairing.cwiseAbs().rowwise().sum().maxCoeff();
  const int sub = std::max(1, int(std::ceil(t / steps * gen_norm / kMaxCoefficientPhase)));
  const double h = t / steps;
  const double hs = h / sub;
  for (int s = 0; s < steps; ++s) {
    const double t0 = s * h;
    for (int r = 0; r < sub; ++r) {
      const double ts = t0 + r * hs;
      const auto g0 = gens.at(ts);
      const auto gm = gens.at(ts + 0.5 * hs);
      const auto g1 = gens.at(std::min(t, ts + hs));
      const auto k1 = rhs(g0, c);
      const auto k2 = rhs(gm, axpy(c, 0.5 * hs, k1));
      const auto k3 = rhs(gm, axpy(c, 0.5 * hs, k2));
      const auto k4 = rhs(g1, axpy(c, hs, k3));
      c.p += (hs / 6.0) * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
      c.q += (hs / 6.0) * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q);
    }

    const double res = ccr_residual_pq(c.p, c.q);
    out.max_ccr_residual = std::max(out.max_ccr_residual, res);
    if (res > 1e-6) {
      std::ostringstream os;
      os << "propagate_quadratic: CCR residual " << res << " at t = " << t0 + h << " (step " << h
         << "); refine the Hartree time step";
      throw Error(os.str());
    }
    out.times.push_back(t0 + h);
    out.u.push_back(c.p.adjoint());
    out.v.push_back(c.q.transpose());
  }
  return out;
}

// --- truncated Fock space -----------------------------------------------------

namespace {

using Triplet = Eigen::Triplet<cplx>;

}  // namespace

FockOperators::FockOperators(fock::BasisPtr basis) : basis_(std::move(basis)), m_(basis_->modes()) {
  const auto& b = *basis_;
  const auto n = Eigen::Index(b.size());
  for (int k = 0; k < m_; ++k) {
    std::vector<Triplet> trips;
    for (std::size_t i = 0; i < b.size(); ++i) {
      const std::size_t j = b.lowered(i, k);
      if (j == fock::npos) continue;
      trips.emplace_back(Eigen::Index(j), Eigen::Index(i), std::sqrt(double(b.occupation(i)[std::size_t(k)])));
    }
    SpMat a(n, n);
    a.setFromTriplets(trips.begin(), trips.end());
    ad_.push_back(SpMat(a.adjoint()));
    a_.push_back(std::move(a));
  }
  for (int x = 0; x < m_; ++x)
    for (int y = 0; y < m_; ++y) hop_.push_back(SpMat(ad_[std::size_t(x)] * a_[std::size_t(y)]));
  for (int x = 0; x < m_; ++x) {
    for (int y = x; y < m_; ++y) {
      pair_c_.push_back(SpMat(ad_[std::size_t(x)] * ad_[std::size_t(y)]));
      pair_a_.push_back(SpMat(a_[std::size_t(x)] * a_[std::size_t(y)]));
    }
  }
}

namespace {

// Position of (x, y), x <= y, in the packed pair list.
std::size_t pair_slot(int m, int x, int y) {
  if (x > y) std::swap(x, y);
  return std::size_t(x * m - x * (x - 1) / 2 + (y - x));
}

}  // namespace

SpMat FockOperators::number() const {
  const auto dim = static_cast<Eigen::Index>(size());
  SpMat out(dim, dim);
  for (int k = 0; k < m_; ++k) out += hop_[std::size_t(k * m_ + k)];
  return out;
}

SpMat FockOperators::second_quantized(const CMat& j) const {
  const auto dim = static_cast<Eigen::Index>(size());
  SpMat out(dim, dim);
  for (int x = 0; x < m_; ++x)
    for (int y = 0; y < m_; ++y)
      if (j(x, y) != 0.0) out += j(x, y) * hop_[std::size_t(x * m_ + y)];
  return out;
}

SpMat FockOperators::pairing(const CMat& k) const {
  const auto dim = static_cast<Eigen::Index>(size());
  SpMat out(dim, dim);
  for (int x = 0; x < m_; ++x) {
    for (int y = x; y < m_; ++y) {
      const cplx c = x == y ? k(x, x) : k(x, y) + k(y, x);
      if (c == 0.0) continue;
      const auto s = pair_slot(m_, x, y);
      out += c * pair_c_[s] + std::conj(c) * pair_a_[s];
    }
  }
  return out;
}

SpMat FockOperators::quadratic(const FluctuationGenerator& g) const {
  return second_quantized(g.h) + pairing(g.pairing);
}

SpMat FockOperators::kinetic(const FluctuationGenerator& g) const { return second_quantized(g.h0.cast<cplx>()); }

SpMat FockOperators::cubic(const FluctuationGenerator& g) const {
  const auto dim = static_cast<Eigen::Index>(size());
  SpMat out(dim, dim);
  for (int x = 0; x < m_; ++x) {
    for (int y = 0; y < m_; ++y) {
      const double v = g.pair(x, y);
      if (v == 0.0) continue;
      const auto s = pair_slot(m_, x, y);
      // a*_x a*_y a_x and a*_x a_y a_x
      out += (v * g.phi(y)) * SpMat(pair_c_[s] * a_[std::size_t(x)]);
      out += (v * std::conj(g.phi(y))) * SpMat(ad_[std::size_t(x)] * pair_a_[s]);
    }
  }
  return g.cubic_scale() * out;
}

SpMat FockOperators::quartic(const FluctuationGenerator& g) const {
  const auto dim = static_cast<Eigen::Index>(size());
  SpMat out(dim, dim);
  for (int x = 0; x < m_; ++x) {
    for (int y = 0; y < m_; ++y) {
      const double v = g.pair(x, y);
      if (v == 0.0) continue;
      const auto s = pair_slot(m_, x, y);
      out += cplx(v) * SpMat(pair_c_[s] * pair_a_[s]);
    }
  }
  return g.quartic_scale() * out;
}

void FockOperators::apply_quadratic(const FluctuationGenerator& g, const CVec& in, CVec& out) const {
  out.setZero(in.size());
  for (int x = 0; x < m_; ++x)
    for (int y = 0; y < m_; ++y)
      if (g.h(x, y) != 0.0) out.noalias() += g.h(x, y) * (hop_[std::size_t(x * m_ + y)] * in);
  for (int x = 0; x < m_; ++x) {
    for (int y = x; y < m_; ++y) {
      const cplx c = x == y ? g.pairing(x, x) : g.pairing(x, y) + g.pairing(y, x);
      if (c == 0.0) continue;
      const auto s = pair_slot(m_, x, y);
      out.noalias() += c * (pair_c_[s] * in);
      out.noalias() += std::conj(c) * (pair_a_[s] * in);
    }
  }
}

double FockOperators::quadratic_norm_bound(const FluctuationGenerator& g) const {
  const double hn = g.h.cwiseAbs().rowwise().sum().maxCoeff();
  const double kn = g.pairing.cwiseAbs().rowwise().sum().maxCoeff();
  const double top = basis_->n_max();
  return hn * top + 2.0 * kn * (top + 2.0);
}

CMat full_generator_direct(const fock::FockBasis& basis, const FluctuationGenerator& g) {
  // A word is applied right to left; entries are (mode, is_creator).
  struct Term {
    cplx coeff;
    std::vector<std::pair<int, bool>> word;
  };
  const int m = basis.modes();
  const RVec field = g.pair * g.phi.cwiseAbs2();
  const double s3 = g.cubic_scale(), s4 = g.quartic_scale();
  std::vector<Term> terms;
  for (int x = 0; x < m; ++x) {
    terms.push_back({field(x), {{x, true}, {x, false}}});
    for (int y = 0; y < m; ++y) {
      const double v = g.pair(x, y);
      if (g.h0(x, y) != 0.0) terms.push_back({g.h0(x, y), {{x, true}, {y, false}}});
      if (v == 0.0) continue;
      terms.push_back({v * g.phi(x) * std::conj(g.phi(y)), {{x, true}, {y, false}}});
      terms.push_back({v * g.phi(x) * g.phi(y), {{x, true}, {y, true}}});
      terms.push_back({v * std::conj(g.phi(x) * g.phi(y)), {{x, false}, {y, false}}});
      terms.push_back({s3 * v * g.phi(y), {{x, true}, {y, true}, {x, false}}});
      terms.push_back({s3 * v * std::conj(g.phi(y)), {{x, true}, {y, false}, {x, false}}});
      terms.push_back({s4 * v, {{x, true}, {y, true}, {y, false}, {x, false}}});
    }
  }

  const auto n = Eigen::Index(basis.size());
  CMat out = CMat::Zero(n, n);
  std::vector<int> occ(std::size_t(m), 0);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    for (const auto& term : terms) {
      const auto src = basis.occupation(i);
      std::copy(src.begin(), src.end(), occ.begin());
      int total = basis.sector_of(i);
      double amp = 1.0;
      bool alive = true;
      for (auto it = term.word.rbegin(); it != term.word.rend() && alive; ++it) {
        auto& nk = occ[std::size_t(it->first)];
        if (it->second) {
          ++nk;
          ++total;
          amp *= std::sqrt(double(nk));
          alive = total <= basis.n_max();
        } else {
          alive = nk > 0;
          if (alive) amp *= std::sqrt(double(nk--));
          --total;
        }
      }
      if (!alive) continue;
      out(Eigen::Index(basis.index_of(occ)), Eigen::Index(i)) += term.coeff * amp;
    }
  }
  return out;
}

fock::FockState propagate_quadratic_fock(const GeneratorSeries& gens, const FockOperators& ops,
                                         const fock::FockState& psi0, double t_from, double t_to,
                                         const FlowOptions& opts, const FlowObserver& observer) {
  if (psi0.basis_ptr() != ops.basis_ptr() && psi0.basis().size() != ops.size()) {
    throw std::invalid_argument("propagate_quadratic_fock: state and operators use different bases");
  }
  const double span = t_to - t_from;
  const int steps = span == 0.0 ? 0 : step_count(span, gens.dt());
  const double h = steps ? span / steps : 0.0;
  CVec psi = psi0.amplitudes();
  fock::FockState state(ops.basis_ptr(), psi, psi0.leak());
  if (observer) observer(t_from, state);
  if (steps == 0) return state;

  const double bound = ops.quadratic_norm_bound(gens.at(t_from));
  const int sub = std::max(1, int(std::ceil(std::abs(h) * bound / opts.max_substep_phase)));
  const double hs = h / sub;
  CVec k1(psi.size()), k2(psi.size()), k3(psi.size()), k4(psi.size()), tmp(psi.size());
  double worst_leak = 0.0;
  for (int s = 0; s < steps; ++s) {
    for (int r = 0; r < sub; ++r) {
      const double t0 = t_from + s * h + r * hs;
      const auto g0 = gens.at(t0);
      const auto gm = gens.at(t0 + 0.5 * hs);
      const auto g1 = gens.at(t0 + hs);
      ops.apply_quadratic(g0, psi, k1);
      k1 *= -kI;
      tmp = psi + (0.5 * hs) * k1;
      ops.apply_quadratic(gm, tmp, k2);
      k2 *= -kI;
      tmp = psi + (0.5 * hs) * k2;
      ops.apply_quadratic(gm, tmp, k3);
      k3 *= -kI;
      tmp = psi + hs * k3;
      ops.apply_quadratic(g1, tmp, k4);
      k4 *= -kI;
      psi += (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    state.amplitudes() = psi;
    const double leak = state.truncation_leak() / std::max(1e-300, state.norm2());
    worst_leak = std::max(worst_leak, leak);
    if (leak > opts.leak_threshold) {
      std::ostringstream os;
      os << "quadratic flow: mass " << leak << " on the top two sectors at t = " << t_from + (s + 1) * h
         << " exceeds " << opts.leak_threshold << "; raise n_max above " << ops.basis().n_max();
      throw HeadroomError(os.str(), ops.basis().n_max() + 4);
    }
    if (observer) observer(t_from + (s + 1) * h, state);
  }
  state.set_leak(psi0.leak() + worst_leak);
  return state;
}

std::pair<CMat, CMat> bogoliubov_from_fock(const GeneratorSeries& gens, const FockOperators& ops, double t,
                                           const FlowOptions& opts) {
  const int m = gens.modes();
  const auto omega = fock::vacuum(ops.basis_ptr());
  const CVec u_omega = propagate_quadratic_fock(gens, ops, omega, 0.0, t, opts).amplitudes();
  CMat p(m, m), q(m, m);
  for (int mm = 0; mm < m; ++mm) {
    const fock::FockState one(ops.basis_ptr(), ops.creator(mm) * omega.amplitudes());
    const CVec u_one = propagate_quadratic_fock(gens, ops, one, 0.0, t, opts).amplitudes();
    for (int k = 0; k < m; ++k) {
      p(k, mm) = u_omega.dot(ops.annihilator(k) * u_one);
      q(k, mm) = u_one.dot(ops.annihilator(k) * u_omega);
    }
  }
  return {p.adjoint(), q.transpose()};
}

// --- property checks -------------------------------------------------------------

ParityReport check_pair_parity(const GeneratorSeries& gens, const FockOperators& ops, double t) {
  const auto psi = propagate_quadratic_fock(gens, ops, fock::vacuum(ops.basis_ptr()), 0.0, t);
  ParityReport r;
  const auto masses = psi.sector_masses();
  for (std::size_t n = 1; n < masses.size(); n += 2) r.odd_mass += masses[n];
  r.norm_error = std::abs(psi.norm() - 1.0);
  r.leak = psi.leak();
  return r;
}

SectorLocalityReport check_sector_locality(const GeneratorSeries& gens, const FockOperators& ops, const CVec& f,
                                           double t) {
  const auto forward = propagate_quadratic_fock(gens, ops, fock::vacuum(ops.basis_ptr()), 0.0, t);
  const auto kicked = fock::field_phi(f, forward);
  const auto back = propagate_quadratic_fock(gens, ops, kicked, t, 0.0);
  const auto masses = back.sector_masses();
  double total = 0.0;
  for (double x : masses) total += x;
  SectorLocalityReport r;
  r.t = t;
  r.off_sector_mass = total > 0.0 ? (total - (masses.size() > 1 ? masses[1] : 0.0)) / total : 0.0;
  r.leak = forward.leak() + kicked.leak() + back.leak();
  return r;
}

NumberGrowthReport check_number_growth(const GeneratorSeries& gens, const FockOperators& ops,
                                       const fock::FockState& psi0, int power, double final_time) {
  NumberGrowthReport r;
  r.power = power;
  const double base = psi0.number_norm(power, 1.0);
  const auto end = propagate_quadratic_fock(gens, ops, psi0, 0.0, final_time, {},
                                            [&](double t, const fock::FockState& s) {
                                              r.times.push_back(t);
                                              r.ratio.push_back(s.number_norm(power, 1.0) / base);
                                            });
  r.leak = end.leak();
  r.fit = fit::fit_growth(r.times, r.ratio);
  return r;
}

SandwichReport check_kinetic_sandwich(const GeneratorSeries& gens, const FockOperators& ops,
                                      const std::vector<double>& times) {
  if (ops.size() > 4000) throw std::invalid_argument("check_kinetic_sandwich: basis larger than 4000");
  SandwichReport r;
  RVec scale(Eigen::Index(ops.size()));
  for (std::size_t i = 0; i < ops.size(); ++i) scale(Eigen::Index(i)) = 1.0 / std::sqrt(ops.basis().sector_of(i) + 1.0);
  for (double t : times) {
    const auto g = gens.at(t);
    const CMat x = CMat(ops.quadratic(g) - ops.kinetic(g));
    const CMat y = scale.asDiagonal() * x * scale.asDiagonal();
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (y + y.adjoint()), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw Error("check_kinetic_sandwich: eigensolver failed");
    const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    r.times.push_back(t);
    r.c_minus.push_back(std::max(0.0, -lo));
    r.c_plus.push_back(std::max(0.0, hi));
    r.c.push_back(std::max(r.c_minus.back(), r.c_plus.back()));
  }
  if (!r.c.empty()) {
    r.c_max = *std::max_element(r.c.begin(), r.c.end());
    r.c_min = *std::min_element(r.c.begin(), r.c.end());
  }
  return r;
}

QuadraticExpectationReport check_quadratic_expectation(const GeneratorSeries& gens, const FockOperators& ops,
                                         const fock::FockState& psi0, double final_time) {
  QuadraticExpectationReport r;
  CVec work(Eigen::Index(ops.size()));
  const auto g0 = gens.at(0.0);
  ops.apply_quadratic(g0, psi0.amplitudes(), work);
  r.reference = psi0.amplitudes().dot(work).real() + psi0.number_moment(1) + psi0.norm2();
  const auto end = propagate_quadratic_fock(gens, ops, psi0, 0.0, final_time, {},
                                            [&](double t, const fock::FockState& s) {
                                              ops.apply_quadratic(gens.at(t), s.amplitudes(), work);
                                              r.times.push_back(t);
                                              r.expectation.push_back(s.amplitudes().dot(work).real());
                                            });
  r.leak = end.leak();
  std::vector<double> rel;
  for (double e : r.expectation) rel.push_back(std::abs(e) / r.reference);
  r.fit = fit::fit_growth(r.times, rel);
  for (std::size_t i = 0; i < rel.size(); ++i) {
    r.bound_constant = std::max(r.bound_constant, rel[i] * std::exp(-r.fit.k * r.times[i]));
  }
  return r;
}

CubicBoundReport check_cubic_bound(const GeneratorSeries& gens, const FockOperators& ops, const fock::FockState& psi,
                             double t, int power, const std::vector<int>& particles) {
  CubicBoundReport r;
  r.power = power;
  r.particles = particles;
  const double den = psi.number_norm(power + 1.5, 1.0);
  for (int n : particles) {
    const auto g = gens.with_particles(n).at(t);
    const fock::FockState out(ops.basis_ptr(), ops.cubic(g) * psi.amplitudes());
    const double ratio = den > 0.0 ? out.number_norm(power, 1.0) / den : 0.0;
    r.ratio.push_back(ratio);
    r.rescaled.push_back(std::sqrt(double(n)) * ratio);
  }
  if (!r.rescaled.empty()) {
    const auto [lo, hi] = std::minmax_element(r.rescaled.begin(), r.rescaled.end());
    r.spread = *hi > 0.0 ? (*hi - *lo) / *hi : 0.0;
  }
  return r;
}

double generator_reconstruction_residual(const GeneratorSeries& gens, const FockOperators& ops, double t) {
  const auto g = gens.at(t);
  const CMat composed = CMat(ops.quadratic(g) + ops.cubic(g) + ops.quartic(g));
  const CMat direct = full_generator_direct(ops.basis(), g);
  return (composed - direct).cwiseAbs().maxCoeff();
}

}  // namespace mflab::fluctuation
