#include "mflab/manybody.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mflab/kernels.hpp"

namespace mflab::manybody {

BasisPtr sector_basis(int modes, int n) {
  return std::make_shared<const fock::FockBasis>(fock::FockBasis::single_sector(modes, n));
}

ManyBodyHamiltonian assemble(int particles, const lattice::LatticeGrid& grid, const lattice::PotentialSpec& potential,
                             std::size_t dimension_cap) {
  if (particles < 1) throw std::invalid_argument("assemble: N must be positive");
  const int m = grid.sites();
  if (potential.sites() != m) throw std::invalid_argument("assemble: potential and grid disagree on M");
  const std::uint64_t dim = fock::sector_dimension(m, particles);
  if (dim > dimension_cap) {
    std::ostringstream os;
    os << "sector dimension C(" << particles + m - 1 << "," << particles << ") = " << dim << " exceeds cap "
       << dimension_cap << "; try";
    for (int n = particles - 1; n >= 1; --n) {
      if (fock::sector_dimension(m, n) <= dimension_cap) {
        os << " N <= " << n << " at M = " << m;
        break;
      }
    }
    for (int mm = m - 1; mm >= 2; --mm) {
      if (fock::sector_dimension(mm, particles) <= dimension_cap) {
        os << " or M <= " << mm << " at N = " << particles;
        break;
      }
    }
    throw DimensionCapError(os.str(), dim);
  }

  ManyBodyHamiltonian h;
  h.basis = sector_basis(m, particles);
  h.particles = particles;
  h.coupling = 1.0 / particles;
  const auto& b = *h.basis;
  const RMat& h0 = grid.laplacian();
  const RMat v = potential.pair_matrix();
  h.matrix = RMat::Zero(Eigen::Index(b.size()), Eigen::Index(b.size()));

  std::vector<int> work(static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto occ = b.occupation(i);
    double diag = 0.0;
    for (int x = 0; x < m; ++x) {
      const double nx = occ[std::size_t(x)];
      diag += h0(x, x) * nx;
      diag += 0.5 * h.coupling * v(x, x) * nx * (nx - 1.0);
      for (int y = 0; y < m; ++y) {
        if (y != x) diag += 0.5 * h.coupling * v(x, y) * nx * occ[std::size_t(y)];
      }
    }
    h.matrix(Eigen::Index(i), Eigen::Index(i)) = diag;
    // Hopping a*_x a_y, x != y.
    for (int y = 0; y < m; ++y) {
      if (occ[std::size_t(y)] == 0) continue;
      for (int x = 0; x < m; ++x) {
        if (x == y || h0(x, y) == 0.0) continue;
        std::copy(occ.begin(), occ.end(), work.begin());
        const double amp = std::sqrt(double(work[std::size_t(y)])) * std::sqrt(double(work[std::size_t(x)] + 1));
        --work[std::size_t(y)];
        ++work[std::size_t(x)];
        const std::size_t j = b.index_of(work);
        h.matrix(Eigen::Index(j), Eigen::Index(i)) += h0(x, y) * amp;
      }
    }
  }
  return h;
}

ExactPropagator::ExactPropagator(const ManyBodyHamiltonian& h) {
  Eigen::SelfAdjointEigenSolver<RMat> es(h.matrix);
  if (es.info() != Eigen::Success) {
    std::ostringstream os;
    os << "eigensolver failed for N=" << h.particles << " (dimension " << h.matrix.rows()
       << ", max |H_ij| = " << h.matrix.cwiseAbs().maxCoeff() << ")";
    throw Error(os.str());
  }
  energies_ = es.eigenvalues();
  modes_ = es.eigenvectors();
}

CVec ExactPropagator::propagate(const CVec& psi0, double t) const {
  const auto n = std::size_t(energies_.size());
  if (std::size_t(psi0.size()) != n) throw std::invalid_argument("propagate: state does not match Hamiltonian");
  if (t == 0.0) return psi0;  // exact identity, not a round trip through the eigenbasis
  const auto& k = simd::active();
  CVec coeff(psi0.size());
  k.real_gemv_t(modes_.data(), n, n, psi0.data(), coeff.data());
  for (Eigen::Index i = 0; i < coeff.size(); ++i) coeff(i) *= std::exp(cplx(0.0, -energies_(i) * t));
  CVec out(psi0.size());
  k.real_gemv(modes_.data(), n, n, coeff.data(), out.data());
  return out;
}

double ExactPropagator::energy(const CVec& psi) const {
  const auto n = std::size_t(energies_.size());
  CVec coeff(psi.size());
  simd::active().real_gemv_t(modes_.data(), n, n, psi.data(), coeff.data());
  return (coeff.cwiseAbs2().array() * energies_.array()).sum();
}

CVec propagate(const ManyBodyHamiltonian& h, const CVec& psi0, double t) {
  if (t == 0.0) return psi0;
  return ExactPropagator(h).propagate(psi0, t);
}

namespace {

// out[k] = a_k psi, living in the sector one below psi's.
std::vector<CVec> lower_all(const fock::FockState& psi, const fock::FockBasis& target) {
  const auto& b = psi.basis();
  const int m = b.modes();
  std::vector<CVec> out(std::size_t(m), CVec::Zero(Eigen::Index(target.size())));
  std::vector<int> work(static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < b.size(); ++i) {
    const cplx a = psi.amplitudes()(Eigen::Index(i));
    if (a == 0.0) continue;
    const auto occ = b.occupation(i);
    for (int k = 0; k < m; ++k) {
      if (occ[std::size_t(k)] == 0) continue;
      std::copy(occ.begin(), occ.end(), work.begin());
      --work[std::size_t(k)];
      out[std::size_t(k)](Eigen::Index(target.index_of(work))) += std::sqrt(double(occ[std::size_t(k)])) * a;
    }
  }
  return out;
}

fock::FockState wrap(const BasisPtr& basis, CVec v) { return fock::FockState(basis, std::move(v)); }

}  // namespace

ReducedDensity reduce(const fock::FockState& psi, int k) {
  const auto& b = psi.basis();
  if (b.n_min() != b.n_max()) throw std::invalid_argument("reduce: state must live in a single N sector");
  const int n = b.n_max();
  const int m = b.modes();
  if (k < 1 || k > 2) throw std::invalid_argument("reduce: only k = 1, 2 are supported");
  if (k > n) throw std::invalid_argument("reduce: k exceeds particle number");

  ReducedDensity rd;
  rd.order = k;
  rd.source_norm = psi.norm();
  auto lower1 = sector_basis(m, n - 1);
  const auto u = lower_all(psi, *lower1);
  if (k == 1) {
    rd.matrix.resize(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) rd.matrix(i, j) = u[std::size_t(j)].dot(u[std::size_t(i)]) / double(n);
    return rd;
  }
  auto lower2 = sector_basis(m, n - 2);
  // w[i*M + j] = a_i a_j psi
  std::vector<CVec> w(static_cast<std::size_t>(m * m));
  for (int j = 0; j < m; ++j) {
    const auto aa = lower_all(wrap(lower1, u[std::size_t(j)]), *lower2);
    for (int i = 0; i < m; ++i) w[std::size_t(i * m + j)] = aa[std::size_t(i)];
  }
  const double norm = double(n) * double(n - 1);
  rd.matrix.resize(m * m, m * m);
  for (int r = 0; r < m * m; ++r)
    for (int c = 0; c < m * m; ++c) rd.matrix(r, c) = w[std::size_t(c)].dot(w[std::size_t(r)]) / norm;
  return rd;
}

CMat projector(const CVec& phi) { return phi * phi.adjoint(); }

CMat projector_tensor2(const CVec& phi) {
  const Eigen::Index m = phi.size();
  CVec pp(m * m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) pp(i * m + j) = phi(i) * phi(j);
  return pp * pp.adjoint();
}

double trace_distance(const CMat& a, const CMat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols()) {
    throw std::invalid_argument("trace_distance: shape mismatch");
  }
  const CMat d = a - b;
  const double scale = std::max({1.0, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
  if ((a - a.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale ||
      (b - b.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("trace_distance: input is not Hermitian");
  }
  const CMat herm = 0.5 * (d + d.adjoint());
  Eigen::SelfAdjointEigenSolver<CMat> es(herm, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum();
}

RegularizationGap regularization_gap(int particles, const lattice::LatticeGrid& grid,
                                     const lattice::PotentialSpec& potential, double alpha, double t,
                                     const CVec& phi, std::size_t dimension_cap) {
  const auto h = assemble(particles, grid, potential, dimension_cap);
  const auto h_reg = assemble(particles, grid, lattice::regularize(potential, alpha), dimension_cap);
  const CVec psi0 = fock::product_state(h.basis, phi, particles).amplitudes();
  RegularizationGap g;
  if (h.matrix == h_reg.matrix || t == 0.0) {
    g.gap2 = 0.0;
  } else {
    const CVec psi = propagate(h, psi0, t);
    const CVec psi_reg = propagate(h_reg, psi0, t);
    g.gap2 = (psi - psi_reg).squaredNorm();
  }
  g.reference = particles * alpha * std::abs(t);
  g.ratio = g.reference > 0.0 ? g.gap2 / g.reference : 0.0;
  return g;
}

MarginalGap marginal_gap(const fock::FockState& psi, const fock::FockState& psi_reg, int k) {
  if (psi.basis_ptr() != psi_reg.basis_ptr() && psi.basis().size() != psi_reg.basis().size()) {
    throw std::invalid_argument("marginal_gap: states live in different sectors");
  }
  MarginalGap g;
  g.trace_gap = trace_distance(reduce(psi, k).matrix, reduce(psi_reg, k).matrix);
  g.bound = 2.0 * (psi.amplitudes() - psi_reg.amplitudes()).norm();
  g.holds = g.trace_gap <= g.bound + 1e-12;
  return g;
}

}  // namespace mflab::manybody
