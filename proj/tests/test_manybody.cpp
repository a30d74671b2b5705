#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "mflab/hartree.hpp"
#include "mflab/manybody.hpp"

using namespace mflab;
using namespace mflab::manybody;
using lattice::LatticeGrid;
using lattice::PotentialSpec;

namespace {

CVec random_unit(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> d;
  CVec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = cplx(d(rng), d(rng));
  return v / v.norm();
}

fock::FockState sector_state(const BasisPtr& b, const CVec& v) { return fock::FockState(b, v); }

}  // namespace

TEST_CASE("assembly") {
  const LatticeGrid g(4, 1.0);
  const auto v = PotentialSpec::soft_coulomb(g, 2.0, 0.5);

  SUBCASE("N = 1 reduces to h0") {
    const auto h = assemble(1, g, v);
    REQUIRE(h.matrix.rows() == 4);
    // Single-particle basis (1,0,0,0), (0,1,0,0), ... is the site basis.
    CHECK((h.matrix - g.laplacian()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(h.coupling == 1.0);
  }
  SUBCASE("constant V on two sites: every two-particle state gets c/2") {
    const LatticeGrid g2(2, 1.0);
    const double c = 1.7;
    const auto hv = assemble(2, g2, PotentialSpec::constant(g2, c));
    const auto h0 = assemble(2, g2, PotentialSpec::zero(g2));
    const RMat inter = hv.matrix - h0.matrix;
    CHECK((inter - 0.5 * c * RMat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("symmetric to round-off") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const LatticeGrid g5(5, 1.0);
    const auto p = PotentialSpec::from_profile(g5, {u(rng), u(rng), u(rng)});
    const auto h = assemble(4, g5, p);
    CHECK((h.matrix - h.matrix.transpose()).cwiseAbs().maxCoeff() < 1e-13);
  }
  SUBCASE("V = 0 gives dGamma(h0): spectrum is sums of one-body energies") {
    const LatticeGrid g3(3, 1.0);
    const auto h = assemble(2, g3, PotentialSpec::zero(g3));
    Eigen::SelfAdjointEigenSolver<RMat> es(h.matrix);
    const RVec& e = g3.laplacian_spectrum();
    std::vector<double> expected;
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) expected.push_back(e(i) + e(j));
    std::sort(expected.begin(), expected.end());
    for (int k = 0; k < 6; ++k) CHECK(std::abs(es.eigenvalues()(k) - expected[std::size_t(k)]) < 1e-12);
  }
  SUBCASE("dimension cap") {
    CHECK_THROWS_AS(assemble(10, LatticeGrid(6, 1.0), PotentialSpec::zero(LatticeGrid(6, 1.0)), 1000),
                    DimensionCapError);
    try {
      assemble(10, LatticeGrid(6, 1.0), PotentialSpec::zero(LatticeGrid(6, 1.0)), 1000);
    } catch (const DimensionCapError& e) {
      CHECK(e.dimension() == 3003);
      CHECK(std::string(e.what()).find("N <= 7") != std::string::npos);
    }
  }
}

TEST_CASE("exact propagation") {
  std::mt19937_64 rng(8);
  const LatticeGrid g(4, 1.0);
  const auto v = PotentialSpec::soft_coulomb(g, 1.5, 0.7);
  const auto h = assemble(3, g, v);
  const ExactPropagator u(h);
  const CVec psi = random_unit(rng, h.matrix.rows());

  CHECK((u.propagate(psi, 0.0) - psi).norm() < 1e-13);
  for (double t : {0.3, 1.0, 2.5}) {
    const CVec pt = u.propagate(psi, t);
    CHECK(std::abs(pt.norm() - 1.0) < 1e-12);
    CHECK(std::abs(u.energy(pt) - u.energy(psi)) < 1e-10);
    CHECK((u.propagate(pt, -t) - psi).norm() < 1e-10);
  }
  // Against a dense matrix exponential.
  const CMat expm = (CMat(-kI * 0.8 * h.matrix.cast<cplx>())).exp();
  CHECK((u.propagate(psi, 0.8) - expm * psi).norm() < 1e-10);
  // The energy from the spectrum matches <psi, H psi>.
  CHECK(std::abs(u.energy(psi) - psi.dot(h.matrix.cast<cplx>() * psi).real()) < 1e-12);
}

TEST_CASE("reduced densities") {
  std::mt19937_64 rng(12);
  const int m = 3;
  SUBCASE("product state gives the rank-one projector") {
    const CVec phi = random_unit(rng, m);
    const auto b = sector_basis(m, 4);
    const auto psi = fock::product_state(b, phi, 4);
    const auto g1 = reduce(psi, 1);
    CHECK((g1.matrix - projector(phi)).cwiseAbs().maxCoeff() < 1e-13);
    const auto g2 = reduce(psi, 2);
    CHECK((g2.matrix - projector_tensor2(phi)).cwiseAbs().maxCoeff() < 1e-13);
  }
  SUBCASE("symmetrized e1 e2 gives half the identity on their span") {
    const auto b = sector_basis(m, 2);
    const std::vector<int> occ{1, 1, 0};
    const auto psi = fock::occupation_state(b, occ);
    const auto g1 = reduce(psi, 1);
    CMat expected = CMat::Zero(m, m);
    expected(0, 0) = expected(1, 1) = 0.5;
    CHECK((g1.matrix - expected).cwiseAbs().maxCoeff() < 1e-14);
    // gamma2 = projector on the symmetric vector (e1e2 + e2e1)/sqrt(2)
    CVec sym = CVec::Zero(m * m);
    sym(0 * m + 1) = sym(1 * m + 0) = 1.0 / std::sqrt(2.0);
    CHECK((reduce(psi, 2).matrix - sym * sym.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("random states: trace one, Hermitian, PSD") {
    const auto b = sector_basis(m, 5);
    const auto psi = sector_state(b, random_unit(rng, Eigen::Index(b->size())));
    for (int k : {1, 2}) {
      const auto r = reduce(psi, k);
      CHECK(std::abs(r.matrix.trace() - 1.0) < 1e-12);
      CHECK((r.matrix - r.matrix.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
      Eigen::SelfAdjointEigenSolver<CMat> es(r.matrix);
      CHECK(es.eigenvalues().minCoeff() > -1e-10);
    }
    // gamma1 is the partial trace of gamma2
    const CMat g2 = reduce(psi, 2).matrix, g1 = reduce(psi, 1).matrix;
    CMat partial = CMat::Zero(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int l = 0; l < m; ++l) partial(i, j) += g2(i * m + l, j * m + l);
    CHECK((partial - g1).cwiseAbs().maxCoeff() < 1e-13);
  }
  SUBCASE("k > N is rejected") {
    const auto b = sector_basis(m, 1);
    CHECK_THROWS_AS(reduce(fock::product_state(b, random_unit(rng, m), 1), 2), std::invalid_argument);
  }
}

TEST_CASE("trace distance") {
  std::mt19937_64 rng(5);
  const CVec a = random_unit(rng, 4), b = random_unit(rng, 4);
  CHECK(trace_distance(projector(a), projector(a)) < 1e-14);
  CVec e0 = CVec::Zero(4), e1 = CVec::Zero(4);
  e0(0) = 1.0;
  e1(1) = 1.0;
  CHECK(trace_distance(projector(e0), projector(e1)) == doctest::Approx(2.0));
  const double s = std::abs(a.dot(b));
  CHECK(std::abs(trace_distance(projector(a), projector(b)) - 2.0 * std::sqrt(1.0 - s * s)) < 1e-12);
  const CVec c = random_unit(rng, 4);
  const double ab = trace_distance(projector(a), projector(b));
  CHECK(ab == doctest::Approx(trace_distance(projector(b), projector(a))));
  CHECK(ab <= trace_distance(projector(a), projector(c)) + trace_distance(projector(c), projector(b)) + 1e-12);
  CMat bad = CMat::Zero(2, 2);
  bad(0, 1) = 1.0;
  CHECK_THROWS_AS(trace_distance(bad, CMat::Zero(2, 2)), std::invalid_argument);
  CHECK_THROWS_AS(trace_distance(CMat::Zero(2, 2), CMat::Zero(3, 3)), std::invalid_argument);
}

TEST_CASE("noninteracting dynamics stays factorized") {
  const LatticeGrid g(5, 1.0);
  const CVec phi = hartree::gaussian_packet(5, 1.0, 1.0, 0.4);
  const auto h = assemble(4, g, PotentialSpec::zero(g));
  const auto psi0 = fock::product_state(h.basis, phi, 4);
  const CMat u1 = (CMat(-kI * 1.3 * g.laplacian().cast<cplx>())).exp();
  const auto psi_t = fock::FockState(h.basis, propagate(h, psi0.amplitudes(), 1.3));
  CHECK(trace_distance(reduce(psi_t, 1).matrix, projector(u1 * phi)) < 1e-10);
  CHECK(psi_t.number_moment(1) == doctest::Approx(4.0));
}

TEST_CASE("mean-field energy identity for product states") {
  // <phi^N, H_N phi^N> / N = <phi, h0 phi> + (1 - 1/N) (interaction functional)
  const LatticeGrid g(4, 1.0);
  const auto v = PotentialSpec::soft_coulomb(g, 1.2, 0.6);
  const CVec phi = hartree::gaussian_packet(4, 0.5, 0.8, 0.9);
  for (int n : {1, 2, 5}) {
    const auto h = assemble(n, g, v);
    const CVec psi = fock::product_state(h.basis, phi, n).amplitudes();
    const double lhs = psi.dot(h.matrix.cast<cplx>() * psi).real() / n;
    const double kinetic = phi.dot(g.laplacian().cast<cplx>() * phi).real();
    const double rhs = kinetic + (1.0 - 1.0 / n) * hartree::interaction_energy(v, phi);
    CHECK(std::abs(lhs - rhs) < 1e-12);
  }
}

TEST_CASE("regularization gap") {
  const LatticeGrid g(4, 1.0);
  const auto v = PotentialSpec::soft_coulomb(g, 2.0, 0.5);  // V(0) = 4
  const CVec phi = hartree::gaussian_packet(4, 0.0, 0.8, 0.3);
  CHECK(regularization_gap(3, g, v, 0.1, 1.0, phi).gap2 == 0.0);   // 1/alpha above max V
  CHECK(regularization_gap(3, g, v, 0.5, 0.0, phi).gap2 == 0.0);   // t = 0
  const auto r = regularization_gap(3, g, v, 0.5, 1.0, phi);
  CHECK(r.gap2 > 0.0);
  CHECK(r.reference == doctest::Approx(1.5));
}

TEST_CASE("marginal gap duality bound") {
  std::mt19937_64 rng(31);
  const auto b = sector_basis(3, 4);
  const auto n = Eigen::Index(b->size());
  const CVec base = random_unit(rng, n);
  const fock::FockState psi(b, base);
  CHECK(marginal_gap(psi, psi, 1).trace_gap < 1e-13);
  for (double eps : {1e-3, 1e-1, 0.5}) {
    CVec pert = base + eps * random_unit(rng, n);
    pert /= pert.norm();
    const fock::FockState other(b, pert);
    for (int k : {1, 2}) {
      const auto mg = marginal_gap(psi, other, k);
      CHECK(mg.holds);
      CHECK(mg.trace_gap <= mg.bound + 1e-12);
    }
  }
  // Orthogonal states stay within the norm bound.
  const std::vector<int> o1{4, 0, 0}, o2{0, 4, 0};
  const auto g = marginal_gap(fock::occupation_state(b, o1), fock::occupation_state(b, o2), 1);
  CHECK(g.trace_gap <= 2.0 + 1e-12);
}
