#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "mflab/lattice.hpp"

using namespace mflab;
using namespace mflab::lattice;

TEST_CASE("ring Laplacian spectrum") {
  SUBCASE("M=4 gives {0, 2, 2, 4}") {
    const LatticeGrid g(4, 1.0);
    const RVec& ev = g.laplacian_spectrum();
    REQUIRE(ev.size() == 4);
    CHECK(ev(0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(ev(1) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(ev(2) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(ev(3) == doctest::Approx(4.0).epsilon(1e-14));
  }
  SUBCASE("circulant eigenvalues (2 - 2cos(2 pi k / M)) / dx^2") {
    for (int m : {2, 3, 5, 6, 9}) {
      const double dx = 0.7;
      const LatticeGrid g(m, dx);
      std::vector<double> expected;
      for (int k = 0; k < m; ++k) expected.push_back((2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * k / m)) / (dx * dx));
      std::sort(expected.begin(), expected.end());
      for (int k = 0; k < m; ++k) CHECK(std::abs(g.laplacian_spectrum()(k) - expected[std::size_t(k)]) < 1e-12);
    }
  }
  SUBCASE("h0 is symmetric and annihilates constants") {
    const LatticeGrid g(7, 1.3);
    CHECK((g.laplacian() - g.laplacian().transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((g.laplacian() * RVec::Ones(7)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("grid validation and distances") {
  CHECK_THROWS_AS(LatticeGrid(1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(LatticeGrid(4, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(LatticeGrid(4, -1.0), std::invalid_argument);
  const LatticeGrid g(6, 0.5);
  CHECK(g.ring_steps(0, 5) == 1);
  CHECK(g.ring_steps(1, 4) == 3);
  CHECK(g.ring_steps(2, 2) == 0);
  CHECK(g.distance(0, 4) == doctest::Approx(1.0));
}

TEST_CASE("potential families sample the profile by ring distance") {
  const LatticeGrid g(6, 1.0);
  const auto sc = PotentialSpec::soft_coulomb(g, 5.0, 0.5);
  for (int d = 0; d <= 3; ++d) CHECK(sc.values()[std::size_t(d)] == doctest::Approx(5.0 / std::sqrt(d * d + 0.25)));
  CHECK(sc.at(0, 5) == sc.at(0, 1));
  CHECK(sc.at(2, 5) == sc.at(0, 3));
  const auto ga = PotentialSpec::gaussian(g, 2.0, 1.5);
  CHECK(ga.values()[2] == doctest::Approx(2.0 * std::exp(-4.0 / (2.0 * 2.25))));
  CHECK(PotentialSpec::zero(g).is_zero());
  CHECK(PotentialSpec::constant(g, 0.3).pair_matrix().minCoeff() == doctest::Approx(0.3));
  CHECK_THROWS_AS(PotentialSpec::from_profile(g, {1.0, 2.0}), std::invalid_argument);
  CHECK(potential_family_from_string(to_string(PotentialFamily::SoftCoulomb)) == PotentialFamily::SoftCoulomb);
  CHECK_THROWS_AS(potential_family_from_string("yukawa"), std::invalid_argument);
}

TEST_CASE("regularize clips magnitude at 1/alpha and keeps the sign") {
  const LatticeGrid g(6, 1.0);
  const auto sc = PotentialSpec::soft_coulomb(g, 5.0, 0.1);  // V(0) = 50, V(1) ~ 4.975
  SUBCASE("alpha = 1 gives min(V, 1) everywhere") {
    const auto r = regularize(sc, 1.0);
    for (std::size_t d = 0; d < r.values().size(); ++d)
      CHECK(r.values()[d] == doctest::Approx(std::min(sc.values()[d], 1.0)));
  }
  SUBCASE("alpha = 0.1 only touches the on-site value") {
    const auto r = regularize(sc, 0.1);
    CHECK(r.values()[0] == doctest::Approx(10.0));
    for (std::size_t d = 1; d < r.values().size(); ++d) CHECK(r.values()[d] == sc.values()[d]);
  }
  SUBCASE("alpha below every threshold leaves V unchanged") {
    const auto r = regularize(sc, 1e-3);
    CHECK(r.values() == sc.values());
  }
  SUBCASE("negative potentials keep their sign") {
    const auto neg = PotentialSpec::from_profile(g, {-8.0, 3.0, -0.5, 0.1});
    const auto r = regularize(neg, 0.25);
    CHECK(r.values()[0] == doctest::Approx(-4.0));
    CHECK(r.values()[1] == doctest::Approx(3.0));
    CHECK(r.values()[2] == doctest::Approx(-0.5));
  }
  SUBCASE("idempotent and |V~| <= |V|") {
    const auto r1 = regularize(sc, 0.3);
    const auto r2 = regularize(r1, 0.3);
    CHECK(r1.values() == r2.values());
    for (std::size_t d = 0; d < r1.values().size(); ++d) CHECK(std::abs(r1.values()[d]) <= std::abs(sc.values()[d]));
  }
}

TEST_CASE("certify_D matches the generalized eigenvalue oracle") {
  // Oracle: the smallest D with diag(V^2) <= D (I + h0) is the largest
  // generalized eigenvalue of (diag(V^2), I + h0).
  for (int m : {3, 4, 6, 8}) {
    for (double a : {0.2, 0.5, 1.5}) {
      CAPTURE(m);
      CAPTURE(a);
      const LatticeGrid g(m, 1.0);
      const auto p = PotentialSpec::soft_coulomb(g, 2.0, a);
      RVec v2(m);
      for (int j = 0; j < m; ++j) v2(j) = p.at(0, j) * p.at(0, j);
      const RMat b = RMat::Identity(m, m) + g.laplacian();
      Eigen::GeneralizedSelfAdjointEigenSolver<RMat> es(RMat(v2.asDiagonal()), b);
      const double exact = es.eigenvalues().maxCoeff();
      const double d = certify_D(p, g);
      CHECK(d >= exact * (1.0 - 1e-10));
      CHECK(d <= exact * 1.0101);
    }
  }
  const LatticeGrid g(5, 1.0);
  CHECK(certify_D(PotentialSpec::zero(g), g) == 0.0);
}

TEST_CASE("ring convolution") {
  const LatticeGrid g(5, 1.0);
  const auto p = PotentialSpec::from_profile(g, {3.0, 1.0, 0.5});
  RVec rho(5);
  rho << 0.1, 0.2, 0.3, 0.15, 0.25;
  const RVec c = ring_convolve(p, rho);
  // site 0 sees sites 1 and 4 at one step, 2 and 3 at two steps.
  CHECK(c(0) == doctest::Approx(3.0 * 0.1 + 1.0 * (0.2 + 0.25) + 0.5 * (0.3 + 0.15)));
  CHECK(c(2) == doctest::Approx(3.0 * 0.3 + 1.0 * (0.2 + 0.15) + 0.5 * (0.1 + 0.25)));
}
