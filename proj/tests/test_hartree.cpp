#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "mflab/hartree.hpp"

using namespace mflab;
using namespace mflab::hartree;
using lattice::LatticeGrid;
using lattice::PotentialSpec;

TEST_CASE("free evolution is exact") {
  const LatticeGrid g(6, 1.0);
  const CVec phi0 = gaussian_packet(6, 2.0, 1.0, 0.7);
  const auto traj = solve(phi0, g, PotentialSpec::zero(g), 1e-2, 100);
  const CMat u = (CMat(-kI * 1.0 * g.laplacian().cast<cplx>())).exp();
  CHECK((traj.final_state() - u * phi0).norm() < 1e-12);
}

TEST_CASE("uniform state is stationary up to a phase") {
  const LatticeGrid g(5, 1.0);
  const auto v = PotentialSpec::soft_coulomb(g, 3.0, 0.5);
  const CVec phi0 = uniform_state(5);
  const auto traj = solve(phi0, g, v, 1e-2, 200);
  const CVec& phi = traj.final_state();
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(std::abs(std::abs(phi(i)) - 1.0 / std::sqrt(5.0)) < 1e-12);
  // The phase is e^{-i mu t} with mu = sum_j V(dist(0, j)) / M.
  double mu = 0.0;
  for (int j = 0; j < 5; ++j) mu += v.at(0, j) / 5.0;
  CHECK(std::abs(phi(0) / phi0(0) - std::exp(cplx(0.0, -mu * 2.0))) < 1e-12);
}

TEST_CASE("conservation and splitting order") {
  const LatticeGrid g(6, 1.0);
  const auto v = PotentialSpec::soft_coulomb(g, 2.0, 0.5);
  const CVec phi0 = gaussian_packet(6, 1.0, 1.0, 0.5);
  const auto coarse = solve(phi0, g, v, 0.02, 50);
  const auto fine = solve(phi0, g, v, 0.01, 100);
  CHECK(coarse.max_norm_error() < 1e-12);
  const double ratio = coarse.energy_drift_rate() / fine.energy_drift_rate();
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);

  const auto y_coarse = solve(phi0, g, v, 0.02, 50, Scheme::Yoshida4);
  const auto y_fine = solve(phi0, g, v, 0.01, 100, Scheme::Yoshida4);
  const double y_ratio = y_coarse.energy_drift_rate() / y_fine.energy_drift_rate();
  CHECK(y_ratio > 12.0);
  CHECK(y_ratio < 20.0);
  // Both schemes converge to the same trajectory.
  CHECK((fine.final_state() - y_fine.final_state()).norm() < 1e-3);
}

TEST_CASE("time reversal round trip") {
  const LatticeGrid g(6, 1.0);
  const auto v = PotentialSpec::soft_coulomb(g, 2.0, 0.5);
  const CVec phi0 = gaussian_packet(6, 1.0, 1.0, 0.5);
  for (Scheme s : {Scheme::Strang, Scheme::Yoshida4}) {
    const auto fwd = solve(phi0, g, v, 1e-3, 1000, s);
    const auto back = solve(fwd.final_state(), g, v, -1e-3, 1000, s);
    CHECK((back.final_state() - phi0).norm() < 1e-8);
  }
}

TEST_CASE("input validation") {
  const LatticeGrid g(4, 1.0);
  const auto v = PotentialSpec::zero(g);
  CHECK_THROWS_AS(solve(2.0 * uniform_state(4), g, v, 1e-3, 1), std::invalid_argument);
  CHECK_THROWS_AS(solve(uniform_state(4), g, v, 0.2, 1), std::invalid_argument);  // 0.2 * 4 > 0.5
  try {
    solve(uniform_state(4), g, v, 0.2, 1);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("0.125") != std::string::npos);
  }
  CHECK(max_stable_dt(g) == doctest::Approx(0.125));
  const auto traj = solve(uniform_state(4), g, v, 0.1, 3);
  CHECK_THROWS_AS(traj.at(0.5), std::out_of_range);
  CHECK(scheme_from_string("yoshida4") == Scheme::Yoshida4);
  CHECK_THROWS_AS(scheme_from_string("euler"), std::invalid_argument);
}

TEST_CASE("interpolation between snapshots") {
  const LatticeGrid g(4, 1.0);
  const auto traj = solve(gaussian_packet(4, 0.0, 1.0, 0.2), g, PotentialSpec::constant(g, 0.4), 0.1, 4);
  CHECK((traj.at(0.2) - traj.snapshots[2]).norm() == 0.0);
  CHECK((traj.at(0.25) - 0.5 * (traj.snapshots[2] + traj.snapshots[3])).norm() < 1e-15);
}

TEST_CASE("energy functional") {
  const LatticeGrid g(4, 1.0);
  const auto v = PotentialSpec::from_profile(g, {2.0, 1.0, 0.5});
  CVec phi = CVec::Zero(4);
  phi(0) = 1.0;
  // Localized on one site: kinetic 2, interaction V(0)/2.
  CHECK(energy(g, v, phi) == doctest::Approx(2.0 + 1.0));
}

TEST_CASE("regularized comparison") {
  const LatticeGrid g(6, 1.0);
  const auto v = PotentialSpec::soft_coulomb(g, 2.0, 0.5);  // V(0) = 4
  const CVec phi0 = gaussian_packet(6, 1.0, 1.0, 0.5);
  const auto none = compare_regularized(phi0, g, v, 0.2, 1.0, 1e-3);  // 1/alpha = 5 > V(0)
  CHECK(none.max_distance == 0.0);
  const auto zero_t = compare_regularized(phi0, g, v, 0.5, 0.0, 1e-3);
  CHECK(zero_t.max_distance == 0.0);
  const auto r = compare_regularized(phi0, g, v, 0.5, 1.0, 1e-3);
  CHECK(r.distance.front() == 0.0);
  CHECK(r.max_distance > 0.0);
  CHECK(r.projector_bound_holds);
}

TEST_CASE("trajectory export") {
  const LatticeGrid g(3, 1.0);
  const auto traj = solve(uniform_state(3), g, PotentialSpec::zero(g), 0.1, 2);
  std::ostringstream a, b;
  write_trajectory_csv(a, traj);
  write_conserved_csv(b, traj);
  CHECK(a.str().rfind("t,site,re,im\n", 0) == 0);
  const std::string sa = a.str(), sb = b.str();
  CHECK(std::count(sa.begin(), sa.end(), '\n') == 1 + 3 * 3);
  CHECK(std::count(sb.begin(), sb.end(), '\n') == 1 + 3);
}
