#include "mflab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mflab::lattice {

LatticeGrid::LatticeGrid(int sites, double spacing) : sites_(sites), spacing_(spacing) {
  if (sites < 2) throw std::invalid_argument("lattice needs at least 2 sites");
  if (!(spacing > 0.0)) throw std::invalid_argument("lattice spacing must be positive");
  const double inv = 1.0 / (spacing * spacing);
  h0_ = RMat::Zero(sites, sites);
  for (int i = 0; i < sites; ++i) {
    h0_(i, i) += 2.0 * inv;
    h0_(i, (i + 1) % sites) -= inv;
    h0_(i, (i + sites - 1) % sites) -= inv;
  }
  Eigen::SelfAdjointEigenSolver<RMat> es(h0_);
  h0_eigenvalues_ = es.eigenvalues();
  h0_modes_ = es.eigenvectors();
}

int LatticeGrid::ring_steps(int i, int j) const noexcept {
  const int d = std::abs(i - j) % sites_;
  return std::min(d, sites_ - d);
}

LatticeGrid build_grid(int sites, double spacing) { return LatticeGrid(sites, spacing); }

std::string to_string(PotentialFamily family) {
  switch (family) {
    case PotentialFamily::Zero: return "zero";
    case PotentialFamily::SoftCoulomb: return "soft-coulomb";
    case PotentialFamily::Gaussian: return "gaussian";
    case PotentialFamily::Constant: return "constant";
  }
  return "unknown";
}

PotentialFamily potential_family_from_string(const std::string& name) {
  if (name == "zero") return PotentialFamily::Zero;
  if (name == "soft-coulomb") return PotentialFamily::SoftCoulomb;
  if (name == "gaussian") return PotentialFamily::Gaussian;
  if (name == "constant") return PotentialFamily::Constant;
  throw std::invalid_argument("unknown potential family '" + name + "'");
}

namespace {

template <class F>
PotentialSpec sample(const LatticeGrid& grid, F&& profile) {
  std::vector<double> values(grid.sites() / 2 + 1);
  for (std::size_t k = 0; k < values.size(); ++k) values[k] = profile(grid.spacing() * double(k));
  return PotentialSpec::from_profile(grid, std::move(values));
}

}  // namespace

PotentialSpec PotentialSpec::from_profile(const LatticeGrid& grid, std::vector<double> profile) {
  if (profile.size() != std::size_t(grid.sites() / 2 + 1)) {
    throw std::invalid_argument("potential profile must have M/2 + 1 entries");
  }
  PotentialSpec p;
  p.sites_ = grid.sites();
  p.raw_ = profile;
  p.values_ = std::move(profile);
  return p;
}

PotentialSpec PotentialSpec::zero(const LatticeGrid& grid) {
  return sample(grid, [](double) { return 0.0; });
}

PotentialSpec PotentialSpec::constant(const LatticeGrid& grid, double c) {
  auto p = sample(grid, [c](double) { return c; });
  p.family_ = PotentialFamily::Constant;
  p.v0_ = c;
  return p;
}

PotentialSpec PotentialSpec::soft_coulomb(const LatticeGrid& grid, double v0, double a) {
  if (!(a > 0.0)) throw std::invalid_argument("soft-coulomb width a must be positive");
  auto p = sample(grid, [=](double d) { return v0 / std::sqrt(d * d + a * a); });
  p.family_ = PotentialFamily::SoftCoulomb;
  p.v0_ = v0;
  p.width_ = a;
  return p;
}

PotentialSpec PotentialSpec::gaussian(const LatticeGrid& grid, double v0, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian width sigma must be positive");
  auto p = sample(grid, [=](double d) { return v0 * std::exp(-d * d / (2.0 * sigma * sigma)); });
  p.family_ = PotentialFamily::Gaussian;
  p.v0_ = v0;
  p.width_ = sigma;
  return p;
}

double PotentialSpec::at(int i, int j) const noexcept {
  const int d = std::abs(i - j) % sites_;
  return values_[std::size_t(std::min(d, sites_ - d))];
}

RMat PotentialSpec::pair_matrix() const {
  RMat v(sites_, sites_);
  for (int i = 0; i < sites_; ++i)
    for (int j = 0; j < sites_; ++j) v(i, j) = at(i, j);
  return v;
}

bool PotentialSpec::is_zero() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

double PotentialSpec::max_abs() const noexcept {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

std::string PotentialSpec::tag() const {
  std::ostringstream os;
  os.precision(6);
  os << to_string(family_);
  switch (family_) {
    case PotentialFamily::SoftCoulomb: os << "(v0=" << v0_ << ",a=" << width_ << ")"; break;
    case PotentialFamily::Gaussian: os << "(v0=" << v0_ << ",sigma=" << width_ << ")"; break;
    case PotentialFamily::Constant: os << "(c=" << v0_ << ")"; break;
    case PotentialFamily::Zero: break;
  }
  return os.str();
}

PotentialSpec regularize(const PotentialSpec& p, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("cutoff alpha must be positive");
  PotentialSpec out = p;
  const double cap = 1.0 / alpha;
  for (std::size_t k = 0; k < out.raw_.size(); ++k) {
    const double v = out.raw_[k];
    // sgn(0) = 0 keeps zeros at zero.
    const double s = (v > 0.0) - (v < 0.0);
    out.values_[k] = s * std::min(std::abs(v), cap);
  }
  out.alpha_ = alpha;
  return out;
}

double certify_D(const PotentialSpec& p, const LatticeGrid& grid) {
  if (p.sites() != grid.sites()) throw std::invalid_argument("potential and grid disagree on M");
  const int m = grid.sites();
  RVec v2(m);
  for (int j = 0; j < m; ++j) v2(j) = p.at(0, j) * p.at(0, j);
  const double vmax2 = v2.maxCoeff();
  if (vmax2 == 0.0) return 0.0;

  const RMat one_plus_h0 = RMat::Identity(m, m) + grid.laplacian();
  auto feasible = [&](double d) {
    const RMat gap = d * one_plus_h0 - RMat(v2.asDiagonal());
    Eigen::SelfAdjointEigenSolver<RMat> es(gap, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0) >= -1e-12 * d;
  };

  // min eig(I + h0) = 1 on the constant mode, so D <= max V^2; and
  // D >= max V^2 / max eig(I + h0) by testing against a site delta.
  double lo = vmax2 / (1.0 + grid.laplacian_norm());
  double hi = vmax2;
  if (feasible(lo)) return lo;
  while (hi - lo > 0.01 * hi) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? hi : lo) = mid;
  }
  return hi;
}

RVec ring_convolve(const PotentialSpec& p, const RVec& rho) {
  const int m = p.sites();
  RVec out = RVec::Zero(m);
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int j = 0; j < m; ++j) s += p.at(i, j) * rho(j);
    out(i) = s;
  }
  return out;
}

}  // namespace mflab::lattice
