#include "mflab/fock.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mflab/kernels.hpp"

namespace mflab::fock {

namespace {

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Compositions of `total` into `parts` nonnegative parts.
std::uint64_t compositions(int total, int parts) {
  if (parts == 0) return total == 0 ? 1 : 0;
  return binomial(std::uint64_t(total + parts - 1), std::uint64_t(parts - 1));
}

}  // namespace

std::uint64_t sector_dimension(int modes, int n) { return compositions(n, modes); }

std::uint64_t composition_rank(std::span<const int> occupation) {
  const int m = int(occupation.size());
  int rem = std::accumulate(occupation.begin(), occupation.end(), 0);
  std::uint64_t rank = 0;
  for (int k = 0; k + 1 < m; ++k) {
    // All vectors with a larger entry in slot k come first.
    for (int v = occupation[std::size_t(k)] + 1; v <= rem; ++v) rank += compositions(rem - v, m - k - 1);
    rem -= occupation[std::size_t(k)];
  }
  return rank;
}

void composition_unrank(std::uint64_t rank, int total, std::span<int> occupation) {
  const int m = int(occupation.size());
  int rem = total;
  for (int k = 0; k + 1 < m; ++k) {
    for (int v = rem; v >= 0; --v) {
      const std::uint64_t c = compositions(rem - v, m - k - 1);
      if (rank < c) {
        occupation[std::size_t(k)] = v;
        rem -= v;
        break;
      }
      rank -= c;
    }
  }
  occupation[std::size_t(m - 1)] = rem;
}

FockBasis::FockBasis(int modes, int n_max) : FockBasis(modes, 0, n_max) {}

FockBasis FockBasis::single_sector(int modes, int n) { return FockBasis(modes, n, n); }

FockBasis::FockBasis(int modes, int n_min, int n_max) : modes_(modes), n_min_(n_min), n_max_(n_max) {
  if (modes < 1) throw std::invalid_argument("Fock basis needs at least one mode");
  if (n_min < 0 || n_max < n_min) throw std::invalid_argument("invalid occupation range");
  offsets_.resize(std::size_t(n_max - n_min + 2));
  offsets_[0] = 0;
  for (int n = n_min; n <= n_max; ++n) {
    offsets_[std::size_t(n - n_min + 1)] = offsets_[std::size_t(n - n_min)] + sector_dimension(modes, n);
  }
  size_ = offsets_.back();
  const auto m = std::size_t(modes);
  occ_.resize(size_ * m);
  sector_.resize(size_);
  sector_d_.resize(size_);
  for (int n = n_min; n <= n_max; ++n) {
    for (std::size_t i = sector_begin(n); i < sector_end(n); ++i) {
      composition_unrank(i - sector_begin(n), n, {occ_.data() + i * m, m});
      sector_[i] = n;
      sector_d_[i] = double(n);
    }
  }
  up_.assign(size_ * m, npos);
  down_.assign(size_ * m, npos);
  std::vector<int> work(m);
  for (std::size_t i = 0; i < size_; ++i) {
    auto occ = occupation(i);
    for (std::size_t k = 0; k < m; ++k) {
      std::copy(occ.begin(), occ.end(), work.begin());
      ++work[k];
      up_[i * m + k] = index_of(work);
      if (occ[k] > 0) {
        work[k] -= 2;
        down_[i * m + k] = index_of(work);
      }
    }
  }
}

std::size_t FockBasis::sector_begin(int n) const {
  if (n < n_min_ || n > n_max_) throw std::out_of_range("sector outside basis");
  return offsets_[std::size_t(n - n_min_)];
}

std::size_t FockBasis::sector_end(int n) const {
  if (n < n_min_ || n > n_max_) throw std::out_of_range("sector outside basis");
  return offsets_[std::size_t(n - n_min_ + 1)];
}

std::size_t FockBasis::index_of(std::span<const int> occupation) const {
  if (int(occupation.size()) != modes_) return npos;
  int total = 0;
  for (int v : occupation) {
    if (v < 0) return npos;
    total += v;
  }
  if (total < n_min_ || total > n_max_) return npos;
  return offsets_[std::size_t(total - n_min_)] + composition_rank(occupation);
}

// --- FockState ---------------------------------------------------------------

FockState::FockState(BasisPtr basis) : basis_(std::move(basis)), amps_(CVec::Zero(Eigen::Index(basis_->size()))) {}

FockState::FockState(BasisPtr basis, CVec amplitudes, double leak)
    : basis_(std::move(basis)), amps_(std::move(amplitudes)), leak_(leak) {
  if (std::size_t(amps_.size()) != basis_->size()) throw std::invalid_argument("amplitude vector does not match basis");
}

double FockState::norm2() const { return simd::norm2(span()); }
double FockState::norm() const { return std::sqrt(norm2()); }

double FockState::number_norm(double power, double shift) const {
  const auto& b = *basis_;
  std::vector<double> per_sector(std::size_t(b.n_max() + 1), 0.0);
  for (int n = b.n_min(); n <= b.n_max(); ++n) {
    const double base = double(n) + shift;
    per_sector[std::size_t(n)] = base == 0.0 ? (power > 0 ? 0.0 : 1.0) : std::pow(base, 2.0 * power);
  }
  std::vector<double> w(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) w[i] = per_sector[std::size_t(b.sector_of(i))];
  return std::sqrt(simd::weighted_norm2(w, span()));
}

double FockState::number_moment(int order) const {
  const auto& b = *basis_;
  std::vector<double> w(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) w[i] = std::pow(double(b.sector_of(i)), order);
  return simd::weighted_norm2(w, span());
}

std::vector<double> FockState::sector_masses() const {
  const auto& b = *basis_;
  std::vector<double> m(std::size_t(b.n_max() + 1), 0.0);
  for (int n = b.n_min(); n <= b.n_max(); ++n) {
    const auto begin = b.sector_begin(n), end = b.sector_end(n);
    m[std::size_t(n)] = simd::norm2({amps_.data() + begin, end - begin});
  }
  return m;
}

double FockState::truncation_leak() const {
  const auto m = sector_masses();
  double s = 0.0;
  for (int n = std::max(0, basis_->n_max() - 1); n <= basis_->n_max(); ++n) s += m[std::size_t(n)];
  return s;
}

int FockState::effective_top_sector(double tol) const {
  const auto m = sector_masses();
  const double total = std::accumulate(m.begin(), m.end(), 0.0);
  double tail = 0.0;
  for (int n = int(m.size()) - 1; n >= 0; --n) {
    if (tail + m[std::size_t(n)] > tol * total) return n;
    tail += m[std::size_t(n)];
  }
  return 0;
}

cplx FockState::inner(const FockState& other) const { return simd::cdot(span(), other.span()); }

FockState& FockState::operator+=(const FockState& other) {
  amps_ += other.amps_;
  leak_ += other.leak_;
  return *this;
}

FockState& FockState::operator-=(const FockState& other) {
  amps_ -= other.amps_;
  leak_ += other.leak_;
  return *this;
}

FockState& FockState::operator*=(cplx c) {
  amps_ *= c;
  leak_ *= std::norm(c);
  return *this;
}

FockState operator+(FockState a, const FockState& b) { return a += b; }
FockState operator-(FockState a, const FockState& b) { return a -= b; }
FockState operator*(cplx c, FockState a) { return a *= c; }

FockState vacuum(BasisPtr basis) {
  if (basis->n_min() != 0) throw std::invalid_argument("basis has no vacuum sector");
  FockState s(std::move(basis));
  s.amplitudes()(0) = 1.0;
  return s;
}

FockState occupation_state(BasisPtr basis, std::span<const int> occupation) {
  const std::size_t i = basis->index_of(occupation);
  if (i == npos) throw std::out_of_range("occupation vector outside basis");
  FockState s(std::move(basis));
  s.amplitudes()(Eigen::Index(i)) = 1.0;
  return s;
}

FockState product_state(BasisPtr basis, const ModeFunction& f, int n) {
  const auto& b = *basis;
  if (f.size() != b.modes()) throw std::invalid_argument("mode function length does not match basis");
  if (n < b.n_min() || n > b.n_max()) throw std::out_of_range("product state sector outside basis");
  // Coefficient of |n_1..n_M> in a*(f)^n/sqrt(n!) Omega: sqrt(n!/prod n_k!) prod f_k^{n_k}.
  FockState s(basis);
  const double log_nfact = std::lgamma(double(n) + 1.0);
  for (std::size_t i = b.sector_begin(n); i < b.sector_end(n); ++i) {
    auto occ = b.occupation(i);
    double log_mag = 0.5 * log_nfact;
    cplx phase = 1.0;
    bool zero = false;
    for (int k = 0; k < b.modes(); ++k) {
      const int nk = occ[std::size_t(k)];
      if (nk == 0) continue;
      const double a = std::abs(f(k));
      if (a == 0.0) {
        zero = true;
        break;
      }
      log_mag += nk * std::log(a) - 0.5 * std::lgamma(double(nk) + 1.0);
      phase *= std::pow(f(k) / a, nk);
    }
    if (!zero) s.amplitudes()(Eigen::Index(i)) = std::exp(log_mag) * phase;
  }
  return s;
}

// --- ladder operators ------------------------------------------------------------

void create_mode_into(const FockBasis& b, int k, std::span<const cplx> in, std::span<cplx> out, cplx scale) {
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (in[i] == 0.0) continue;
    const std::size_t j = b.raised(i, k);
    if (j == npos) continue;
    out[j] += scale * std::sqrt(double(b.occupation(i)[std::size_t(k)] + 1)) * in[i];
  }
}

void annihilate_mode_into(const FockBasis& b, int k, std::span<const cplx> in, std::span<cplx> out, cplx scale) {
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (in[i] == 0.0) continue;
    const std::size_t j = b.lowered(i, k);
    if (j == npos) continue;
    out[j] += scale * std::sqrt(double(b.occupation(i)[std::size_t(k)])) * in[i];
  }
}

namespace {

void check_modes(const ModeFunction& f, const FockState& s) {
  if (f.size() != s.basis().modes()) throw std::invalid_argument("mode function length does not match basis");
}

std::span<cplx> mut_span(CVec& v) { return {v.data(), std::size_t(v.size())}; }

FockState annihilate_raw(const ModeFunction& f, const FockState& s) {
  FockState out(s.basis_ptr());
  for (int k = 0; k < f.size(); ++k) {
    if (f(k) == 0.0) continue;
    annihilate_mode_into(s.basis(), k, s.span(), mut_span(out.amplitudes()), std::conj(f(k)));
  }
  return out;
}

FockState create_raw(const ModeFunction& f, const FockState& s) {
  FockState out(s.basis_ptr());
  for (int k = 0; k < f.size(); ++k) {
    if (f(k) == 0.0) continue;
    create_mode_into(s.basis(), k, s.span(), mut_span(out.amplitudes()), f(k));
  }
  return out;
}

// ||a*(f) P_top s||^2 = |f|^2 |P_top s|^2 + |a(f) P_top s|^2 by the CCR.
double creation_leak(const ModeFunction& f, const FockState& s) {
  const auto& b = s.basis();
  if (b.n_min() == b.n_max()) return f.squaredNorm() * s.norm2();
  FockState top = project_sector(b.n_max(), s);
  return f.squaredNorm() * top.norm2() + annihilate_raw(f, top).norm2();
}

}  // namespace

FockState apply_create(const ModeFunction& f, const FockState& s) {
  check_modes(f, s);
  FockState out = create_raw(f, s);
  out.set_leak(creation_leak(f, s));
  return out;
}

FockState apply_annihilate(const ModeFunction& f, const FockState& s) {
  check_modes(f, s);
  return annihilate_raw(f, s);
}

FockState field_phi(const ModeFunction& f, const FockState& s) {
  FockState out = apply_create(f, s);
  out.amplitudes() += annihilate_raw(f, s).amplitudes();
  return out;
}

FockState SecondQuantized::apply(const FockState& s) const {
  const auto& b = s.basis();
  const int m = b.modes();
  if (j_.rows() != m || j_.cols() != m) throw std::invalid_argument("one-body operator does not match basis");
  FockState out(s.basis_ptr());
  CVec combo(s.amplitudes().size());
  std::vector<CVec> a_y(static_cast<std::size_t>(m));
  for (int y = 0; y < m; ++y) {
    a_y[std::size_t(y)] = CVec::Zero(s.amplitudes().size());
    annihilate_mode_into(b, y, s.span(), mut_span(a_y[std::size_t(y)]));
  }
  for (int x = 0; x < m; ++x) {
    combo.setZero();
    for (int y = 0; y < m; ++y) {
      if (j_(x, y) != 0.0) combo += j_(x, y) * a_y[std::size_t(y)];
    }
    create_mode_into(b, x, {combo.data(), std::size_t(combo.size())}, mut_span(out.amplitudes()));
  }
  return out;
}

SecondQuantized second_quantize(const CMat& j, Hermiticity mode) {
  if (j.rows() != j.cols()) throw std::invalid_argument("one-body operator must be square");
  const double scale = std::max(1.0, j.cwiseAbs().maxCoeff());
  const bool herm = (j - j.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
  if (!herm && mode == Hermiticity::Require) {
    throw std::invalid_argument("second_quantize: J is not Hermitian");
  }
  return SecondQuantized(j, herm);
}

FockState apply_number(const FockState& s) {
  FockState out = s;
  out.set_leak(0.0);
  const auto& w = s.basis().sector_weights();
  for (std::size_t i = 0; i < w.size(); ++i) out.amplitudes()(Eigen::Index(i)) *= w[i];
  return out;
}

int weyl_required_n_max(double f_norm2, int top) {
  return int(std::ceil(double(top) + f_norm2 + 6.0 * std::sqrt(f_norm2) + 10.0));
}

FockState weyl_apply(const ModeFunction& f, const FockState& s) {
  check_modes(f, s);
  const auto& b = s.basis();
  if (b.n_min() != 0) throw std::invalid_argument("Weyl operator needs a full Fock basis");
  const double f2 = f.squaredNorm();
  if (f2 == 0.0) return s;
  const int required = weyl_required_n_max(f2, s.effective_top_sector());
  if (b.n_max() < required) {
    throw HeadroomError("weyl_apply: n_max=" + std::to_string(b.n_max()) + " too small, need n_max >= " +
                            std::to_string(required),
                        required);
  }
  const double tiny = 1e-16 * std::max(s.norm(), 1e-300);

  // e^{-a(f)} s: the series ends once every particle has been removed.
  FockState lowered = s;
  lowered.set_leak(0.0);
  {
    FockState term = lowered;
    for (int k = 1; k <= b.n_max() + 1; ++k) {
      term = annihilate_raw(f, term);
      term *= cplx(-1.0 / k);
      if (term.norm() < tiny) break;
      lowered += term;
    }
  }
  // e^{a*(f)}: terms above n_max vanish in the truncated space.
  FockState out = lowered;
  {
    FockState term = lowered;
    for (int k = 1; k <= b.n_max() + 1; ++k) {
      term = create_raw(f, term);
      term *= cplx(1.0 / k);
      if (term.norm() < tiny) break;
      out += term;
    }
  }
  out *= cplx(std::exp(-0.5 * f2));
  out.set_leak(std::max(0.0, s.norm2() - out.norm2()));
  return out;
}

FockState project_sector(int n, const FockState& s) {
  const auto& b = s.basis();
  if (n < 0 || n > b.n_max()) throw std::out_of_range("project_sector: n exceeds n_max");
  FockState out(s.basis_ptr());
  if (n < b.n_min()) return out;
  const auto begin = Eigen::Index(b.sector_begin(n)), end = Eigen::Index(b.sector_end(n));
  out.amplitudes().segment(begin, end - begin) = s.amplitudes().segment(begin, end - begin);
  return out;
}

double log_coherent_sector_factor(int n) {
  if (n < 1) throw std::invalid_argument("coherent_sector_factor needs N >= 1");
  const double nn = double(n);
  return 0.5 * std::lgamma(nn + 1.0) + 0.5 * nn - 0.5 * nn * std::log(nn);
}

double coherent_sector_factor(int n) { return std::exp(log_coherent_sector_factor(n)); }

CoherentProductReport coherent_minus_product_norm(const ModeFunction& phi, int n, int n_max) {
  if (std::abs(phi.norm() - 1.0) > 1e-12) throw std::invalid_argument("phi must be normalized");
  auto basis = make_basis(int(phi.size()), n_max);
  const FockState product = product_state(basis, phi, n);
  const FockState shifted = weyl_apply(-std::sqrt(double(n)) * phi, product);
  CoherentProductReport r;
  r.n = n;
  r.n_max = n_max;
  r.value = shifted.number_norm(-0.5, 1.0);
  r.sector_factor = coherent_sector_factor(n);
  r.scaled = r.value * r.sector_factor;
  r.leak = shifted.leak();
  return r;
}

CoherentProductReport coherent_minus_product_norm(int n, int n_max) {
  if (n < 1) throw std::invalid_argument("N must be positive");
  if (n_max < 0) n_max = 4 * n + 20;
  ModeFunction one(1);
  one(0) = 1.0;
  return coherent_minus_product_norm(one, n, n_max);
}

}  // namespace mflab::fock
