#pragma once
// Truncated bosonic Fock space over M lattice modes.
//
// Basis vectors are occupation vectors (n_1, ..., n_M) with sum n_i <= n_max,
// stored sector by sector (total occupation 0, 1, ..., n_max).  Inside a
// sector the order is reverse-lexicographic: (n, 0, ..., 0) comes first.
// Anything an operator pushes above n_max is dropped and its squared norm is
// recorded on the resulting state as leak().

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "mflab/types.hpp"

namespace mflab::fock {

/// One-particle wave function on the M lattice sites.
using ModeFunction = CVec;

inline constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

/// Number of occupation vectors of M modes with total exactly n: C(n+M-1, M-1).
std::uint64_t sector_dimension(int modes, int n);
/// Rank of an occupation vector inside its sector.
std::uint64_t composition_rank(std::span<const int> occupation);
/// Inverse of composition_rank for a vector of the given total.
void composition_unrank(std::uint64_t rank, int total, std::span<int> occupation);

/// Occupation-number basis, either a truncated Fock space (sectors 0..n_max)
/// or a single fixed-N sector.
class FockBasis {
 public:
  /// Full truncated Fock space, sectors 0..n_max.
  FockBasis(int modes, int n_max);
  /// Only the sector with total occupation n.
  static FockBasis single_sector(int modes, int n);

  int modes() const noexcept { return modes_; }
  int n_max() const noexcept { return n_max_; }
  int n_min() const noexcept { return n_min_; }
  std::size_t size() const noexcept { return size_; }

  std::span<const int> occupation(std::size_t index) const noexcept {
    return {occ_.data() + index * std::size_t(modes_), std::size_t(modes_)};
  }
  int sector_of(std::size_t index) const noexcept { return sector_[index]; }
  /// First index of sector n and one past its last.
  std::size_t sector_begin(int n) const;
  std::size_t sector_end(int n) const;

  /// npos when the vector is outside the basis.
  std::size_t index_of(std::span<const int> occupation) const;
  /// Index of the state with one more particle in mode k, or npos.
  std::size_t raised(std::size_t index, int k) const noexcept {
    return up_[index * std::size_t(modes_) + std::size_t(k)];
  }
  /// Index of the state with one less particle in mode k, or npos.
  std::size_t lowered(std::size_t index, int k) const noexcept {
    return down_[index * std::size_t(modes_) + std::size_t(k)];
  }
  /// Total occupation per basis vector as doubles (for weighted norms).
  const std::vector<double>& sector_weights() const noexcept { return sector_d_; }

 private:
  FockBasis(int modes, int n_min, int n_max);
  int modes_;
  int n_min_;
  int n_max_;
  std::size_t size_ = 0;
  std::vector<int> occ_;
  std::vector<int> sector_;
  std::vector<double> sector_d_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> up_;
  std::vector<std::size_t> down_;
};

using BasisPtr = std::shared_ptr<const FockBasis>;

inline BasisPtr make_basis(int modes, int n_max) {
  return std::make_shared<const FockBasis>(modes, n_max);
}

/// Complex amplitudes over a shared basis, plus the squared norm that was
/// dropped above n_max while producing it.
class FockState {
 public:
  explicit FockState(BasisPtr basis);
  FockState(BasisPtr basis, CVec amplitudes, double leak = 0.0);

  const FockBasis& basis() const noexcept { return *basis_; }
  const BasisPtr& basis_ptr() const noexcept { return basis_; }
  const CVec& amplitudes() const noexcept { return amps_; }
  CVec& amplitudes() noexcept { return amps_; }
  std::span<const cplx> span() const noexcept { return {amps_.data(), std::size_t(amps_.size())}; }

  double leak() const noexcept { return leak_; }
  void set_leak(double leak) noexcept { leak_ = leak; }

  double norm() const;
  double norm2() const;
  /// ||(N + shift)^power psi||, power may be fractional or negative
  /// (shift must then be positive on every occupied sector).
  double number_norm(double power, double shift = 0.0) const;
  /// <psi, N psi> and <psi, N^2 psi>.
  double number_moment(int order) const;
  /// Squared norm per sector 0..n_max.
  std::vector<double> sector_masses() const;
  /// Mass on sectors n >= n_max - 1.
  double truncation_leak() const;
  /// Highest sector holding more than `tol` of the squared norm above it.
  int effective_top_sector(double tol = 1e-24) const;

  cplx inner(const FockState& other) const;  // <this, other>

  FockState& operator+=(const FockState& other);
  FockState& operator-=(const FockState& other);
  FockState& operator*=(cplx c);

 private:
  BasisPtr basis_;
  CVec amps_;
  double leak_ = 0.0;
};

FockState operator+(FockState a, const FockState& b);
FockState operator-(FockState a, const FockState& b);
FockState operator*(cplx c, FockState a);

FockState vacuum(BasisPtr basis);
/// a*(f)^n / sqrt(n!) Omega; exactly f^{(x)n} when ||f|| = 1.
FockState product_state(BasisPtr basis, const ModeFunction& f, int n);
/// Basis vector with the given occupations.
FockState occupation_state(BasisPtr basis, std::span<const int> occupation);

// --- mode-level ladder operators (k = site index) -------------------------
void create_mode_into(const FockBasis& b, int k, std::span<const cplx> in, std::span<cplx> out,
                      cplx scale = 1.0);
void annihilate_mode_into(const FockBasis& b, int k, std::span<const cplx> in, std::span<cplx> out,
                          cplx scale = 1.0);

// --- smeared operators ------------------------------------------------------
/// a*(f) = sum_x f(x) a*_x.  Linear in f.
FockState apply_create(const ModeFunction& f, const FockState& s);
/// a(f) = sum_x conj(f(x)) a_x.  Antilinear in f.
FockState apply_annihilate(const ModeFunction& f, const FockState& s);
/// phi(f) = a*(f) + a(f)
FockState field_phi(const ModeFunction& f, const FockState& s);

enum class Hermiticity { Require, AllowNonHermitian };

/// Second quantization dGamma(J) = sum_{xy} J(x, y) a*_x a_y.
class SecondQuantized {
 public:
  SecondQuantized(CMat j, bool hermitian) : j_(std::move(j)), hermitian_(hermitian) {}
  const CMat& one_body() const noexcept { return j_; }
  bool hermitian() const noexcept { return hermitian_; }
  FockState apply(const FockState& s) const;

 private:
  CMat j_;
  bool hermitian_;
};

/// Throws std::invalid_argument for a non-Hermitian J unless allowed.
SecondQuantized second_quantize(const CMat& j, Hermiticity mode = Hermiticity::Require);

/// Number operator applied as a diagonal.
FockState apply_number(const FockState& s);

/// Headroom the Weyl operator W(f) needs on a state whose mass ends at `top`.
int weyl_required_n_max(double f_norm2, int top);

/// W(f) = exp(a*(f) - a(f)) = e^{-|f|^2/2} e^{a*(f)} e^{-a(f)}.
/// Throws HeadroomError when n_max is too small for certified accuracy.
FockState weyl_apply(const ModeFunction& f, const FockState& s);

/// P_n: keep only sector n.  Throws std::out_of_range for n > n_max.
FockState project_sector(int n, const FockState& s);

/// sqrt(N!) / (e^{-N/2} N^{N/2}), the inverse amplitude of sector N in W(sqrt(N) e) Omega.
/// Evaluated in log space.
double coherent_sector_factor(int n);
double log_coherent_sector_factor(int n);

struct CoherentProductReport {
  int n = 0;
  double value = 0.0;   // ||(N+1)^{-1/2} W*(sqrt(N) phi) a*(phi)^N/sqrt(N!) Omega||
  double sector_factor = 0.0;
  double scaled = 0.0;  // value * coherent_sector_factor(n)
  double leak = 0.0;
  int n_max = 0;
};

/// Single-mode evaluation of the coherent/product overlap norm.  The default
/// truncation is 4N + 20.
CoherentProductReport coherent_minus_product_norm(int n, int n_max = -1);

/// Same quantity computed in a full M-mode basis for an arbitrary unit phi.
CoherentProductReport coherent_minus_product_norm(const ModeFunction& phi, int n, int n_max);

// --- state files --------------------------------------------------------------
/// Text table: header "M n_max", then one row per basis vector
/// "n_1 ... n_M re im" with 17 significant digits.
void save_state(std::ostream& os, const FockState& s);
FockState load_state(std::istream& is);

}  // namespace mflab::fock
