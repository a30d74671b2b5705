#include <doctest.h>

#include <random>
#include <vector>

#include "mflab/kernels.hpp"

using mflab::simd::cplx;
namespace simd = mflab::simd;

namespace {

std::vector<cplx> random_cvec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d;
  std::vector<cplx> v(n);
  for (auto& x : v) x = {d(rng), d(rng)};
  return v;
}

std::vector<double> random_rvec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

double max_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("scalar kernels agree with direct loops") {
  std::mt19937_64 rng(7);
  const auto& k = simd::scalar_kernels();
  const auto x = random_cvec(rng, 5), y = random_cvec(rng, 5);
  cplx dot = 0.0;
  for (int i = 0; i < 5; ++i) dot += std::conj(x[std::size_t(i)]) * y[std::size_t(i)];
  CHECK(std::abs(k.cdot(x.data(), y.data(), 5) - dot) < 1e-14);

  // 2x3 real matrix times complex vector, both orientations.
  const double a[6] = {1, 2, 3, 4, 5, 6};
  const cplx v3[3] = {{1, 1}, {0, -1}, {2, 0}};
  cplx out2[2];
  k.real_gemv(a, 2, 3, v3, out2);
  CHECK(std::abs(out2[0] - cplx(7, -1)) < 1e-15);
  CHECK(std::abs(out2[1] - cplx(16, -1)) < 1e-15);
  const cplx v2[2] = {{1, 0}, {0, 1}};
  cplx out3[3];
  k.real_gemv_t(a, 2, 3, v2, out3);
  CHECK(std::abs(out3[0] - cplx(1, 4)) < 1e-15);
  CHECK(std::abs(out3[2] - cplx(3, 6)) < 1e-15);
}

TEST_CASE("AVX2 kernels match the scalar reference") {
  const auto* fast = simd::avx2_kernels();
  if (fast == nullptr || !simd::cpu_has_avx2()) {
    MESSAGE("AVX2 variant unavailable on this host; equivalence not exercised");
    return;
  }
  const auto& ref = simd::scalar_kernels();
  std::mt19937_64 rng(11);
  for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 13u, 31u, 64u, 257u}) {
    CAPTURE(n);
    const auto x = random_cvec(rng, n), y = random_cvec(rng, n);
    const auto w = random_rvec(rng, n);
    const double scale = 1.0 + double(n);

    CHECK(std::abs(fast->cdot(x.data(), y.data(), n) - ref.cdot(x.data(), y.data(), n)) < 1e-13 * scale);
    CHECK(std::abs(fast->weighted_norm2(w.data(), x.data(), n) - ref.weighted_norm2(w.data(), x.data(), n)) <
          1e-13 * scale);

    auto y1 = y, y2 = y;
    fast->caxpy({0.3, -1.2}, x.data(), y1.data(), n);
    ref.caxpy({0.3, -1.2}, x.data(), y2.data(), n);
    CHECK(max_diff(y1, y2) < 1e-14);

    y1 = y;
    y2 = y;
    fast->cmul_inplace(x.data(), y1.data(), n);
    ref.cmul_inplace(x.data(), y2.data(), n);
    CHECK(max_diff(y1, y2) < 1e-14);

    for (std::size_t rows : {1u, 3u, 6u}) {
      const auto a = random_rvec(rng, rows * n);
      const auto xr = random_cvec(rng, rows);
      std::vector<cplx> o1(rows), o2(rows), t1(n), t2(n);
      fast->real_gemv(a.data(), rows, n, x.data(), o1.data());
      ref.real_gemv(a.data(), rows, n, x.data(), o2.data());
      CHECK(max_diff(o1, o2) < 1e-13 * scale);
      fast->real_gemv_t(a.data(), rows, n, xr.data(), t1.data());
      ref.real_gemv_t(a.data(), rows, n, xr.data(), t2.data());
      CHECK(max_diff(t1, t2) < 1e-13 * scale);
    }
  }
}

TEST_CASE("active table is one of the compiled variants") {
  const auto& k = simd::active();
  CHECK((k.isa == simd::Isa::Scalar || k.isa == simd::Isa::Avx2));
  CHECK(!simd::isa_name(k.isa).empty());
}
