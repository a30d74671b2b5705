// AVX2/FMA variants of the kernels in kernels.cpp.  This translation unit is
// the only one compiled with -mavx2 -mfma; nothing here runs unless the
// dispatcher has checked the CPU feature bits.

#include "mflab/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace mflab::simd {

namespace {

// [re0 im0 re1 im1] -> [im0 re0 im1 re1]
inline __m256d swap_pairs(__m256d v) { return _mm256_permute_pd(v, 0b0101); }

inline double hsum_even(__m256d v) {
  alignas(32) double t[4];
  _mm256_store_pd(t, v);
  return t[0] + t[2];
}

inline double hsum_odd(__m256d v) {
  alignas(32) double t[4];
  _mm256_store_pd(t, v);
  return t[1] + t[3];
}

inline double hsum(__m256d v) {
  alignas(32) double t[4];
  _mm256_store_pd(t, v);
  return (t[0] + t[1]) + (t[2] + t[3]);
}

// [a0 a1] -> [a0 a0 a1 a1]
inline __m256d widen_real_pair(const double* a) {
  const __m128d p = _mm_loadu_pd(a);
  return _mm256_permute4x64_pd(_mm256_castpd128_pd256(p), 0b01010000);
}

cplx cdot_avx2(const cplx* x, const cplx* y, std::size_t n) {
  const auto* xd = reinterpret_cast<const double*>(x);
  const auto* yd = reinterpret_cast<const double*>(y);
  __m256d acc_re = _mm256_setzero_pd();
  __m256d acc_im = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d xv = _mm256_loadu_pd(xd + 2 * i);
    const __m256d yv = _mm256_loadu_pd(yd + 2 * i);
    acc_re = _mm256_fmadd_pd(xv, yv, acc_re);
    acc_im = _mm256_fmadd_pd(xv, swap_pairs(yv), acc_im);
  }
  double re = hsum(acc_re);
  double im = hsum_even(acc_im) - hsum_odd(acc_im);
  for (; i < n; ++i) {
    re += x[i].real() * y[i].real() + x[i].imag() * y[i].imag();
    im += x[i].real() * y[i].imag() - x[i].imag() * y[i].real();
  }
  return {re, im};
}

void caxpy_avx2(cplx a, const cplx* x, cplx* y, std::size_t n) {
  const auto* xd = reinterpret_cast<const double*>(x);
  auto* yd = reinterpret_cast<double*>(y);
  const __m256d ar = _mm256_set1_pd(a.real());
  const __m256d ai = _mm256_set1_pd(a.imag());
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d xv = _mm256_loadu_pd(xd + 2 * i);
    const __m256d ax = _mm256_addsub_pd(_mm256_mul_pd(ar, xv), _mm256_mul_pd(ai, swap_pairs(xv)));
    _mm256_storeu_pd(yd + 2 * i, _mm256_add_pd(_mm256_loadu_pd(yd + 2 * i), ax));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

double weighted_norm2_avx2(const double* w, const cplx* x, std::size_t n) {
  const auto* xd = reinterpret_cast<const double*>(x);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d xv = _mm256_loadu_pd(xd + 2 * i);
    acc = _mm256_fmadd_pd(widen_real_pair(w + i), _mm256_mul_pd(xv, xv), acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += w[i] * std::norm(x[i]);
  return s;
}

void real_gemv_avx2(const double* a, std::size_t rows, std::size_t cols, const cplx* x, cplx* y) {
  const auto* xd = reinterpret_cast<const double*>(x);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a + r * cols;
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      acc0 = _mm256_fmadd_pd(widen_real_pair(row + c), _mm256_loadu_pd(xd + 2 * c), acc0);
      acc1 = _mm256_fmadd_pd(widen_real_pair(row + c + 2), _mm256_loadu_pd(xd + 2 * c + 4), acc1);
    }
    const __m256d acc = _mm256_add_pd(acc0, acc1);
    double re = hsum_even(acc);
    double im = hsum_odd(acc);
    for (; c < cols; ++c) {
      re += row[c] * x[c].real();
      im += row[c] * x[c].imag();
    }
    y[r] = {re, im};
  }
}

void real_gemv_t_avx2(const double* a, std::size_t rows, std::size_t cols, const cplx* x, cplx* y) {
  auto* yd = reinterpret_cast<double*>(y);
  for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a + r * cols;
    const __m256d xv = _mm256_setr_pd(x[r].real(), x[r].imag(), x[r].real(), x[r].imag());
    std::size_t c = 0;
    for (; c + 2 <= cols; c += 2) {
      const __m256d yv = _mm256_loadu_pd(yd + 2 * c);
      _mm256_storeu_pd(yd + 2 * c, _mm256_fmadd_pd(widen_real_pair(row + c), xv, yv));
    }
    for (; c < cols; ++c) y[c] += cplx(row[c] * x[r].real(), row[c] * x[r].imag());
  }
}

void cmul_inplace_avx2(const cplx* d, cplx* y, std::size_t n) {
  const auto* dd = reinterpret_cast<const double*>(d);
  auto* yd = reinterpret_cast<double*>(y);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d dv = _mm256_loadu_pd(dd + 2 * i);
    const __m256d yv = _mm256_loadu_pd(yd + 2 * i);
    const __m256d dr = _mm256_movedup_pd(dv);
    const __m256d di = _mm256_permute_pd(dv, 0b1111);
    _mm256_storeu_pd(yd + 2 * i,
                     _mm256_addsub_pd(_mm256_mul_pd(dr, yv), _mm256_mul_pd(di, swap_pairs(yv))));
  }
  for (; i < n; ++i) y[i] *= d[i];
}

const KernelTable kAvx2{Isa::Avx2,          cdot_avx2,        caxpy_avx2,       weighted_norm2_avx2,
                        real_gemv_avx2,     real_gemv_t_avx2, cmul_inplace_avx2};

}  // namespace

const KernelTable* avx2_kernels() { return &kAvx2; }

}  // namespace mflab::simd

#else

namespace mflab::simd {
const KernelTable* avx2_kernels() { return nullptr; }
}  // namespace mflab::simd

#endif
