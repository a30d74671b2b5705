#include "mflab/kernels.hpp"

#include <cassert>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace mflab::simd {

namespace {

cplx cdot_scalar(const cplx* x, const cplx* y, std::size_t n) {
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double xr = x[i].real(), xi = x[i].imag();
    const double yr = y[i].real(), yi = y[i].imag();
    re += xr * yr + xi * yi;
    im += xr * yi - xi * yr;
  }
  return {re, im};
}

void caxpy_scalar(cplx a, const cplx* x, cplx* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double weighted_norm2_scalar(const double* w, const cplx* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += w[i] * std::norm(x[i]);
  return s;
}

void real_gemv_scalar(const double* a, std::size_t rows, std::size_t cols, const cplx* x, cplx* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a + r * cols;
    double re = 0.0, im = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      re += row[c] * x[c].real();
      im += row[c] * x[c].imag();
    }
    y[r] = {re, im};
  }
}

void real_gemv_t_scalar(const double* a, std::size_t rows, std::size_t cols, const cplx* x, cplx* y) {
  for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a + r * cols;
    const double xr = x[r].real(), xi = x[r].imag();
    for (std::size_t c = 0; c < cols; ++c) y[c] += cplx(row[c] * xr, row[c] * xi);
  }
}

void cmul_inplace_scalar(const cplx* d, cplx* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= d[i];
}

const KernelTable kScalar{Isa::Scalar,         cdot_scalar,        caxpy_scalar,
                          weighted_norm2_scalar, real_gemv_scalar, real_gemv_t_scalar,
                          cmul_inplace_scalar};

const KernelTable& resolve() {
  if (const char* env = std::getenv("MFLAB_SIMD"); env && std::strcmp(env, "scalar") == 0) {
    return kScalar;
  }
  if (const KernelTable* t = avx2_kernels(); t && cpu_has_avx2()) return *t;
  return kScalar;
}

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& active() {
  static const KernelTable& table = resolve();
  return table;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "unknown";
}

cplx cdot(std::span<const cplx> x, std::span<const cplx> y) {
  assert(x.size() == y.size());
  return active().cdot(x.data(), y.data(), x.size());
}

void caxpy(cplx a, std::span<const cplx> x, std::span<cplx> y) {
  assert(x.size() == y.size());
  active().caxpy(a, x.data(), y.data(), x.size());
}

double norm2(std::span<const cplx> x) { return cdot(x, x).real(); }

double weighted_norm2(std::span<const double> w, std::span<const cplx> x) {
  assert(w.size() == x.size());
  return active().weighted_norm2(w.data(), x.data(), x.size());
}

void cmul_inplace(std::span<const cplx> d, std::span<cplx> y) {
  assert(d.size() == y.size());
  active().cmul_inplace(d.data(), y.data(), y.size());
}

}  // namespace mflab::simd
