#pragma once
// Data-parallel inner loops shared by the Fock, many-body and Hartree code.
//
// Every kernel has a scalar reference implementation and (on x86-64) an
// AVX2/FMA variant.  The variant is picked once at first use from the CPU
// feature bits; MFLAB_SIMD=scalar in the environment forces the reference
// path.  Complex data is interleaved (re, im) exactly as std::complex<double>.

#include <complex>
#include <cstddef>
#include <span>
#include <string_view>

namespace mflab::simd {

using cplx = std::complex<double>;

enum class Isa { Scalar, Avx2 };

/// Kernel table; one instance per instruction set.
struct KernelTable {
  Isa isa;
  // sum_i conj(x_i) y_i
  cplx (*cdot)(const cplx* x, const cplx* y, std::size_t n);
  // y += a x
  void (*caxpy)(cplx a, const cplx* x, cplx* y, std::size_t n);
  // sum_i w_i |x_i|^2
  double (*weighted_norm2)(const double* w, const cplx* x, std::size_t n);
  // y = A x, A real row-major rows x cols
  void (*real_gemv)(const double* a, std::size_t rows, std::size_t cols, const cplx* x, cplx* y);
  // y = A^T x, A real row-major rows x cols (y has cols entries)
  void (*real_gemv_t)(const double* a, std::size_t rows, std::size_t cols, const cplx* x, cplx* y);
  // y_i *= d_i (elementwise complex product)
  void (*cmul_inplace)(const cplx* d, cplx* y, std::size_t n);
};

const KernelTable& scalar_kernels();
/// nullptr when the AVX2 variant was not compiled in.
const KernelTable* avx2_kernels();
bool cpu_has_avx2();

/// Active table (resolved once, thread-safe).
const KernelTable& active();
std::string_view isa_name(Isa isa);

// Span front-ends over the active table.
cplx cdot(std::span<const cplx> x, std::span<const cplx> y);
void caxpy(cplx a, std::span<const cplx> x, std::span<cplx> y);
double norm2(std::span<const cplx> x);
double weighted_norm2(std::span<const double> w, std::span<const cplx> x);
void cmul_inplace(std::span<const cplx> d, std::span<cplx> y);

}  // namespace mflab::simd
