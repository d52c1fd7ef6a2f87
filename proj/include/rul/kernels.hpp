#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace rul::kernels {

// Dense double-precision kernels behind the numerics layer. Every operation
// has a pinned evaluation order: reductions accumulate over the ascending
// reduction index, one output at a time, with exactly one rounding per
// multiply and per add (no fma). SIMD backends vectorize across independent
// outputs, never across a reduction, so each backend is required to produce
// results bit-identical to the scalar reference. The equivalence tests assert
// exact equality.
//
// Buffers must not alias.
struct Backend {
  const char* name;

  // y[i] += sum_k a[i*cols + k] * x[k], k ascending. a is rows x cols row-major.
  void (*matvec_acc)(double* y, const double* a, const double* x,
                     std::size_t rows, std::size_t cols);

  // y[j] += sum_i a[i*cols + j] * x[i], i ascending (A^T x).
  void (*matvec_t_acc)(double* y, const double* a, const double* x,
                       std::size_t rows, std::size_t cols);

  // a[i*cols + j] += x[i] * y[j] (rank-1 update).
  void (*ger_acc)(double* a, const double* x, const double* y,
                  std::size_t rows, std::size_t cols);

  // y[i] += alpha * x[i].
  void (*axpy)(double* y, double alpha, const double* x, std::size_t n);

  // z[i] += x[i] * y[i].
  void (*mul_acc)(double* z, const double* x, const double* y, std::size_t n);

  // Bias-corrected Adam update, elementwise:
  //   m = beta1*m + (1-beta1)*g
  //   v = beta2*v + (1-beta2)*(g*g)
  //   p -= (lr * (m/bias_corr1)) / (sqrt(v/bias_corr2) + eps)
  // evaluated in exactly that operation order.
  void (*adam_update)(double* p, double* m, double* v, const double* g,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bias_corr1, double bias_corr2);
};

const Backend& scalar_backend();

#if defined(__x86_64__) || defined(__i386__)
bool avx2_supported();
const Backend& avx2_backend();  // valid only when avx2_supported()
#endif
#if defined(__aarch64__)
const Backend& neon_backend();
#endif

// Process-wide active backend. Defaults to the best supported backend, or to
// the one named by the RUL_KERNELS environment variable when set.
const Backend& active();

// Switch backend by name ("auto", "scalar", "avx2", "neon"). Returns false if
// the name is unknown or unsupported on this machine.
bool select(std::string_view name);

std::vector<std::string> available();

}  // namespace rul::kernels
