#if defined(__x86_64__) || defined(__i386__)

#include "rul/kernels.hpp"

#include <immintrin.h>

#include <cmath>

// AVX2 variants. Vector lanes always map to independent outputs, and within a
// lane the reduction runs over ascending k with separate mul/add roundings, so
// every result is bit-identical to kernels_scalar.cpp. No fma intrinsics for
// the same reason.

namespace rul::kernels {
namespace {

// y[i..i+3] += columns of the 4x4 tile starting at a[i][k], times x[k..k+3].
// Rows are loaded contiguously and transposed in registers so the per-lane
// accumulation order stays k-ascending.
void matvec_acc_avx2(double* y, const double* a, const double* x,
                     std::size_t rows, std::size_t cols) {
  std::size_t i = 0;
  for (; i + 4 <= rows; i += 4) {
    const double* r0 = a + (i + 0) * cols;
    const double* r1 = a + (i + 1) * cols;
    const double* r2 = a + (i + 2) * cols;
    const double* r3 = a + (i + 3) * cols;
    __m256d acc = _mm256_loadu_pd(y + i);
    std::size_t k = 0;
    for (; k + 4 <= cols; k += 4) {
      const __m256d v0 = _mm256_loadu_pd(r0 + k);
      const __m256d v1 = _mm256_loadu_pd(r1 + k);
      const __m256d v2 = _mm256_loadu_pd(r2 + k);
      const __m256d v3 = _mm256_loadu_pd(r3 + k);
      const __m256d t0 = _mm256_unpacklo_pd(v0, v1);  // a0k a1k a0k2 a1k2
      const __m256d t1 = _mm256_unpackhi_pd(v0, v1);
      const __m256d t2 = _mm256_unpacklo_pd(v2, v3);
      const __m256d t3 = _mm256_unpackhi_pd(v2, v3);
      const __m256d c0 = _mm256_permute2f128_pd(t0, t2, 0x20);
      const __m256d c1 = _mm256_permute2f128_pd(t1, t3, 0x20);
      const __m256d c2 = _mm256_permute2f128_pd(t0, t2, 0x31);
      const __m256d c3 = _mm256_permute2f128_pd(t1, t3, 0x31);
      acc = _mm256_add_pd(acc, _mm256_mul_pd(c0, _mm256_set1_pd(x[k + 0])));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(c1, _mm256_set1_pd(x[k + 1])));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(c2, _mm256_set1_pd(x[k + 2])));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(c3, _mm256_set1_pd(x[k + 3])));
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    for (; k < cols; ++k) {
      lanes[0] += r0[k] * x[k];
      lanes[1] += r1[k] * x[k];
      lanes[2] += r2[k] * x[k];
      lanes[3] += r3[k] * x[k];
    }
    y[i + 0] = lanes[0];
    y[i + 1] = lanes[1];
    y[i + 2] = lanes[2];
    y[i + 3] = lanes[3];
  }
  for (; i < rows; ++i) {
    const double* row = a + i * cols;
    double acc = y[i];
    for (std::size_t k = 0; k < cols; ++k) {
      acc += row[k] * x[k];
    }
    y[i] = acc;
  }
}

void matvec_t_acc_avx2(double* y, const double* a, const double* x,
                       std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = a + i * cols;
    const __m256d xi = _mm256_set1_pd(x[i]);
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) {
      const __m256d acc = _mm256_add_pd(
          _mm256_loadu_pd(y + j), _mm256_mul_pd(_mm256_loadu_pd(row + j), xi));
      _mm256_storeu_pd(y + j, acc);
    }
    for (; j < cols; ++j) {
      y[j] += row[j] * x[i];
    }
  }
}

void ger_acc_avx2(double* a, const double* x, const double* y,
                  std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = a + i * cols;
    const __m256d xi = _mm256_set1_pd(x[i]);
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) {
      const __m256d acc = _mm256_add_pd(
          _mm256_loadu_pd(row + j), _mm256_mul_pd(xi, _mm256_loadu_pd(y + j)));
      _mm256_storeu_pd(row + j, acc);
    }
    for (; j < cols; ++j) {
      row[j] += x[i] * y[j];
    }
  }
}

void axpy_avx2(double* y, double alpha, const double* x, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d acc = _mm256_add_pd(_mm256_loadu_pd(y + i),
                                      _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, acc);
  }
  for (; i < n; ++i) {
    y[i] += alpha * x[i];
  }
}

void mul_acc_avx2(double* z, const double* x, const double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d acc =
        _mm256_add_pd(_mm256_loadu_pd(z + i),
                      _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(z + i, acc);
  }
  for (; i < n; ++i) {
    z[i] += x[i] * y[i];
  }
}

void adam_update_avx2(double* p, double* m, double* v, const double* g,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bias_corr1, double bias_corr2) {
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d one_m_b1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d one_m_b2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d epsv = _mm256_set1_pd(eps);
  const __m256d bc1 = _mm256_set1_pd(bias_corr1);
  const __m256d bc2 = _mm256_set1_pd(bias_corr2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gi = _mm256_loadu_pd(g + i);
    const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)),
                                     _mm256_mul_pd(one_m_b1, gi));
    const __m256d vi =
        _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                      _mm256_mul_pd(one_m_b2, _mm256_mul_pd(gi, gi)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d m_hat = _mm256_div_pd(mi, bc1);
    const __m256d v_hat = _mm256_div_pd(vi, bc2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(v_hat), epsv);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lrv, m_hat), denom);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
  }
  for (; i < n; ++i) {
    const double gi = g[i];
    const double mi = beta1 * m[i] + (1.0 - beta1) * gi;
    const double vi = beta2 * v[i] + (1.0 - beta2) * (gi * gi);
    m[i] = mi;
    v[i] = vi;
    const double m_hat = mi / bias_corr1;
    const double v_hat = vi / bias_corr2;
    const double denom = std::sqrt(v_hat) + eps;
    p[i] = p[i] - (lr * m_hat) / denom;
  }
}

}  // namespace

const Backend& avx2_backend() {
  static const Backend backend{
      "avx2",       matvec_acc_avx2, matvec_t_acc_avx2, ger_acc_avx2,
      axpy_avx2,    mul_acc_avx2,    adam_update_avx2,
  };
  return backend;
}

}  // namespace rul::kernels

#endif  // x86
