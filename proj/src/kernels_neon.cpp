#if defined(__aarch64__)

#include "rul/kernels.hpp"

#include <arm_neon.h>

#include <cmath>

// NEON variants, 2-wide f64. Same contract as kernels_avx2.cpp: lanes are
// independent outputs, reductions stay k-ascending per lane, no fused
// multiply-add, bit-identical to the scalar reference.

namespace rul::kernels {
namespace {

void matvec_acc_neon(double* y, const double* a, const double* x,
                     std::size_t rows, std::size_t cols) {
  std::size_t i = 0;
  for (; i + 2 <= rows; i += 2) {
    const double* r0 = a + (i + 0) * cols;
    const double* r1 = a + (i + 1) * cols;
    float64x2_t acc = vld1q_f64(y + i);
    std::size_t k = 0;
    for (; k + 2 <= cols; k += 2) {
      const float64x2_t v0 = vld1q_f64(r0 + k);
      const float64x2_t v1 = vld1q_f64(r1 + k);
      const float64x2_t c0 = vtrn1q_f64(v0, v1);  // a0k  a1k
      const float64x2_t c1 = vtrn2q_f64(v0, v1);  // a0k1 a1k1
      acc = vaddq_f64(acc, vmulq_f64(c0, vdupq_n_f64(x[k + 0])));
      acc = vaddq_f64(acc, vmulq_f64(c1, vdupq_n_f64(x[k + 1])));
    }
    double lanes[2] = {vgetq_lane_f64(acc, 0), vgetq_lane_f64(acc, 1)};
    for (; k < cols; ++k) {
      lanes[0] += r0[k] * x[k];
      lanes[1] += r1[k] * x[k];
    }
    y[i + 0] = lanes[0];
    y[i + 1] = lanes[1];
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

void matvec_t_acc_neon(double* y, const double* a, const double* x,
                       std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = a + i * cols;
    const float64x2_t xi = vdupq_n_f64(x[i]);
    std::size_t j = 0;
    for (; j + 2 <= cols; j += 2) {
      vst1q_f64(y + j, vaddq_f64(vld1q_f64(y + j),
                                 vmulq_f64(vld1q_f64(row + j), xi)));
    }
    for (; j < cols; ++j) {
      y[j] += row[j] * x[i];
    }
  }
}

void ger_acc_neon(double* a, const double* x, const double* y,
                  std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = a + i * cols;
    const float64x2_t xi = vdupq_n_f64(x[i]);
    std::size_t j = 0;
    for (; j + 2 <= cols; j += 2) {
      vst1q_f64(row + j, vaddq_f64(vld1q_f64(row + j),
                                   vmulq_f64(xi, vld1q_f64(y + j))));
    }
    for (; j < cols; ++j) {
      row[j] += x[i] * y[j];
    }
  }
}

void axpy_neon(double* y, double alpha, const double* x, std::size_t n) {
  const float64x2_t av = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i,
              vaddq_f64(vld1q_f64(y + i), vmulq_f64(av, vld1q_f64(x + i))));
  }
  for (; i < n; ++i) {
    y[i] += alpha * x[i];
  }
}

void mul_acc_neon(double* z, const double* x, const double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(z + i, vaddq_f64(vld1q_f64(z + i),
                               vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i))));
  }
  for (; i < n; ++i) {
    z[i] += x[i] * y[i];
  }
}

void adam_update_neon(double* p, double* m, double* v, const double* g,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bias_corr1, double bias_corr2) {
  const float64x2_t b1 = vdupq_n_f64(beta1);
  const float64x2_t b2 = vdupq_n_f64(beta2);
  const float64x2_t one_m_b1 = vdupq_n_f64(1.0 - beta1);
  const float64x2_t one_m_b2 = vdupq_n_f64(1.0 - beta2);
  const float64x2_t lrv = vdupq_n_f64(lr);
  const float64x2_t epsv = vdupq_n_f64(eps);
  const float64x2_t bc1 = vdupq_n_f64(bias_corr1);
  const float64x2_t bc2 = vdupq_n_f64(bias_corr2);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t gi = vld1q_f64(g + i);
    const float64x2_t mi =
        vaddq_f64(vmulq_f64(b1, vld1q_f64(m + i)), vmulq_f64(one_m_b1, gi));
    const float64x2_t vi = vaddq_f64(vmulq_f64(b2, vld1q_f64(v + i)),
                                     vmulq_f64(one_m_b2, vmulq_f64(gi, gi)));
    vst1q_f64(m + i, mi);
    vst1q_f64(v + i, vi);
    const float64x2_t m_hat = vdivq_f64(mi, bc1);
    const float64x2_t v_hat = vdivq_f64(vi, bc2);
    const float64x2_t denom = vaddq_f64(vsqrtq_f64(v_hat), epsv);
    const float64x2_t step = vdivq_f64(vmulq_f64(lrv, m_hat), denom);
    vst1q_f64(p + i, vsubq_f64(vld1q_f64(p + i), step));
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

const Backend& neon_backend() {
  static const Backend backend{
      "neon",       matvec_acc_neon, matvec_t_acc_neon, ger_acc_neon,
      axpy_neon,    mul_acc_neon,    adam_update_neon,
  };
  return backend;
}

}  // namespace rul::kernels

#endif  // aarch64
