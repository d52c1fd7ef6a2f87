#include "rul/kernels.hpp"

#include <cmath>

// Reference kernels. These define the numeric contract: the SIMD variants are
// correct only if they reproduce these bit-for-bit.

namespace rul::kernels {
namespace {

void matvec_acc_scalar(double* y, const double* a, const double* x,
                       std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = a + i * cols;
    double acc = y[i];
    for (std::size_t k = 0; k < cols; ++k) {
      acc += row[k] * x[k];
    }
    y[i] = acc;
  }
}

void matvec_t_acc_scalar(double* y, const double* a, const double* x,
                         std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = a + i * cols;
    const double xi = x[i];
    for (std::size_t j = 0; j < cols; ++j) {
      y[j] += row[j] * xi;
    }
  }
}

void ger_acc_scalar(double* a, const double* x, const double* y,
                    std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = a + i * cols;
    const double xi = x[i];
    for (std::size_t j = 0; j < cols; ++j) {
      row[j] += xi * y[j];
    }
  }
}

void axpy_scalar(double* y, double alpha, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    y[i] += alpha * x[i];
  }
}

void mul_acc_scalar(double* z, const double* x, const double* y,
                    std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    z[i] += x[i] * y[i];
  }
}

void adam_update_scalar(double* p, double* m, double* v, const double* g,
                        std::size_t n, double lr, double beta1, double beta2,
                        double eps, double bias_corr1, double bias_corr2) {
  for (std::size_t i = 0; i < n; ++i) {
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

const Backend& scalar_backend() {
  static const Backend backend{
      "scalar",         matvec_acc_scalar, matvec_t_acc_scalar,
      ger_acc_scalar,   axpy_scalar,       mul_acc_scalar,
      adam_update_scalar,
  };
  return backend;
}

}  // namespace rul::kernels
