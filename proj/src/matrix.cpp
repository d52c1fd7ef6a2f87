#include "rul/matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "rul/kernels.hpp"

namespace rul {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = 1.0;
  }
  return m;
}

void Matrix::check_finite(std::string_view what) const {
  rul::check_finite(what, data_);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: dimension mismatch (" +
                                std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " * " +
                                std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
  Matrix c(a.rows(), b.cols());
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    // C[i][j] = sum_k A[i][k] * B[k][j], k ascending.
    k.matvec_t_acc(c.row(i).data(), b.data(), a.row(i).data(), b.rows(),
                   b.cols());
  }
  c.check_finite("matmul result");
  return c;
}

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      return false;
    }
  }
  return true;
}

void check_finite(std::string_view what, std::span<const double> values) {
  if (!all_finite(values)) {
    throw std::runtime_error("non-finite value in " + std::string(what));
  }
}

}  // namespace rul
