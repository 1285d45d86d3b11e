#include "dvae/kernels.hpp"

namespace dvae::kernels::reference {

void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimension mismatch");
  c.resize(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: inner dimension mismatch");
  if (!accumulate) c.resize(a.cols(), b.cols());
  require_shape(c, a.cols(), b.cols(), "matmul_tn");
  for (std::size_t i = 0; i < a.cols(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.rows(); ++k) s += a(k, i) * b(k, j);
      c(i, j) += s;
    }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: inner dimension mismatch");
  c.resize(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      c(i, j) = s;
    }
}

void add_row_vector(Matrix& c, std::span<const double> bias) {
  if (bias.size() != c.cols()) throw ShapeError("add_row_vector: length mismatch");
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.cols(); ++j) c(i, j) += bias[j];
}

void column_sums(const Matrix& a, std::span<double> out, bool accumulate) {
  if (out.size() != a.cols()) throw ShapeError("column_sums: length mismatch");
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double s = accumulate ? out[j] : 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, j);
    out[j] = s;
  }
}

}  // namespace dvae::kernels::reference
