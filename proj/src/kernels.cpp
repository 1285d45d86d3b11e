#include "dvae/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstddef>
#include <cstring>

namespace dvae::kernels {

namespace {

int g_threads = 0;

int team_size() { return g_threads > 0 ? g_threads : omp_get_max_threads(); }

constexpr std::ptrdiff_t kRowBlock = 4;
constexpr std::ptrdiff_t kLanes = 8;
constexpr std::ptrdiff_t kColBlock = 3 * kLanes;

using vec8 = double __attribute__((vector_size(kLanes * sizeof(double))));

inline vec8 load8(const double* p) {
  vec8 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}
inline void store8(double* p, vec8 v) { std::memcpy(p, &v, sizeof v); }

// c[i0:i0+rows, :] = a[i0:i0+rows, :] * b. Full 4-row blocks run a 4 x 24
// register tile; everything else goes through the scalar edge loop. Both
// accumulate over k in increasing order.
void gemm_row_block(const double* __restrict a, const double* __restrict b, double* __restrict c,
                    std::ptrdiff_t i0, std::ptrdiff_t rows, std::ptrdiff_t inner, std::ptrdiff_t cols) {
  const double* a0 = a + i0 * inner;
  double* c0 = c + i0 * cols;
  std::ptrdiff_t j = 0;
  if (rows == kRowBlock) {
    for (; j + kColBlock <= cols; j += kColBlock) {
      vec8 acc00{}, acc01{}, acc02{}, acc10{}, acc11{}, acc12{};
      vec8 acc20{}, acc21{}, acc22{}, acc30{}, acc31{}, acc32{};
      for (std::ptrdiff_t k = 0; k < inner; ++k) {
        const double* brow = b + k * cols + j;
        const vec8 b0 = load8(brow), b1 = load8(brow + kLanes), b2 = load8(brow + 2 * kLanes);
        const double av0 = a0[k], av1 = a0[inner + k], av2 = a0[2 * inner + k], av3 = a0[3 * inner + k];
        acc00 += av0 * b0; acc01 += av0 * b1; acc02 += av0 * b2;
        acc10 += av1 * b0; acc11 += av1 * b1; acc12 += av1 * b2;
        acc20 += av2 * b0; acc21 += av2 * b1; acc22 += av2 * b2;
        acc30 += av3 * b0; acc31 += av3 * b1; acc32 += av3 * b2;
      }
      double* cr = c0 + j;
      store8(cr, acc00); store8(cr + kLanes, acc01); store8(cr + 2 * kLanes, acc02);
      cr += cols;
      store8(cr, acc10); store8(cr + kLanes, acc11); store8(cr + 2 * kLanes, acc12);
      cr += cols;
      store8(cr, acc20); store8(cr + kLanes, acc21); store8(cr + 2 * kLanes, acc22);
      cr += cols;
      store8(cr, acc30); store8(cr + kLanes, acc31); store8(cr + 2 * kLanes, acc32);
    }
  }
  if (j < cols) {
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
      double* crow = c0 + r * cols;
      std::fill(crow + j, crow + cols, 0.0);
      for (std::ptrdiff_t k = 0; k < inner; ++k) {
        const double av = a0[r * inner + k];
        const double* brow = b + k * cols;
        for (std::ptrdiff_t q = j; q < cols; ++q) crow[q] += av * brow[q];
      }
    }
  }
}

}  // namespace

void set_num_threads(int n) { g_threads = n; }
int num_threads() { return team_size(); }

void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimension mismatch");
  if (c.rows() != a.rows() || c.cols() != b.cols()) c.resize(a.rows(), b.cols());
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
  const auto inner = static_cast<std::ptrdiff_t>(a.cols());
  const auto cols = static_cast<std::ptrdiff_t>(b.cols());
  const std::ptrdiff_t blocks = (n + kRowBlock - 1) / kRowBlock;
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
#pragma omp parallel for schedule(static) num_threads(team_size()) if (blocks > 1)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::ptrdiff_t i0 = blk * kRowBlock;
    gemm_row_block(pa, pb, pc, i0, std::min(kRowBlock, n - i0), inner, cols);
  }
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: inner dimension mismatch");
  if (!accumulate) {
    matmul(transpose(a), b, c);
    return;
  }
  require_shape(c, a.cols(), b.cols(), "matmul_tn");
  Matrix tmp;
  matmul(transpose(a), b, tmp);
  const double* src = tmp.data();
  double* dst = c.data();
  for (std::size_t i = 0; i < c.size(); ++i) dst[i] += src[i];
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: inner dimension mismatch");
  matmul(a, transpose(b), c);
}

void add_row_vector(Matrix& c, std::span<const double> bias) {
  if (bias.size() != c.cols()) throw ShapeError("add_row_vector: length mismatch");
  const auto n = static_cast<std::ptrdiff_t>(c.rows());
  const std::size_t m = c.cols();
#pragma omp parallel for schedule(static) num_threads(team_size()) if (n > 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double* row = c.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) row[j] += bias[j];
  }
}

void column_sums(const Matrix& a, std::span<double> out, bool accumulate) {
  if (out.size() != a.cols()) throw ShapeError("column_sums: length mismatch");
  if (!accumulate) std::fill(out.begin(), out.end(), 0.0);
  // Row-major accumulation order; independent of the thread count.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* row = a.data() + i * a.cols();
    for (std::size_t j = 0; j < a.cols(); ++j) out[j] += row[j];
  }
}

}  // namespace dvae::kernels
