#pragma once

// Dense kernels behind the encoder/decoder passes.
//
// The default implementations are OpenMP-parallel over fixed row blocks. Each
// output element is produced by exactly one thread with a fixed summation
// order, so results are bit-identical for any thread count. The serial
// reference versions in kernels::reference are kept for tests and benchmarks.

#include <span>

#include "dvae/matrix.hpp"

namespace dvae::kernels {

/// c = a * b
void matmul(const Matrix& a, const Matrix& b, Matrix& c);
/// c = a^T * b, or c += a^T * b when accumulate is set.
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
/// c = a * b^T
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c);

Matrix transpose(const Matrix& a);

/// c(i, :) += bias for every row i.
void add_row_vector(Matrix& c, std::span<const double> bias);
/// out(j) (+)= sum_i a(i, j)
void column_sums(const Matrix& a, std::span<double> out, bool accumulate = false);

/// Threads used by the parallel kernels; <= 0 restores the OpenMP default.
void set_num_threads(int n);
int num_threads();

namespace reference {

void matmul(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c);
void add_row_vector(Matrix& c, std::span<const double> bias);
void column_sums(const Matrix& a, std::span<double> out, bool accumulate = false);

}  // namespace reference

}  // namespace dvae::kernels
