#include <doctest.h>

#include <cmath>
#include <vector>

#include "dvae/error.hpp"
#include "dvae/kernels.hpp"
#include "helpers.hpp"

using namespace dvae;

namespace {

double max_rel_diff(const Matrix& a, const Matrix& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]) / std::max(1.0, std::abs(b.data()[i])));
  return m;
}

struct Shape {
  std::size_t m, k, n;
};
const std::vector<Shape> kShapes{{1, 1, 1}, {3, 5, 7}, {4, 24, 24}, {5, 17, 25}, {33, 29, 49}, {100, 784, 200}};

}  // namespace

TEST_CASE("parallel matmul agrees with the serial reference") {
  Rng rng(1);
  for (const auto& s : kShapes) {
    CAPTURE(s.m);
    CAPTURE(s.n);
    const Matrix a = testing::random_matrix(s.m, s.k, rng);
    const Matrix b = testing::random_matrix(s.k, s.n, rng);
    Matrix fast, ref;
    kernels::matmul(a, b, fast);
    kernels::reference::matmul(a, b, ref);
    CHECK(max_rel_diff(fast, ref) < 1e-12);

    const Matrix at = testing::random_matrix(s.k, s.m, rng);
    kernels::matmul_tn(at, b, fast);
    kernels::reference::matmul_tn(at, b, ref);
    CHECK(max_rel_diff(fast, ref) < 1e-12);
    kernels::matmul_tn(at, b, fast, true);
    kernels::reference::matmul_tn(at, b, ref, true);
    CHECK(max_rel_diff(fast, ref) < 1e-12);

    const Matrix bt = testing::random_matrix(s.n, s.k, rng);
    kernels::matmul_nt(a, bt, fast);
    kernels::reference::matmul_nt(a, bt, ref);
    CHECK(max_rel_diff(fast, ref) < 1e-12);
  }
}

TEST_CASE("results do not depend on the thread count") {
  Rng rng(2);
  const Matrix a = testing::random_matrix(103, 211, rng);
  const Matrix b = testing::random_matrix(211, 67, rng);
  const int before = kernels::num_threads();
  Matrix one, four;
  kernels::set_num_threads(1);
  kernels::matmul(a, b, one);
  kernels::set_num_threads(4);
  kernels::matmul(a, b, four);
  kernels::set_num_threads(before);
  CHECK(one == four);
}

TEST_CASE("transpose, bias and column sums") {
  Rng rng(3);
  const Matrix a = testing::random_matrix(6, 4, rng);
  const Matrix t = kernels::transpose(a);
  REQUIRE(t.rows() == 4);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(t(j, i) == a(i, j));

  Matrix c = a, cref = a;
  const std::vector<double> bias{1.0, -2.0, 0.5, 3.0};
  kernels::add_row_vector(c, bias);
  kernels::reference::add_row_vector(cref, bias);
  CHECK(c == cref);
  CHECK(c(2, 1) == a(2, 1) - 2.0);

  std::vector<double> s(4), sref(4);
  kernels::column_sums(a, s);
  kernels::reference::column_sums(a, sref);
  for (std::size_t j = 0; j < 4; ++j) CHECK(s[j] == doctest::Approx(sref[j]).epsilon(1e-14));
  kernels::column_sums(a, s, true);
  for (std::size_t j = 0; j < 4; ++j) CHECK(s[j] == doctest::Approx(2 * sref[j]).epsilon(1e-14));
}

TEST_CASE("shape mismatches are rejected") {
  Matrix a(2, 3), b(4, 5), c;
  CHECK_THROWS_AS(kernels::matmul(a, b, c), ShapeError);
  CHECK_THROWS_AS(kernels::matmul_tn(a, b, c), ShapeError);
  CHECK_THROWS_AS(kernels::matmul_nt(a, b, c), ShapeError);
  std::vector<double> bias(2);
  CHECK_THROWS_AS(kernels::add_row_vector(a, bias), ShapeError);
}
