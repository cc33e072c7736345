#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "lace/matrix.hpp"
#include "lace/rng.hpp"
#include "support/oracles.hpp"

using lace::Matrix;
using lace::Rng;

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0,
                     double hi = 1.0) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

}  // namespace

TEST_CASE("matmul identity leaves a matrix unchanged") {
  Rng rng(11);
  const Matrix m = random_matrix(rng, 3, 4);
  CHECK(matmul(Matrix::identity(3), m) == m);
}

TEST_CASE("matmul 1x2 by 2x1") {
  Matrix a(1, 2);
  a(0, 0) = 1.0;
  a(0, 1) = 2.0;
  Matrix b(2, 1);
  b(0, 0) = 3.0;
  b(1, 0) = 4.0;
  const Matrix c = matmul(a, b);
  REQUIRE(c.rows() == 1);
  REQUIRE(c.cols() == 1);
  CHECK(c(0, 0) == 11.0);
}

TEST_CASE("matmul matches the triple-loop oracle") {
  Rng rng(7);
  const Matrix a = random_matrix(rng, 5, 7);
  const Matrix b = random_matrix(rng, 7, 3);
  const Matrix got = matmul(a, b);
  const Matrix want = oracle::naive_matmul(a, b);
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(std::abs(got.data()[i] - want.data()[i]) < 1e-12);
  }
}

TEST_CASE("matmul rejects mismatched shapes, naming both") {
  Matrix a(2, 3);
  Matrix b(4, 2);
  CHECK_THROWS_WITH(matmul(a, b), Catch::Matchers::ContainsSubstring("(2x3)") &&
                                      Catch::Matchers::ContainsSubstring("(4x2)"));
}

TEST_CASE("matmul is associative up to 1e-9 relative error") {
  Rng rng(21);
  for (int round = 0; round < 20; ++round) {
    const Matrix a = random_matrix(rng, 4, 3);
    const Matrix b = random_matrix(rng, 3, 5);
    const Matrix c = random_matrix(rng, 5, 2);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i) {
      const double x = left.data()[i];
      const double y = right.data()[i];
      CHECK(std::abs(x - y) <= 1e-9 * std::max({1.0, std::abs(x), std::abs(y)}));
    }
  }
}

TEST_CASE("matmul is pure: identical inputs give bit-identical outputs") {
  Rng rng(5);
  const Matrix a = random_matrix(rng, 6, 6);
  const Matrix b = random_matrix(rng, 6, 6);
  CHECK(matmul(a, b) == matmul(a, b));
}

TEST_CASE("transpose-product helpers agree with explicit oracle products") {
  Rng rng(31);
  const Matrix a = random_matrix(rng, 6, 4);
  const Matrix b = random_matrix(rng, 6, 3);
  Matrix a_t(4, 6);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 4; ++j) a_t(j, i) = a(i, j);
  }
  const Matrix want_at = oracle::naive_matmul(a_t, b);
  const Matrix got_at = matmul_transpose_a(a, b);
  for (std::size_t i = 0; i < want_at.size(); ++i) {
    CHECK(std::abs(got_at.data()[i] - want_at.data()[i]) < 1e-12);
  }

  const Matrix c = random_matrix(rng, 5, 4);
  Matrix c_t(4, 5);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 4; ++j) c_t(j, i) = c(i, j);
  }
  const Matrix want_bt = oracle::naive_matmul(a, c_t);
  const Matrix got_bt = matmul_transpose_b(a, c);
  for (std::size_t i = 0; i < want_bt.size(); ++i) {
    CHECK(std::abs(got_bt.data()[i] - want_bt.data()[i]) < 1e-12);
  }
}

TEST_CASE("Matrix rejects zero dimensions") {
  CHECK_THROWS_AS(Matrix(0, 3), std::invalid_argument);
  CHECK_THROWS_AS(Matrix(3, 0), std::invalid_argument);
}

TEST_CASE("uniform draws land in [lo, hi) with the right mean") {
  Rng rng(2024);
  double sum = 0.0;
  constexpr int n = 1'000'000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform(0.0, 1.0);
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
    sum += x;
  }
  const double mean = sum / n;
  CHECK(mean > 0.499);
  CHECK(mean < 0.501);
}

TEST_CASE("uniform respects arbitrary bounds") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-2.0, 3.0);
    REQUIRE(x >= -2.0);
    REQUIRE(x < 3.0);
  }
  CHECK_THROWS_AS(rng.uniform(1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(rng.uniform(2.0, -1.0), std::invalid_argument);
}

TEST_CASE("same seed reproduces the same stream") {
  Rng a(99);
  Rng b(99);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c(99);
  Rng d(99);
  for (int i = 0; i < 100; ++i) CHECK(c.normal(0.0, 1.0) == d.normal(0.0, 1.0));
}

TEST_CASE("child streams are distinct and reproducible") {
  const Rng parent(1234);
  Rng child0 = parent.child(0);
  Rng child1 = parent.child(1);
  int differing = 0;
  for (int i = 0; i < 100; ++i) {
    if (child0.next_u64() != child1.next_u64()) ++differing;
  }
  CHECK(differing == 100);

  Rng again = parent.child(0);
  Rng reference = parent.child(0);
  for (int i = 0; i < 100; ++i) CHECK(again.next_u64() == reference.next_u64());
}

TEST_CASE("child streams do not collide with the parent stream") {
  Rng parent(77);
  Rng child = parent.child(0);
  int differing = 0;
  for (int i = 0; i < 100; ++i) {
    if (parent.next_u64() != child.next_u64()) ++differing;
  }
  CHECK(differing == 100);
}

TEST_CASE("normal draws have the right spread") {
  Rng rng(888);
  constexpr int n = 1'000'000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal(0.0, 1.0);
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  const double stddev = std::sqrt(var);
  CHECK(stddev > 0.995);
  CHECK(stddev < 1.005);
}

TEST_CASE("normal with tiny spread clusters at the mean") {
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    CHECK(std::abs(rng.normal(5.0, 1e-12) - 5.0) < 1e-9);
  }
  CHECK_THROWS_AS(rng.normal(0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(rng.normal(0.0, -1.0), std::invalid_argument);
}

TEST_CASE("below produces integers in range") {
  Rng rng(15);
  for (int i = 0; i < 10000; ++i) {
    CHECK(rng.below(7) < 7);
  }
  CHECK_THROWS_AS(rng.below(0), std::invalid_argument);
}

TEST_CASE("shuffle is a seeded permutation") {
  Rng a(55);
  Rng b(55);
  std::vector<int> va(100);
  std::vector<int> vb(100);
  for (int i = 0; i < 100; ++i) va[i] = vb[i] = i;
  a.shuffle(va);
  b.shuffle(vb);
  CHECK(va == vb);
  std::vector<int> sorted = va;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
}
