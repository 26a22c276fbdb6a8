/*
 * Copyright 2026 The richbll Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "doctest.h"
#include "richbll/densela.hpp"
#include "test_util.hpp"

#include <numeric>

using namespace richbll;
using richbll::testing::random_matrix;
using richbll::testing::random_spd;

TEST_CASE("matmul") {
  SUBCASE("identity") {
    const DenseMatrix m = random_matrix(3, 4, 1);
    CHECK(matmul(DenseMatrix::Identity(3, 3), m) == m);
  }
  SUBCASE("hand computed") {
    DenseMatrix a(2, 2), b(2, 1), want(2, 1);
    a << 1, 2, 3, 4;
    b << 0, 1;
    want << 2, 4;
    CHECK(matmul(a, b) == want);
  }
  SUBCASE("matches triple loop") {
    const DenseMatrix a = random_matrix(7, 5, 2);
    const DenseMatrix b = random_matrix(5, 3, 3);
    CHECK((matmul(a, b) - richbll::testing::triple_loop_product(a, b)).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(matmul(DenseMatrix(2, 3), DenseMatrix(2, 3)), DimensionMismatch);
  }
}

TEST_CASE("cholesky") {
  SUBCASE("identity needs no jitter") {
    const auto f = cholesky(DenseMatrix::Identity(4, 4));
    CHECK(f.matrix() == DenseMatrix::Identity(4, 4));
    CHECK(f.jitter_used() == 0.0);
  }
  SUBCASE("2x2 reconstruction") {
    DenseMatrix a(2, 2);
    a << 4, 2, 2, 3;
    const auto f = cholesky(a);
    CHECK(f.matrix()(0, 0) == doctest::Approx(2.0));
    CHECK(f.matrix()(1, 0) == doctest::Approx(1.0));
    CHECK(f.matrix()(0, 1) == 0.0);
    CHECK(f.matrix()(1, 1) * f.matrix()(1, 1) == doctest::Approx(2.0));
    CHECK(relative_frobenius(f.reconstruct(), a) <= 1e-14);
  }
  SUBCASE("zero matrix falls back to the jitter ladder") {
    const auto f = cholesky(DenseMatrix::Zero(2, 2));
    CHECK(f.jitter_used() == doctest::Approx(1e-10));
    CHECK(f.matrix().isApprox(std::sqrt(f.jitter_used()) * DenseMatrix::Identity(2, 2)));
  }
  SUBCASE("rank deficient PSD picks the smallest working jitter") {
    const DenseMatrix v = random_matrix(5, 2, 4);
    const DenseMatrix a = v * v.transpose();
    const auto f = cholesky(a);
    CHECK(f.jitter_used() > 0.0);
    DenseMatrix shifted = a;
    shifted.diagonal().array() += f.jitter_used();
    CHECK(relative_frobenius(f.reconstruct(), shifted) <= 1e-10);
  }
  SUBCASE("indefinite fails") {
    DenseMatrix a(2, 2);
    a << 1, 0, 0, -1;
    CHECK_THROWS_AS(cholesky(a), NotPositiveDefinite);
  }
  SUBCASE("non symmetric rejected") {
    DenseMatrix a(2, 2);
    a << 1, 0.5, 0, 1;
    CHECK_THROWS_AS(cholesky(a), NotSymmetric);
  }
  SUBCASE("reconstruction property over random PSD inputs") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const Eigen::Index n = 1 + static_cast<Eigen::Index>(seed % 12);
      const DenseMatrix g = random_matrix(n, n / 2 + 1, 100 + seed);
      const DenseMatrix a = g * g.transpose();
      const auto f = cholesky(a);
      DenseMatrix shifted = a;
      shifted.diagonal().array() += f.jitter_used();
      CHECK((f.reconstruct() - shifted).norm() / a.norm() <= 1e-10);
      CHECK((f.matrix().diagonal().array() > 0.0).all());
    }
  }
}

TEST_CASE("tri_solve") {
  const auto f = cholesky(random_spd(6, 7));
  const DenseMatrix b = random_matrix(6, 3, 8);
  SUBCASE("identity factor") {
    const auto id = LowerTriangularFactor<double>::identity(6);
    CHECK(tri_solve(id, b, TriSide::Lower) == b);
  }
  SUBCASE("round trip") {
    for (auto side : {TriSide::Lower, TriSide::LowerTranspose}) {
      const DenseMatrix x = tri_solve(f, b, side);
      const DenseMatrix back =
          side == TriSide::Lower ? DenseMatrix(f.matrix() * x) : DenseMatrix(f.matrix().transpose() * x);
      CHECK((back - b).cwiseAbs().maxCoeff() <= 1e-10 * b.cwiseAbs().maxCoeff());
    }
  }
  SUBCASE("two solves apply the inverse") {
    const DenseMatrix a = random_spd(3, 9);
    const auto f3 = cholesky(a);
    const DenseMatrix rhs = random_matrix(3, 2, 10);
    const DenseMatrix x = tri_solve(f3, tri_solve(f3, rhs, TriSide::Lower), TriSide::LowerTranspose);
    const DenseMatrix want = richbll::testing::inverse3(a) * rhs;
    CHECK((x - want).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("shape mismatch") { CHECK_THROWS_AS(tri_solve(f, DenseMatrix(5, 1), TriSide::Lower), DimensionMismatch); }
}

TEST_CASE("sym_eigvals") {
  SUBCASE("diagonal") {
    const DenseMatrix a = DenseVector((DenseVector(3) << 3, 1, 2).finished()).asDiagonal();
    const auto e = sym_eigvals(a);
    CHECK(e == std::vector<double>{1, 2, 3});
  }
  SUBCASE("analytic 2x2") {
    DenseMatrix a(2, 2);
    a << 2, 1, 1, 2;
    const auto e = sym_eigvals(a);
    CHECK(e[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(e[1] == doctest::Approx(3.0).epsilon(1e-14));
  }
  SUBCASE("trace identity") {
    const DenseMatrix g = random_matrix(8, 8, 11);
    const DenseMatrix a = (g + g.transpose()) / 2;
    const auto e = sym_eigvals(a);
    CHECK(std::abs(std::accumulate(e.begin(), e.end(), 0.0) - a.trace()) <= 1e-9);
    CHECK(std::is_sorted(e.begin(), e.end()));
    // Cross-check against a library solver.
    Eigen::SelfAdjointEigenSolver<DenseMatrix> ref(a);
    for (int i = 0; i < 8; ++i) CHECK(e[static_cast<std::size_t>(i)] == doctest::Approx(ref.eigenvalues()(i)).epsilon(1e-10));
  }
  SUBCASE("gram matrices are PSD") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const DenseMatrix a = random_matrix(4, 9, 200 + seed);
      const DenseMatrix g = a.transpose() * a;
      CHECK(sym_eigvals(g).front() >= -1e-10);
    }
  }
  SUBCASE("non symmetric rejected") {
    DenseMatrix a(2, 2);
    a << 1, 2, 3, 4;
    CHECK_THROWS_AS(sym_eigvals(a), NotSymmetric);
  }
  SUBCASE("long double instantiation") {
    Matrix<long double> a(2, 2);
    a << 2, 1, 1, 2;
    const auto e = sym_eigvals(a);
    CHECK(static_cast<double>(e[1]) == doctest::Approx(3.0));
  }
}

TEST_CASE("spectral_norm") {
  CHECK(spectral_norm(DenseMatrix::Zero(3, 2)) == 0.0);
  DenseMatrix d = DenseMatrix::Zero(2, 2);
  d(0, 0) = -5;
  d(1, 1) = 2;
  CHECK(spectral_norm(d) == doctest::Approx(5.0).epsilon(1e-14));
  const DenseMatrix a = random_matrix(6, 4, 12);
  CHECK(std::abs(spectral_norm(a) - richbll::testing::power_iteration_norm(a)) <= 1e-8);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const DenseMatrix b = random_matrix(3 + seed % 4, 2 + seed % 5, 300 + seed);
    CHECK(std::abs(spectral_norm(b) - spectral_norm(DenseMatrix(b.transpose()))) <= 1e-10);
  }
}
