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
#include "richbll/transform.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <set>

using namespace richbll;
using richbll::testing::random_matrix;

namespace {

DenseMatrix with_bias(DenseMatrix phi) {
  phi.col(phi.cols() - 1).setOnes();
  return phi;
}

FeatureBundle exact_bundle(const DenseMatrix& phi_r, const DenseMatrix& phi_m) {
  FeatureBundle b{phi_r, ExactHidden{phi_m}, {}};
  for (Eigen::Index i = 0; i < phi_r.rows(); ++i) b.source_rows.push_back(i);
  return b;
}

}  // namespace

TEST_CASE("fit_A_exact") {
  SUBCASE("exact linear dependence") {
    const DenseMatrix phi_r = with_bias(random_matrix(20, 4, 1));
    DenseMatrix phi_m = DenseMatrix::Zero(20, 7);
    phi_m.leftCols(4) = 2.0 * phi_r;
    const DenseMatrix a = fit_A_exact(phi_m, phi_r);
    DenseMatrix want = DenseMatrix::Zero(7, 4);
    want.topRows(4) = 2.0 * DenseMatrix::Identity(4, 4);
    CHECK((a - want).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("normal equations hold") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const double ridge = seed % 2 ? 0.7 : 0.0;
      const DenseMatrix phi_r = with_bias(random_matrix(30, 5, 10 + seed));
      const DenseMatrix phi_m = random_matrix(30, 12, 40 + seed);
      const DenseMatrix a = fit_A_exact(phi_m, phi_r, ridge);
      const DenseMatrix lhs = phi_r.transpose() * (phi_m - phi_r * a.transpose());
      CHECK((lhs - ridge * a.transpose()).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }
  SUBCASE("too few rows without ridge") {
    const DenseMatrix phi_r = with_bias(random_matrix(5, 6, 2));
    CHECK_THROWS_AS(fit_A_exact(random_matrix(5, 9, 3), phi_r), RankDeficient);
    CHECK_NOTHROW(fit_A_exact(random_matrix(5, 9, 3), phi_r, 1.0));
  }
}

TEST_CASE("fit_transform") {
  SUBCASE("zero hidden block gives the identity") {
    const DenseMatrix phi_r = with_bias(random_matrix(15, 4, 4));
    const auto t = fit_transform(exact_bundle(phi_r, DenseMatrix::Zero(15, 9)));
    CHECK(t.L.matrix() == DenseMatrix::Identity(4, 4));
    CHECK(t.gram_btb == DenseMatrix::Identity(4, 4));
  }
  SUBCASE("matches A^T A + I from the direct least-squares map") {
    const DenseMatrix phi_r = with_bias(random_matrix(40, 6, 5));
    const DenseMatrix phi_m = random_matrix(40, 80, 6);
    const auto t = fit_transform(exact_bundle(phi_r, phi_m));
    const DenseMatrix a = fit_A_exact(phi_m, phi_r);
    const DenseMatrix btb = a.transpose() * a + DenseMatrix::Identity(6, 6);
    CHECK((t.L.reconstruct() - btb).cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, btb.cwiseAbs().maxCoeff()));
    CHECK(relative_frobenius(t.L.reconstruct(), t.gram_btb) <= 1e-10);
    CHECK(sym_eigvals(t.gram_btb).front() >= 1.0 - 1e-8);
    CHECK(t.fit_rows.size() == 40);
  }
  SUBCASE("full-size subsample reproduces the full fit") {
    const DenseMatrix phi_r = with_bias(random_matrix(25, 5, 7));
    const DenseMatrix phi_m = random_matrix(25, 30, 8);
    const auto bundle = exact_bundle(phi_r, phi_m);
    const auto full = fit_transform(bundle);
    const auto sub = fit_transform(bundle, 0.0, SubsampleSpec{25, 3});
    CHECK(relative_frobenius(sub.L.matrix(), full.L.matrix()) <= 1e-12);
    std::set<Eigen::Index> rows(sub.fit_rows.begin(), sub.fit_rows.end());
    CHECK(rows.size() == 25);
  }
  SUBCASE("deterministic subsample") {
    const DenseMatrix phi_r = with_bias(random_matrix(50, 4, 9));
    const auto bundle = exact_bundle(phi_r, random_matrix(50, 10, 10));
    const auto a = fit_transform(bundle, 0.0, SubsampleSpec{20, 5});
    const auto b = fit_transform(bundle, 0.0, SubsampleSpec{20, 5});
    CHECK(a.L.matrix() == b.L.matrix());
    CHECK(a.fit_rows == b.fit_rows);
  }
  SUBCASE("PSD floor over random instances") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const DenseMatrix phi_r = with_bias(random_matrix(12 + seed, 3 + seed % 5, 100 + seed));
      const auto t = fit_transform(exact_bundle(phi_r, random_matrix(12 + seed, 20, 200 + seed, 3.0)));
      CHECK(sym_eigvals(t.gram_btb).front() >= 1.0 - 1e-8);
    }
  }
  SUBCASE("rank deficiency propagates") {
    const DenseMatrix phi_r = with_bias(random_matrix(3, 5, 11));
    CHECK_THROWS_AS(fit_transform(exact_bundle(phi_r, random_matrix(3, 4, 12))), RankDeficient);
  }
  SUBCASE("json round trip") {
    const DenseMatrix phi_r = with_bias(random_matrix(20, 4, 13));
    const auto t = fit_transform(exact_bundle(phi_r, random_matrix(20, 6, 14)), 0.5);
    const auto back = rich_transform_from_json(nlohmann::json::parse(to_json(t).dump()));
    CHECK(back.L.matrix() == t.L.matrix());
    CHECK(back.gram_btb == t.gram_btb);
    CHECK(back.ridge == 0.5);
    CHECK(back.fit_rows == t.fit_rows);
  }
}

TEST_CASE("fit_transform_streamed matches the bundle route") {
  BackboneConfig c;
  c.input_dim = 2;
  c.hidden_widths = {7, 5};
  c.seed = 8;
  auto model = init_model(c);
  for (auto& layer : model.layers()) layer.bias.setConstant(0.05);
  const DenseMatrix x = random_matrix(300, 2, 15);
  const auto via_bundle = fit_transform(extract_features(model, x));
  const auto streamed = fit_transform_streamed(model, x);
  CHECK(relative_frobenius(streamed.gram_btb, via_bundle.gram_btb) <= 1e-10);
}

TEST_CASE("subsample_rows") {
  SUBCASE("k = n is a permutation") {
    auto idx = subsample_rows(10, {10, 1});
    std::sort(idx.begin(), idx.end());
    for (Eigen::Index i = 0; i < 10; ++i) CHECK(idx[static_cast<std::size_t>(i)] == i);
  }
  SUBCASE("uniform inclusion") {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
      const auto idx = subsample_rows(20, {10, seed});
      hits += std::find(idx.begin(), idx.end(), 0) != idx.end();
    }
    CHECK(std::abs(hits / 10000.0 - 0.5) <= 0.02);
  }
  SUBCASE("deterministic, distinct") {
    const auto a = subsample_rows(100, {30, 9});
    CHECK(a == subsample_rows(100, {30, 9}));
    CHECK(std::set<Eigen::Index>(a.begin(), a.end()).size() == 30);
  }
  SUBCASE("k > n") { CHECK_THROWS_AS(subsample_rows(5, {6, 0}), std::invalid_argument); }
}
