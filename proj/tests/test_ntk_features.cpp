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
#include "richbll/ntk_features.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <filesystem>

using namespace richbll;
using richbll::testing::random_matrix;

namespace {

BackboneModel feature_model(Eigen::Index width = 8, std::uint64_t seed = 2) {
  BackboneConfig c;
  c.input_dim = 3;
  c.hidden_widths = {width, width};
  c.init_scale = 1.4;
  c.seed = seed;
  auto model = init_model(c);
  // Non-zero biases so no feature column is identically zero.
  for (auto& layer : model.layers()) layer.bias.setConstant(0.1);
  return model;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("extract_last_layer") {
  const auto model = feature_model();
  const DenseMatrix x = random_matrix(7, 3, 1);
  const DenseMatrix phi = extract_last_layer(model, x);
  CHECK(phi.cols() == model.last_layer_feature_dim());
  CHECK((phi.col(phi.cols() - 1).array() == 1.0).all());
  CHECK(phi.row(2).head(8).transpose() == forward(model, x.row(2).transpose()).penultimate);
  const DenseMatrix empty = extract_last_layer(model, DenseMatrix(0, 3));
  CHECK(empty.rows() == 0);
  CHECK(empty.cols() == model.last_layer_feature_dim());
}

TEST_CASE("extract_hidden_exact") {
  const auto model = feature_model();
  const DenseMatrix x = random_matrix(3, 3, 2);
  const DenseMatrix phi_m = extract_hidden_exact(model, x);
  CHECK(phi_m.cols() == model.hidden_param_count());
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK((phi_m.row(i).transpose() - param_gradient(model, x.row(i).transpose()).hidden).cwiseAbs().maxCoeff() <= 1e-15);
  }
  FeatureBundle bundle = extract_features(model, x);
  const DenseMatrix gram = sketch_gram(bundle);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) {
      const double dot = param_gradient(model, x.row(i).transpose()).hidden.dot(
          param_gradient(model, x.row(j).transpose()).hidden);
      CHECK(gram(i, j) == doctest::Approx(dot).epsilon(1e-12));
    }
  CHECK_THROWS_AS(extract_hidden_exact(model, x, 0), MemoryBudgetExceeded);
}

TEST_CASE("extract_hidden_sketched") {
  const auto model = feature_model(6);
  const Eigen::Index m = model.hidden_param_count();
  const DenseMatrix x = random_matrix(10, 3, 3);

  SUBCASE("identity debug hook equals the exact features") {
    SketchConfig sk;
    sk.q = m;
    sk.debug_identity = true;
    sk.block_size = 7;
    CHECK(extract_hidden_sketched(model, x, sk) == extract_hidden_exact(model, x));
  }
  SUBCASE("deterministic and independent of block size") {
    SketchConfig sk;
    sk.q = 20;
    sk.seed = 4;
    const DenseMatrix a = extract_hidden_sketched(model, x, sk);
    CHECK(a == extract_hidden_sketched(model, x, sk));
    sk.block_size = 3;
    CHECK((a - extract_hidden_sketched(model, x, sk)).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("invalid q") {
    SketchConfig sk;
    sk.q = m + 1;
    CHECK_THROWS_AS(extract_hidden_sketched(model, x, sk), std::invalid_argument);
  }
}

TEST_CASE("sketch P has identity second moment") {
  // E[P P^T] = I: average a diagonal and an off-diagonal entry over 200 seeds.
  const Eigen::Index m = 30, q = 16;
  std::vector<double> diag, off;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    SketchConfig sk;
    sk.q = q;
    sk.seed = seed;
    const DenseMatrix p = sketch_block(sk, m, 0, q);
    const DenseMatrix ppt = p * p.transpose();
    diag.push_back(ppt(3, 3));
    off.push_back(ppt(3, 7));
  }
  auto mean_se = [](const std::vector<double>& v) {
    double mu = 0, s2 = 0;
    for (double a : v) mu += a;
    mu /= static_cast<double>(v.size());
    for (double a : v) s2 += (a - mu) * (a - mu);
    return std::pair{mu, std::sqrt(s2 / (static_cast<double>(v.size()) - 1) / static_cast<double>(v.size()))};
  };
  const auto [dmu, dse] = mean_se(diag);
  const auto [omu, ose] = mean_se(off);
  CHECK(std::abs(dmu - 1.0) <= 3 * dse);
  CHECK(std::abs(omu) <= 3 * ose);
}

TEST_CASE("sketched Gram error shrinks with q") {
  // m = 2*16 + 16 + 16*16 + 16 + ... >= 512 for width 32.
  const auto model = feature_model(32, 5);
  const Eigen::Index m = model.hidden_param_count();
  REQUIRE(m >= 512);
  const DenseMatrix x = random_matrix(12, 3, 6);
  const DenseMatrix exact_h = extract_hidden_exact(model, x);
  const DenseMatrix exact = exact_h * exact_h.transpose();
  std::vector<double> medians;
  for (Eigen::Index q : {64, 128, 256, 512}) {
    std::vector<double> errs;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      SketchConfig sk;
      sk.q = q;
      sk.seed = seed;
      FeatureBundle b{extract_last_layer(model, x), SketchedHidden{extract_hidden_sketched(model, x, sk), sk}, {}};
      b.source_rows.resize(12);
      errs.push_back(relative_frobenius(sketch_gram(b), exact));
    }
    medians.push_back(median(errs));
  }
  for (std::size_t i = 1; i < medians.size(); ++i) CHECK(medians[i] < medians[i - 1]);

  // q = 4m' against q = m'/4 for m' = 128: the larger sketch is closer.
  CHECK(medians[3] < medians[0]);
}

TEST_CASE("bundle file round trip") {
  const auto model = feature_model();
  const DenseMatrix x = random_matrix(9, 3, 7);
  FeatureOptions opts;
  SketchConfig sk;
  sk.q = 11;
  sk.seed = 77;
  opts.sketch = sk;
  const auto bundle = extract_features(model, x, opts, {8, 1, 4});
  CHECK(bundle.source_rows == std::vector<Eigen::Index>{8, 1, 4});
  const auto path = std::filesystem::temp_directory_path() / "richbll_bundle_test.bin";
  save_bundle(bundle, path);
  const auto back = load_bundle(path);
  CHECK(back.phi_r == bundle.phi_r);
  CHECK(back.hidden_matrix() == bundle.hidden_matrix());
  CHECK(back.source_rows == bundle.source_rows);
  REQUIRE(back.is_sketched());
  CHECK(std::get<SketchedHidden>(back.hidden).sketch.seed == 77);
  std::filesystem::remove(path);
}
