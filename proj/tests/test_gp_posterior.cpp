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
#include "richbll/gp_posterior.hpp"
#include "test_util.hpp"

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

// Explicit B = [A; I] features, phi_B = B phi_r, as rows Phi_r B^T.
DenseMatrix explicit_b_features(const DenseMatrix& phi_r, const DenseMatrix& a) {
  DenseMatrix out(phi_r.rows(), a.rows() + phi_r.cols());
  out << phi_r * a.transpose(), phi_r;
  return out;
}

}  // namespace

TEST_CASE("fit_posterior / predictive_cov") {
  const DenseMatrix phi_r = with_bias(random_matrix(30, 5, 1));
  const DenseMatrix phi_m = random_matrix(30, 40, 2);
  const DenseMatrix test = with_bias(random_matrix(6, 5, 3, 2.0));
  const double s2 = 0.1;

  SUBCASE("identity transform is the last-layer posterior") {
    const auto post = fit_posterior(phi_r, RichTransform::identity(5), s2);
    CHECK(post.variant == PosteriorVariant::Bll);
    const DenseMatrix inner = phi_r.transpose() * phi_r / s2 + DenseMatrix::Identity(5, 5);
    const DenseMatrix want = test * inner.inverse() * test.transpose();
    CHECK((predictive_cov(post, test) - want).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("k = N subsample gives the full factor") {
    const auto t = fit_transform(exact_bundle(phi_r, phi_m));
    const auto full = fit_posterior(phi_r, t, s2);
    const auto sub = fit_posterior(phi_r, t, s2, SubsampleSpec{30, 4});
    CHECK(full.variant == PosteriorVariant::RichBll);
    CHECK(sub.variant == PosteriorVariant::RichBllSub);
    CHECK(relative_frobenius(sub.inner_factor.matrix(), full.inner_factor.matrix()) <= 1e-12);
  }
  SUBCASE("no data gives the prior") {
    const auto t = fit_transform(exact_bundle(phi_r, phi_m));
    PosteriorOptions opts;
    opts.allow_empty = true;
    const auto post = fit_posterior(DenseMatrix(0, 5), t, s2, std::nullopt, opts);
    const DenseMatrix prior = test * t.gram_btb * test.transpose();
    CHECK(relative_frobenius(predictive_cov(post, test), prior) <= 1e-12);
    CHECK_THROWS_AS(fit_posterior(DenseMatrix(0, 5), t, s2), std::invalid_argument);
  }
  SUBCASE("single test point") {
    const auto t = fit_transform(exact_bundle(phi_r, phi_m));
    const auto post = fit_posterior(phi_r, t, s2);
    const DenseMatrix s = predictive_cov(post, test.topRows(1));
    CHECK(s.rows() == 1);
    CHECK(s(0, 0) >= 0.0);
    CHECK(predictive_variance(post, test)(2) == doctest::Approx(predictive_cov(post, test)(2, 2)).epsilon(1e-12));
  }
  SUBCASE("agrees with kernel-space inference on explicit B features") {
    const auto t = fit_transform(exact_bundle(phi_r, phi_m));
    const auto post = fit_posterior(phi_r, t, s2);
    const DenseMatrix a = fit_A_exact(phi_m, phi_r);
    const DenseMatrix oracle = ntk_gp_oracle<double>(explicit_b_features(phi_r, a), explicit_b_features(test, a), s2);
    CHECK(relative_frobenius(predictive_cov(post, test), oracle) <= 1e-6);
  }
  SUBCASE("more data never increases variance") {
    const auto t = fit_transform(exact_bundle(phi_r, phi_m));
    const auto small = fit_posterior(phi_r.topRows(20), t, s2);
    const auto large = fit_posterior(phi_r, t, s2);
    const DenseVector vs = predictive_variance(small, test);
    const DenseVector vl = predictive_variance(large, test);
    CHECK(((vl - vs).array() <= 1e-9).all());
  }
  SUBCASE("guards") {
    const auto t = fit_transform(exact_bundle(phi_r, phi_m));
    CHECK_THROWS_AS(fit_posterior(phi_r, t, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(fit_posterior(phi_r, t, s2, SubsampleSpec{3, 0}), std::invalid_argument);
    PosteriorOptions opts;
    opts.allow_k_below_r = true;
    CHECK_NOTHROW(fit_posterior(phi_r, t, s2, SubsampleSpec{3, 0}, opts));
    const auto post = fit_posterior(phi_r, t, s2);
    CHECK_THROWS_AS(predictive_cov(post, DenseMatrix(2, 4)), DimensionMismatch);
  }
  SUBCASE("json round trip") {
    const auto post = fit_posterior(phi_r, fit_transform(exact_bundle(phi_r, phi_m)), s2, SubsampleSpec{10, 1});
    const auto back = posterior_model_from_json(nlohmann::json::parse(to_json(post).dump()));
    CHECK(back.variant == PosteriorVariant::RichBllSub);
    CHECK(back.k_used == 10);
    CHECK(predictive_cov(back, test) == predictive_cov(post, test));
  }
}

TEST_CASE("ntk_gp_oracle") {
  const DenseMatrix train = random_matrix(10, 30, 5);
  const DenseMatrix test = random_matrix(4, 30, 6);
  SUBCASE("no data gives the prior kernel") {
    const DenseMatrix s = ntk_gp_oracle<double>(DenseMatrix(0, 30), test, 0.1);
    CHECK((s - test * test.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("interpolation limit") {
    const DenseMatrix s = ntk_gp_oracle<double>(train, train.topRows(1), 1e-8);
    CHECK(s(0, 0) >= -1e-10);
    CHECK(s(0, 0) <= 1e-6);
  }
  SUBCASE("parameter-space Woodbury form") {
    const double s2 = 0.3;
    const DenseMatrix inner = train.transpose() * train / s2 + DenseMatrix::Identity(30, 30);
    const DenseMatrix want = test * inner.inverse() * test.transpose();
    CHECK((ntk_gp_oracle<double>(train, test, s2) - want).cwiseAbs().maxCoeff() <= 1e-8);
  }
  SUBCASE("size cap") {
    CHECK_THROWS_AS(ntk_gp_oracle<double>(DenseMatrix::Zero(kOracleMaxTrain + 1, 2), DenseMatrix::Zero(1, 2), 1.0),
                    SizeCapExceeded);
  }
}

TEST_CASE("predict") {
  const DenseMatrix phi_r = with_bias(random_matrix(25, 4, 7));
  const DenseMatrix phi_m = random_matrix(25, 20, 8);
  const double s2 = 0.05;
  const auto rich = fit_posterior(phi_r, fit_transform(exact_bundle(phi_r, phi_m)), s2);
  const auto bll = fit_posterior(phi_r, RichTransform::identity(4), s2);

  SUBCASE("noise only when the posterior variance vanishes") {
    const auto d = predict(rich, 1.5, DenseVector::Zero(4), true);
    CHECK(d.mean == 1.5);
    CHECK(d.variance == doctest::Approx(s2));
  }
  SUBCASE("rich variance dominates the last-layer variance") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      DenseVector x = random_matrix(4, 1, 100 + seed, 3.0);
      x(3) = 1.0;
      CHECK(predict(rich, 0.0, x, false).variance >= predict(bll, 0.0, x, false).variance - 1e-8);
    }
  }
  SUBCASE("deterministic") {
    DenseVector x = DenseVector::Ones(4);
    CHECK(predict(rich, 0.0, x, true).variance == predict(rich, 0.0, x, true).variance);
  }
}

TEST_CASE("PSD ordering over random instances") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Eigen::Index n = 12 + static_cast<Eigen::Index>(seed);
    const Eigen::Index r = 2 + static_cast<Eigen::Index>(seed % 6);
    const DenseMatrix phi_r = with_bias(random_matrix(n, r, 400 + seed));
    const DenseMatrix phi_m = random_matrix(n, 50, 500 + seed);
    const DenseMatrix test = with_bias(random_matrix(5, r, 600 + seed, 2.0));
    const double s2 = seed % 3 == 0 ? 0.01 : (seed % 3 == 1 ? 0.1 : 1.0);
    const auto rich = fit_posterior(phi_r, fit_transform(exact_bundle(phi_r, phi_m)), s2);
    const auto bll = fit_posterior(phi_r, RichTransform::identity(r), s2);
    const DenseMatrix diff = predictive_cov(rich, test) - predictive_cov(bll, test);
    CHECK(sym_eigvals(symmetrized(diff)).front() >= -1e-8);
  }
}
